"""Score files: one row "utt_id attack_id label score" per utterance.

Scores are bonafide log-probabilities, written with ``repr`` so a text
round trip is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BONAFIDE = "bonafide"
SPOOF = "spoof"


class ScoreFileError(ValueError):
    pass


@dataclass
class ScoreFile:
    utterance_ids: list[str] = field(default_factory=list)
    attack_ids: list[str] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.utterance_ids)
        if not (len(self.attack_ids) == len(self.labels) == len(self.scores) == n):
            raise ScoreFileError("score file columns differ in length")
        for lab in self.labels:
            if lab not in (BONAFIDE, SPOOF):
                raise ScoreFileError(f"bad label {lab!r}")
        if not all(math.isfinite(s) for s in self.scores):
            raise ScoreFileError("scores must be finite")

    def __len__(self):
        return len(self.scores)

    def append(self, utt: str, attack: str, label: str, score: float) -> None:
        if label not in (BONAFIDE, SPOOF):
            raise ScoreFileError(f"bad label {label!r}")
        if not math.isfinite(score):
            raise ScoreFileError(f"non-finite score for {utt}")
        self.utterance_ids.append(utt)
        self.attack_ids.append(attack)
        self.labels.append(label)
        self.scores.append(float(score))

    @property
    def score_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=np.float64)

    @property
    def is_bonafide(self) -> np.ndarray:
        return np.array([lab == BONAFIDE for lab in self.labels], dtype=bool)

    def bonafide_scores(self) -> np.ndarray:
        return self.score_array[self.is_bonafide]

    def spoof_scores(self, attack: str | None = None) -> np.ndarray:
        mask = ~self.is_bonafide
        if attack is not None:
            mask &= np.array([a == attack for a in self.attack_ids], dtype=bool)
        return self.score_array[mask]

    def spoof_attacks(self) -> list[str]:
        return sorted({a for a, lab in zip(self.attack_ids, self.labels) if lab == SPOOF})

    def to_text(self) -> str:
        return "".join(f"{u} {a} {lab} {s!r}\n" for u, a, lab, s in
                       zip(self.utterance_ids, self.attack_ids, self.labels, self.scores))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "ScoreFile":
        sf = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ScoreFileError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            try:
                score = float(parts[3])
            except ValueError:
                raise ScoreFileError(f"line {lineno}: bad score {parts[3]!r}") from None
            sf.append(parts[0], parts[1], parts[2], score)
        return sf

    @classmethod
    def load(cls, path) -> "ScoreFile":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_arrays(cls, bonafide, spoof, attack: str = "A00") -> "ScoreFile":
        """Convenience constructor for tests and analysis."""
        sf = cls()
        for i, s in enumerate(np.asarray(bonafide, dtype=float)):
            sf.append(f"B{i:05d}", "-", BONAFIDE, float(s))
        for i, s in enumerate(np.asarray(spoof, dtype=float)):
            sf.append(f"S{i:05d}", attack, SPOOF, float(s))
        return sf
