"""Unified feature maps: extension, 400-frame segmentation, channel stacking.

Also hosts the feature-domain controlled corpus, in which class information
can be confined to the phase channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import MAGNITUDE, PHASE, FeatureMap, wrap_phase

SEGMENT_LEN = 400
SEGMENT_HOP = 200


def extend_to_multiple(feat: FeatureMap, length: int = SEGMENT_LEN) -> FeatureMap:
    """Cyclically repeat frames from frame 0 until T is a multiple of ``length``."""
    t = feat.T
    if t < 1:
        raise ValueError("feature map has no frames")
    target = length * -(-t // length)
    if target == t:
        return feat
    idx = np.arange(target) % t
    return FeatureMap(feat.values[idx], feat.channel_kind, feat.source)


def segment_starts(t: int, length: int = SEGMENT_LEN, hop: int = SEGMENT_HOP) -> list[int]:
    if t % length:
        raise ValueError(f"T={t} is not a multiple of {length}; extend first")
    return list(range(0, t - length + 1, hop))


def segment(feat: FeatureMap | np.ndarray, length: int = SEGMENT_LEN, hop: int = SEGMENT_HOP) -> list[np.ndarray]:
    """Overlapping fixed-length views (no copies) of an extended map."""
    v = feat.values if isinstance(feat, FeatureMap) else feat
    return [v[s:s + length] for s in segment_starts(v.shape[0], length, hop)]


def stack_channels(mag: np.ndarray, phase_like: np.ndarray | None = None) -> np.ndarray:
    """Channel-first stack: (1, T, D) or (2, T, D) with magnitude first."""
    mag = np.asarray(mag)
    if phase_like is None:
        return mag[None]
    phase_like = np.asarray(phase_like)
    if mag.shape != phase_like.shape:
        raise ValueError(f"cannot stack {mag.shape} with {phase_like.shape}")
    return np.stack([mag, phase_like])


def aggregate_scores(segment_scores) -> float:
    scores = np.asarray(list(segment_scores), dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no segment scores to aggregate")
    return float(scores.mean())


# --- controlled feature-domain corpus ----------------------------------------

STRUCTURED = "structured"
UNIFORM_RANDOM = "uniform_random"
SHARED = "shared_distribution"
TILTED = "class_tilted"


@dataclass
class FeatureCorpusSpec:
    """Feature-domain corpus.

    ``phase_mode`` structured: bonafide phase is a per-bin random walk
    (step 0.1 rad), spoof phase i.i.d. uniform. uniform_random: both classes
    uniform (no phase cue). ``magnitude_mode`` shared_distribution draws
    both classes' magnitudes from one law; class_tilted adds a spectral tilt
    to spoofs.
    """

    n_per_class: int
    T: int = SEGMENT_LEN
    D: int = 16
    phase_mode: str = STRUCTURED
    magnitude_mode: str = SHARED
    seed: int = 0
    walk_step: float = 0.1

    def __post_init__(self):
        if self.n_per_class < 1 or self.T < 1 or self.D < 1:
            raise ValueError("counts and dimensions must be >= 1")
        if self.phase_mode not in (STRUCTURED, UNIFORM_RANDOM):
            raise ValueError(f"unknown phase_mode {self.phase_mode!r}")
        if self.magnitude_mode not in (SHARED, TILTED):
            raise ValueError(f"unknown magnitude_mode {self.magnitude_mode!r}")


@dataclass
class LabeledFeatures:
    utterance_id: str
    magnitude: FeatureMap
    phase: FeatureMap | None
    label: int  # 1 bonafide, 0 spoof
    attack_id: str = "-"


def _magnitude_map(rng: np.random.Generator, t: int, d: int, tilt: float) -> np.ndarray:
    # dB-like map: smooth random envelope + per-frame level + pixel noise
    env = np.cumsum(rng.normal(0.0, 2.0, d))
    level = np.cumsum(rng.normal(0.0, 0.5, t))
    noise = rng.normal(0.0, 5.0, (t, d))
    ramp = np.linspace(-1.0, 1.0, d)
    return -50.0 + env[None, :] + level[:, None] + noise + tilt * 10.0 * ramp[None, :]


def _walk_phase(rng: np.random.Generator, t: int, d: int, step: float) -> np.ndarray:
    start = rng.uniform(-np.pi, np.pi, d)
    steps = rng.normal(0.0, step, (t, d))
    steps[0] = 0.0
    return wrap_phase(start[None, :] + np.cumsum(steps, axis=0))


def _uniform_phase(rng: np.random.Generator, t: int, d: int) -> np.ndarray:
    return wrap_phase(rng.uniform(-np.pi, np.pi, (t, d)))


def synth_feature_corpus(spec: FeatureCorpusSpec, prefix: str = "F") -> list[LabeledFeatures]:
    """Deterministic labelled (magnitude, phase) maps, bonafide first."""
    rng = np.random.default_rng(spec.seed)
    items = []
    for i in range(2 * spec.n_per_class):
        bona = i < spec.n_per_class
        tilt = 0.0 if (bona or spec.magnitude_mode == SHARED) else 1.0
        mag = _magnitude_map(rng, spec.T, spec.D, tilt)
        if bona and spec.phase_mode == STRUCTURED:
            ph = _walk_phase(rng, spec.T, spec.D, spec.walk_step)
        else:
            ph = _uniform_phase(rng, spec.T, spec.D)
        items.append(LabeledFeatures(
            f"{prefix}_{i:05d}",
            FeatureMap(mag, MAGNITUDE, "synthetic"),
            FeatureMap(ph, PHASE, "synthetic"),
            1 if bona else 0,
            "-" if bona else "SPH",
        ))
    return items
