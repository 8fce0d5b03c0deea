"""EER, minimum normalised t-DCF and per-attack breakdowns.

Score direction is fixed: higher means more bonafide, and a trial is accepted
when ``score >= threshold``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from importlib import resources
from typing import NamedTuple

import numpy as np

from .scorefile import ScoreFile

log = logging.getLogger(__name__)


class MetricError(ValueError):
    pass


@dataclass
class DetCurve:
    """FRR/FAR as step functions of the threshold (ascending, +inf last)."""
    thresholds: np.ndarray
    frr: np.ndarray
    far: np.ndarray

    def to_csv(self) -> str:
        rows = ["threshold,frr,far"]
        rows += [f"{t!r},{r!r},{a!r}" for t, r, a in
                 zip(self.thresholds.tolist(), self.frr.tolist(), self.far.tolist())]
        return "\n".join(rows) + "\n"


def _split(scores, spoof=None) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(scores, ScoreFile):
        bona, spf = scores.bonafide_scores(), scores.spoof_scores()
    else:
        bona = np.asarray(scores, dtype=np.float64).ravel()
        spf = np.asarray(spoof, dtype=np.float64).ravel()
    if bona.size == 0 or spf.size == 0:
        raise MetricError("need at least one bonafide and one spoof score")
    return bona, spf


def _rates(bona: np.ndarray, spoof: np.ndarray, thresholds: np.ndarray):
    """Miss (bonafide < t) and false-accept (spoof >= t) rates at each t."""
    miss = np.searchsorted(np.sort(bona), thresholds, side="left") / bona.size
    fa = (spoof.size - np.searchsorted(np.sort(spoof), thresholds, side="left")) / spoof.size
    return miss, fa


def det_curve(scores, spoof=None) -> DetCurve:
    bona, spf = _split(scores, spoof)
    thr = np.append(np.unique(np.concatenate([bona, spf])), np.inf)
    frr, far = _rates(bona, spf, thr)
    return DetCurve(thr, frr, far)


class EerResult(NamedTuple):
    eer: float
    threshold: float

    @property
    def inverted(self) -> bool:
        """True when the detector ranks spoofs above bonafide (EER > 0.5)."""
        return self.eer > 0.5


def compute_eer(scores, spoof=None) -> EerResult:
    """Crossing of FRR and FAR, linearly interpolated between adjacent
    operating points when the step functions do not meet exactly.

    Accepts a ScoreFile or a pair of (bonafide, spoof) score arrays.
    """
    det = det_curve(scores, spoof)
    d = det.frr - det.far  # non-decreasing, -1 at the lowest score, +1 at +inf
    i = int(np.argmax(d >= 0))
    if d[i] == 0 or i == 0:
        return EerResult(float(det.frr[i]), float(det.thresholds[i]))
    lam = -d[i - 1] / (d[i] - d[i - 1])
    eer = det.frr[i - 1] + lam * (det.frr[i] - det.frr[i - 1])
    t0, t1 = det.thresholds[i - 1], det.thresholds[i]
    thr = t0 + lam * (t1 - t0) if np.isfinite(t1) else t0
    return EerResult(float(eer), float(thr))


@dataclass(frozen=True)
class AsvOperatingPoint:
    p_target: float
    p_nontarget: float
    p_spoof: float
    c_miss_asv: float
    c_fa_asv: float
    c_miss_cm: float
    c_fa_cm: float
    p_miss_asv: float
    p_fa_asv: float
    p_miss_spoof_asv: float

    def __post_init__(self):
        if abs(self.p_target + self.p_nontarget + self.p_spoof - 1.0) > 1e-12:
            raise MetricError("priors must sum to 1")
        for name in ("c_miss_asv", "c_fa_asv", "c_miss_cm", "c_fa_cm"):
            if getattr(self, name) <= 0:
                raise MetricError(f"{name} must be positive")
        for name in ("p_miss_asv", "p_fa_asv", "p_miss_spoof_asv"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise MetricError(f"{name} must lie in [0, 1]")

    @property
    def c1(self) -> float:
        return (self.p_target * (self.c_miss_cm - self.c_miss_asv * self.p_miss_asv)
                - self.p_nontarget * self.c_fa_asv * self.p_fa_asv)

    @property
    def c2(self) -> float:
        return self.c_fa_cm * self.p_spoof * (1.0 - self.p_miss_spoof_asv)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "AsvOperatingPoint":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise MetricError(f"unknown operating-point fields {sorted(unknown)}")
        missing = set(cls.__dataclass_fields__) - set(d)
        if missing:
            raise MetricError(f"missing operating-point fields {sorted(missing)}")
        try:
            return cls(**{k: float(v) for k, v in d.items()})
        except (TypeError, ValueError) as e:
            raise MetricError(f"bad operating-point value: {e}") from None

    @classmethod
    def load(cls, path) -> "AsvOperatingPoint":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def default_operating_point() -> AsvOperatingPoint:
    """Shipped default; the ASV error rates in it are illustrative."""
    text = resources.files("phasefuse").joinpath("data/asv_operating_point.json").read_text()
    return AsvOperatingPoint.from_dict(json.loads(text))


class TdcfResult(NamedTuple):
    min_tdcf: float
    threshold: float


def tdcf_curve(scores, op: AsvOperatingPoint, spoof=None):
    """(thresholds, normalised t-DCF) over distinct scores plus -inf and +inf."""
    c1, c2 = op.c1, op.c2
    if c1 <= 0 or c2 <= 0:
        raise MetricError(f"degenerate operating point: C1={c1}, C2={c2}")
    bona, spf = _split(scores, spoof)
    thr = np.concatenate([[-np.inf], np.unique(np.concatenate([bona, spf])), [np.inf]])
    p_miss, p_fa = _rates(bona, spf, thr)
    return thr, (c1 * p_miss + c2 * p_fa) / min(c1, c2)


def compute_min_tdcf(scores, op: AsvOperatingPoint | None = None, spoof=None) -> TdcfResult:
    """Minimum normalised tandem cost (2019 formulation) over all thresholds."""
    thr, cost = tdcf_curve(scores, op or default_operating_point(), spoof)
    i = int(np.argmin(cost))
    return TdcfResult(float(cost[i]), float(thr[i]))


@dataclass
class AttackRow:
    attack_id: str
    n_spoof: int
    eer: float


@dataclass
class Breakdown:
    rows: list[AttackRow]
    pooled_eer: float
    pooled_min_tdcf: float

    def to_text(self) -> str:
        lines = [f"{'attack':<10}{'n_spoof':>8}{'EER(%)':>10}"]
        lines += [f"{r.attack_id:<10}{r.n_spoof:>8}{100 * r.eer:>10.2f}" for r in self.rows]
        lines.append(f"{'pooled':<10}{'':>8}{100 * self.pooled_eer:>10.2f}")
        lines.append(f"pooled min t-DCF {self.pooled_min_tdcf:.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["attack_id,n_spoof,eer"]
        lines += [f"{r.attack_id},{r.n_spoof},{r.eer!r}" for r in self.rows]
        lines.append(f"pooled,,{self.pooled_eer!r}")
        lines.append(f"pooled_min_tdcf,,{self.pooled_min_tdcf!r}")
        return "\n".join(lines) + "\n"


def per_attack_breakdown(scores: ScoreFile, op: AsvOperatingPoint | None = None,
                         attacks: list[str] | None = None) -> Breakdown:
    """Per-attack EER against the full bonafide pool, plus pooled metrics.

    Requested attacks with no spoof rows are skipped with a warning.
    """
    bona = scores.bonafide_scores()
    rows = []
    for a in attacks if attacks is not None else scores.spoof_attacks():
        spf = scores.spoof_scores(a)
        if spf.size == 0:
            log.warning("attack %s has no spoof rows; skipped", a)
            continue
        rows.append(AttackRow(a, int(spf.size), compute_eer(bona, spf).eer))
    return Breakdown(rows, compute_eer(scores).eer, compute_min_tdcf(scores, op).min_tdcf)


__all__ = [
    "AsvOperatingPoint", "AttackRow", "Breakdown", "DetCurve", "EerResult", "MetricError",
    "TdcfResult", "compute_eer", "compute_min_tdcf", "default_operating_point", "det_curve",
    "per_attack_breakdown", "tdcf_curve",
]
