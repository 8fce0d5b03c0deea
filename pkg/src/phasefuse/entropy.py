"""Per-frame histogram entropy of feature maps."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import dsp
from .dataset_io import Waveform
from .dsp import MAGNITUDE, FeatureMap


@dataclass(frozen=True)
class EntropyConfig:
    n_bins: int = 32
    log_base: float = 2.0

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")


@dataclass
class EntropyCurve:
    values: np.ndarray
    frame_times: np.ndarray
    source_label: str

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def global_minmax_normalize(feat: FeatureMap) -> FeatureMap:
    """Affinely map the whole map onto [0, 1]; a constant map becomes 0.5."""
    v = np.asarray(feat.values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.full_like(v, 0.5)
    else:
        out = (v - lo) / (hi - lo)
    return FeatureMap(out, feat.channel_kind if feat.channel_kind != "phase" else MAGNITUDE, feat.source)


def frame_entropy(feat: FeatureMap | np.ndarray, cfg: EntropyConfig = EntropyConfig(),
                  frame_times=None, label: str = "") -> EntropyCurve:
    """Entropy of each frame's histogram over n_bins equal bins on [0, 1].

    The last bin is closed on the right.
    """
    v = feat.values if isinstance(feat, FeatureMap) else np.asarray(feat)
    t, d = v.shape
    idx = np.clip(np.floor(v * cfg.n_bins).astype(np.int64), 0, cfg.n_bins - 1)
    counts = np.zeros((t, cfg.n_bins))
    np.add.at(counts, (np.repeat(np.arange(t), d), idx.ravel()), 1.0)
    p = counts / d
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    ent = -terms.sum(axis=1) / np.log(cfg.log_base)
    ent = np.maximum(ent, 0.0)
    times = np.arange(t, dtype=float) if frame_times is None else np.asarray(frame_times)
    return EntropyCurve(ent, times, label)


def map_entropy(feat: FeatureMap, cfg: EntropyConfig = EntropyConfig(), label: str = "",
                frame_times=None) -> EntropyCurve:
    """Normalize globally, then take per-frame entropy."""
    return frame_entropy(global_minmax_normalize(feat), cfg, frame_times, label)


def random_noise_map(t: int, d: int, seed: int) -> FeatureMap:
    if t < 1 or d < 1:
        raise ValueError("T and D must be >= 1")
    rng = np.random.default_rng(seed)
    return FeatureMap(rng.random((t, d)), MAGNITUDE, "synthetic")


def entropy_report(curves: list[EntropyCurve]) -> str:
    """CSV: one row per frame (time + one column per curve), then nothing else.

    Means are available via :func:`entropy_means`.
    """
    if not curves:
        raise ValueError("no curves given")
    t = len(curves[0].values)
    if any(len(c.values) != t for c in curves):
        raise ValueError("entropy curves differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s"] + [c.source_label for c in curves])
    for i in range(t):
        w.writerow([f"{curves[0].frame_times[i]:.6f}"] + [f"{c.values[i]:.6f}" for c in curves])
    return buf.getvalue()


def entropy_means(curves: list[EntropyCurve]) -> dict[str, float]:
    return {c.source_label: c.mean for c in curves}


def voiced_mask(wave_samples: np.ndarray, frame_times: np.ndarray, sr: int = 16000,
                win: int = 1024, threshold_db: float = -30.0) -> np.ndarray:
    """Energy-threshold voice activity per frame, relative to the loudest frame."""
    centres = np.round(np.asarray(frame_times) * sr).astype(int)
    half = win // 2
    energy = np.array([
        np.mean(wave_samples[max(0, c - half):c + half] ** 2) for c in centres
    ])
    level = 10 * np.log10(np.maximum(energy, 1e-20))
    return level >= level.max() + threshold_db


@dataclass
class UtteranceAnalysis:
    curves: list[EntropyCurve]  # magnitude, phase, noise
    voiced: np.ndarray
    phase_map: FeatureMap

    def means(self) -> dict[str, float]:
        out = entropy_means(self.curves)
        mag = self.curves[0]
        out[f"{mag.source_label}_voiced"] = float(np.mean(mag.values[self.voiced]))
        return out


def analyze_utterance(wave: Waveform, feature: str = "cqt", cfg: EntropyConfig = EntropyConfig(),
                      noise_seed: int = 0) -> UtteranceAnalysis:
    """Entropy curves of an utterance's magnitude and phase maps and of a
    same-sized uniform noise map, plus an energy-based voiced-frame mask."""
    if feature in ("cqt", "lps"):
        spec = dsp.cqt(wave) if feature == "cqt" else dsp.stft(wave)
        mag, ph, times = dsp.log_power(spec), dsp.phase(spec), spec.frame_times
    elif feature == "lfcc":
        lc = dsp.LfccConfig()
        spec = dsp.stft(wave, hop_length=lc.hop_length)
        mag, ph = dsp.lfcc(wave, lc), dsp.phase(spec)
        t = min(mag.T, ph.T)
        mag = FeatureMap(mag.values[:t], mag.channel_kind, mag.source)
        ph = FeatureMap(ph.values[:t], ph.channel_kind, ph.source)
        times = spec.frame_times[:t]
    else:
        raise ValueError(f"unknown feature {feature!r}")
    curves = [
        map_entropy(mag, cfg, f"{feature}_magnitude", times),
        map_entropy(ph, cfg, f"{feature}_phase", times),
        map_entropy(random_noise_map(mag.T, ph.D, noise_seed), cfg, "noise", times),
    ]
    return UtteranceAnalysis(curves, voiced_mask(wave.samples, times, wave.sample_rate), ph)
