"""Spectral front end: STFT, constant-Q transform, log power, phase, LFCC.

All frames lie fully inside the signal (no centre padding).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

from .dataset_io import SAMPLE_RATE, Waveform, require_16k

MAGNITUDE = "magnitude"
PHASE = "phase"
CEPSTRAL = "cepstral"
PROCESSED_PHASE = "processed_phase"
CHANNEL_KINDS = (MAGNITUDE, PHASE, CEPSTRAL, PROCESSED_PHASE)
SOURCES = ("dft", "cqt", "lfcc", "synthetic")


@dataclass(frozen=True)
class StftConfig:
    window_ms: float = 64.0
    hop_ms: float = 32.0
    n_fft: int = 1024
    window: str = "hann"

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * SAMPLE_RATE / 1000))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * SAMPLE_RATE / 1000))

    def __post_init__(self):
        if self.n_fft < self.win_length:
            raise ValueError("n_fft must be >= window length")
        if self.hop_length <= 0:
            raise ValueError("hop must be positive")


@dataclass(frozen=True)
class CqtConfig:
    hop_ms: float = 16.0
    n_octaves: int = 9
    bins_per_octave: int = 12
    f_min: float = SAMPLE_RATE / 2 / 2 ** 9
    window: str = "hann"

    def __post_init__(self):
        if self.n_octaves * self.bins_per_octave != 108:
            raise ValueError("n_octaves * bins_per_octave must be 108")
        if self.f_min * 2 ** self.n_octaves > SAMPLE_RATE / 2 + 1e-6:
            raise ValueError("top CQT octave exceeds Nyquist")

    @property
    def n_bins(self) -> int:
        return self.n_octaves * self.bins_per_octave

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * SAMPLE_RATE / 1000))

    @property
    def q(self) -> float:
        return 1.0 / (2 ** (1.0 / self.bins_per_octave) - 1.0)

    def center_frequencies(self) -> np.ndarray:
        return self.f_min * 2.0 ** (np.arange(self.n_bins) / self.bins_per_octave)

    def kernel_lengths(self) -> np.ndarray:
        return np.ceil(self.q * SAMPLE_RATE / self.center_frequencies()).astype(int)


@dataclass(frozen=True)
class LfccConfig:
    window_ms: float = 20.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_filters: int = 20
    n_ceps: int = 20
    delta_width: int = 5
    window: str = "hann"
    log_floor: float = 1e-10

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * SAMPLE_RATE / 1000))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * SAMPLE_RATE / 1000))

    @property
    def dim(self) -> int:
        return 3 * self.n_ceps


@dataclass
class ComplexSpectrogram:
    values: np.ndarray  # T x D complex
    frame_times: np.ndarray
    kind: str


@dataclass
class FeatureMap:
    values: np.ndarray  # T x D real
    channel_kind: str
    source: str

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("feature map must be 2-D (T x D)")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature map contains non-finite values")
        if self.channel_kind == PHASE and self.values.size:
            # pi rounded to the array's own precision
            lim = float(self.values.dtype.type(np.pi))
            if self.values.min() <= -lim or self.values.max() > lim:
                raise ValueError("phase values must lie in (-pi, pi]")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def D(self) -> int:
        return self.values.shape[1]


def _frames(x: np.ndarray, length: int, hop: int) -> np.ndarray:
    if x.size < length:
        raise ValueError(f"utterance shorter than one window ({x.size} < {length} samples)")
    return np.lib.stride_tricks.sliding_window_view(x, length)[::hop]


def frame_count(n: int, length: int, hop: int) -> int:
    return (n - length) // hop + 1


def stft(wave: Waveform, cfg: StftConfig = StftConfig(), hop_length: int | None = None) -> ComplexSpectrogram:
    """Short-time DFT; frame t covers samples [t*hop, t*hop + win)."""
    require_16k(wave)
    win, hop = cfg.win_length, hop_length or cfg.hop_length
    frames = _frames(wave.samples, win, hop)
    w = get_window(cfg.window, win)
    spec = np.fft.rfft(frames * w, n=cfg.n_fft, axis=1)
    times = (np.arange(len(frames)) * hop + win / 2) / SAMPLE_RATE
    return ComplexSpectrogram(spec, times, "dft")


@lru_cache(maxsize=8)
def cqt_kernels(cfg: CqtConfig) -> tuple[np.ndarray, ...]:
    """Per-bin complex kernels scaled to unit energy (flat white-noise floor).

    Phase is referenced to the kernel centre, so a cosine centred on a frame
    reads phase 0 in its own bin.
    """
    kernels = []
    for f, n in zip(cfg.center_frequencies(), cfg.kernel_lengths()):
        w = get_window(cfg.window, int(n), fftbins=False)
        t = (np.arange(n) - (n - 1) / 2) / SAMPLE_RATE
        k = w * np.exp(-2j * np.pi * f * t) / np.sqrt(np.sum(w ** 2))
        k.flags.writeable = False
        kernels.append(k)
    return tuple(kernels)


def cqt(wave: Waveform, cfg: CqtConfig = CqtConfig()) -> ComplexSpectrogram:
    """Constant-Q transform by direct windowed correlation on the hop grid.

    All bins of frame t share the centre ``L_max/2 + t*hop`` where
    ``L_max`` is the longest (lowest-frequency) kernel.
    """
    require_16k(wave)
    x = wave.samples
    lengths = cfg.kernel_lengths()
    l_max, hop = int(lengths.max()), cfg.hop_length
    if x.size < l_max:
        raise ValueError(
            f"utterance shorter than lowest-frequency CQT kernel ({x.size} < {l_max} samples)"
        )
    n_frames = frame_count(x.size, l_max, hop)
    centre0 = (l_max - 1) / 2
    out = np.empty((n_frames, cfg.n_bins), dtype=np.complex128)
    for k, kern in enumerate(cqt_kernels(cfg)):
        n = kern.size
        start = int(round(centre0 - (n - 1) / 2))
        seg = x[start:start + (n_frames - 1) * hop + n]
        out[:, k] = _frames(seg, n, hop) @ kern
    times = (np.arange(n_frames) * hop + centre0) / SAMPLE_RATE
    return ComplexSpectrogram(out, times, "cqt")


def log_power(spec: ComplexSpectrogram, floor_db: float = -100.0) -> FeatureMap:
    p_floor = 10.0 ** (floor_db / 10.0)
    power = np.maximum(np.abs(spec.values) ** 2, p_floor)
    return FeatureMap(10.0 * np.log10(power), MAGNITUDE, spec.kind)


def wrap_phase(values: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    out = np.angle(np.exp(1j * values))
    out[out <= -np.pi] = np.pi
    return out


def phase(spec: ComplexSpectrogram) -> FeatureMap:
    """Wrapped phase in (-pi, pi]; exact zeros map to 0. No unwrapping."""
    z = spec.values
    ph = np.arctan2(z.imag, z.real)
    ph[ph <= -np.pi] = np.pi
    ph[z == 0] = 0.0
    return FeatureMap(ph, PHASE, spec.kind)


def linear_filterbank(n_filters: int, n_fft: int, sr: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular filters with centres linearly spaced over 0..sr/2."""
    edges = np.linspace(0.0, sr / 2, n_filters + 2)
    freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    fb = np.zeros((n_filters, freqs.size))
    for m in range(n_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def delta(feat: FeatureMap | np.ndarray, width: int = 5):
    """Regression deltas over time with replicated edges."""
    values = feat.values if isinstance(feat, FeatureMap) else np.asarray(feat)
    if width < 3 or width % 2 == 0:
        raise ValueError("delta width must be odd and >= 3")
    m_half = (width - 1) // 2
    padded = np.pad(values, ((m_half, m_half), (0, 0)), mode="edge")
    t = values.shape[0]
    num = np.zeros_like(values, dtype=np.float64)
    for m in range(1, m_half + 1):
        num += m * (padded[m_half + m:m_half + m + t] - padded[m_half - m:m_half - m + t])
    out = num / (2 * sum(m * m for m in range(1, m_half + 1)))
    if isinstance(feat, FeatureMap):
        return FeatureMap(out, feat.channel_kind, feat.source)
    return out


def lfcc(wave: Waveform, cfg: LfccConfig = LfccConfig()) -> FeatureMap:
    """Static LFCCs with delta and delta-delta appended: T x 3*n_ceps."""
    require_16k(wave)
    frames = _frames(wave.samples, cfg.win_length, cfg.hop_length)
    w = get_window(cfg.window, cfg.win_length)
    power = np.abs(np.fft.rfft(frames * w, n=cfg.n_fft, axis=1)) ** 2
    energies = power @ linear_filterbank(cfg.n_filters, cfg.n_fft).T
    log_e = np.log(np.maximum(energies, cfg.log_floor))
    ceps = dct(log_e, type=2, norm="ortho", axis=1)[:, : cfg.n_ceps]
    d1 = delta(ceps, cfg.delta_width)
    d2 = delta(d1, cfg.delta_width)
    return FeatureMap(np.hstack([ceps, d1, d2]), CEPSTRAL, "lfcc")


# --- pairings ----------------------------------------------------------------

PAIRINGS = ("lps", "cqt", "lfcc")


def extract_pair(wave: Waveform, pairing: str, with_phase: bool = True):
    """Magnitude map and its paired phase map for one of the three pairings.

    LFCC is paired with DFT phase computed on the LFCC hop so frames align;
    both maps are trimmed to the shorter frame count.
    """
    if pairing == "lps":
        spec = stft(wave)
        return log_power(spec), phase(spec) if with_phase else None
    if pairing == "cqt":
        spec = cqt(wave)
        return log_power(spec), phase(spec) if with_phase else None
    if pairing == "lfcc":
        cfg = LfccConfig()
        mag = lfcc(wave, cfg)
        if not with_phase:
            return mag, None
        ph = phase(stft(wave, hop_length=cfg.hop_length))
        t = min(mag.T, ph.T)
        return (FeatureMap(mag.values[:t], mag.channel_kind, mag.source),
                FeatureMap(ph.values[:t], ph.channel_kind, ph.source))
    raise ValueError(f"unknown pairing {pairing!r}")


# --- feature cache -----------------------------------------------------------
# Layout (little endian):
#   magic  b"PFFC"      4 bytes
#   version            uint16 (=1)
#   header_len         uint32
#   header             UTF-8 JSON: utterance_id, source, channel_kind, T, D, dtype
#   payload            T*D float32, row-major

_CACHE_MAGIC = b"PFFC"
_CACHE_VERSION = 1


def write_feature_cache(path, feat: FeatureMap, utterance_id: str) -> None:
    header = json.dumps({
        "utterance_id": utterance_id, "source": feat.source, "channel_kind": feat.channel_kind,
        "T": feat.T, "D": feat.D, "dtype": "float32",
    }, sort_keys=True).encode()
    payload = np.ascontiguousarray(feat.values, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(_CACHE_MAGIC + struct.pack("<HI", _CACHE_VERSION, len(header)) + header + payload)


def read_feature_cache(path) -> tuple[str, FeatureMap]:
    data = Path(path).read_bytes()
    if data[:4] != _CACHE_MAGIC:
        raise ValueError(f"{path}: not a feature cache file")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != _CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    header = json.loads(data[10:10 + hlen])
    values = np.frombuffer(data, dtype="<f4", offset=10 + hlen).reshape(header["T"], header["D"])
    values = values.astype(np.float32)
    if header["channel_kind"] == PHASE:
        values = np.where(values <= -np.pi, np.float32(np.pi), values)
    return header["utterance_id"], FeatureMap(values, header["channel_kind"], header["source"])
