"""Audio and protocol I/O, manifests, and the synthetic audio corpus."""
from __future__ import annotations

import json
import struct
import wave
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

SAMPLE_RATE = 16000

BONAFIDE = "bonafide"
SPOOF = "spoof"
KNOWN_KIND = "known_kind"
UNKNOWN_KIND = "unknown_kind"

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavError(ValueError):
    pass


class ProtocolError(ValueError):
    pass


class ManifestError(ValueError):
    pass


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("waveform must be a non-empty 1-D sample array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def require_16k(wave_: Waveform) -> None:
    if wave_.sample_rate != SAMPLE_RATE:
        raise WavError(
            f"unsupported sample rate {wave_.sample_rate} Hz; "
            f"resample externally to {SAMPLE_RATE} Hz"
        )


def _read_chunks(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError("malformed header: not a RIFF/WAVE file")
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        yield cid, data[pos + 8:pos + 8 + size]
        pos += 8 + size + (size & 1)


def load_wav(path) -> Waveform:
    """Read a PCM16 or float32 WAV file, downmixing to mono by channel mean."""
    path = Path(path)
    data = path.read_bytes()
    fmt = payload = None
    for cid, body in _read_chunks(data):
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            payload = body
    if fmt is None or payload is None or len(fmt) < 16:
        raise WavError("malformed header: missing fmt or data chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        (tag,) = struct.unpack_from("<H", fmt, 24)
    if channels < 1 or block_align != channels * bits // 8:
        raise WavError("malformed header: inconsistent block alignment")
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        x = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2") / 32768.0
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        x = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        raise WavError(f"unsupported codec (format tag {tag}, {bits} bits)")
    n = x.size // channels
    if n == 0:
        raise WavError("no audio samples in data chunk")
    x = x[: n * channels].reshape(n, channels).mean(axis=1)
    wave_ = Waveform(np.clip(x, -1.0, 1.0), rate, path.stem)
    require_16k(wave_)
    return wave_


def save_wav(path, samples, sample_rate: int = SAMPLE_RATE) -> None:
    """Write mono PCM16."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


# --- protocols ---------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    utterance_id: str
    speaker_id: str
    attack_id: str
    label: str
    subset: str = "LA"

    def __post_init__(self):
        if self.label not in (BONAFIDE, SPOOF):
            raise ProtocolError(f"label must be bonafide or spoof, got {self.label!r}")
        if (self.label == BONAFIDE) != (self.attack_id == "-"):
            raise ProtocolError(
                f"{self.utterance_id}: bonafide trials need attack_id '-' and spoofs a real id"
            )
        if self.subset not in ("LA", "PA"):
            raise ProtocolError(f"subset must be LA or PA, got {self.subset!r}")

    @property
    def is_bonafide(self) -> bool:
        return self.label == BONAFIDE


def _subset_of(speaker_id: str, utt_id: str) -> str:
    for token in (utt_id, speaker_id):
        if token.startswith("PA_"):
            return "PA"
    return "LA"


def parse_protocol(text: str, subset: str | None = None) -> list[TrialRecord]:
    """Parse ASVspoof CM protocol lines: ``SPEAKER UTT_ID - ATTACK_ID KEY``.

    The subset is taken from the ``PA_``/``LA_`` prefix unless given.
    """
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 5:
            raise ProtocolError(f"line {lineno}: expected >= 5 fields, got {len(fields)}")
        speaker, utt, attack, key = fields[0], fields[1], fields[3], fields[4]
        if key not in (BONAFIDE, SPOOF):
            raise ProtocolError(f"line {lineno}: unknown key {key!r}")
        records.append(TrialRecord(utt, speaker, attack, key, subset or _subset_of(speaker, utt)))
    return records


def serialize_protocol(records: Iterable[TrialRecord]) -> str:
    return "".join(
        f"{r.speaker_id} {r.utterance_id} - {r.attack_id} {r.label}\n" for r in records
    )


# --- manifests ---------------------------------------------------------------

@dataclass
class Manifest:
    """Trial records plus per-utterance file locations relative to ``audio_root``.

    ``paths`` maps utterance id to either an audio path (str) or a dict of
    feature-cache paths keyed by channel kind.
    """

    records: list[TrialRecord]
    audio_root: Path = Path(".")
    scenario: str = KNOWN_KIND
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        self.audio_root = Path(self.audio_root)
        ids = [r.utterance_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ManifestError("duplicate utterance ids in manifest")
        if self.scenario not in (KNOWN_KIND, UNKNOWN_KIND):
            raise ManifestError(f"unknown scenario {self.scenario!r}")
        subsets = {r.subset for r in self.records}
        if self.scenario == KNOWN_KIND and len(subsets) > 1:
            raise ManifestError("known_kind manifest must contain a single subset")

    def __len__(self):
        return len(self.records)

    def path_of(self, utt_id: str):
        entry = self.paths.get(utt_id, f"{utt_id}.wav")
        if isinstance(entry, dict):
            return {k: self.audio_root / v for k, v in entry.items()}
        return self.audio_root / entry

    def to_json(self) -> str:
        entries = {}
        for r in self.records:
            d = asdict(r)
            d.pop("utterance_id")
            d["path"] = self.paths.get(r.utterance_id, f"{r.utterance_id}.wav")
            entries[r.utterance_id] = d
        doc = {"scenario": self.scenario, "audio_root": str(self.audio_root), "entries": entries}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str, base_dir=None) -> "Manifest":
        doc = json.loads(text)
        root = Path(doc.get("audio_root", "."))
        if base_dir is not None and not root.is_absolute():
            root = Path(base_dir) / root
        records, paths = [], {}
        for utt, d in doc["entries"].items():
            paths[utt] = d.get("path", f"{utt}.wav")
            records.append(
                TrialRecord(utt, d["speaker_id"], d["attack_id"], d["label"], d.get("subset", "LA"))
            )
        return cls(records, root, doc.get("scenario", KNOWN_KIND), paths)

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        return cls.from_json(path.read_text(), base_dir=path.parent)


def merge_manifests(*manifests: Manifest) -> Manifest:
    """Unknown-kind training set: concatenation of per-subset manifests.

    Paths are made absolute so the merged manifest does not depend on a
    shared root.
    """
    records, paths = [], {}
    for m in manifests:
        for r in m.records:
            records.append(r)
            p = m.path_of(r.utterance_id)
            paths[r.utterance_id] = (
                {k: str(Path(v).resolve()) for k, v in p.items()} if isinstance(p, dict)
                else str(Path(p).resolve())
            )
    return Manifest(records, Path("/"), UNKNOWN_KIND, paths)


# --- synthetic audio corpus --------------------------------------------------

MAGNITUDE_PERTURBED = "magnitude_perturbed"
PHASE_RANDOMIZED = "phase_randomized"


@dataclass
class SynthSpec:
    n_bonafide: int
    n_spoof: int
    spoof_mode: str = MAGNITUDE_PERTURBED
    duration_s: float = 2.0  # CQT needs > ~1.08 s
    seed: int = 0

    def __post_init__(self):
        if self.n_bonafide < 1 or self.n_spoof < 1:
            raise ValueError("n_bonafide and n_spoof must be >= 1")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.spoof_mode not in (MAGNITUDE_PERTURBED, PHASE_RANDOMIZED):
            raise ValueError(f"unknown spoof_mode {self.spoof_mode!r}")


def _harmonic_params(rng: np.random.Generator):
    f0 = rng.uniform(100.0, 300.0)
    n_harm = int(rng.integers(3, 7))
    amps = rng.uniform(0.2, 1.0, n_harm)
    phases = rng.uniform(-np.pi, np.pi, n_harm)
    return f0, amps, phases


def _add_noise(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    p_signal = np.mean(x ** 2)
    noise = rng.standard_normal(x.size) * np.sqrt(p_signal / 10 ** (snr_db / 10))
    return x + noise


def harmonic_signal(f0, amps, phases, n, sr=SAMPLE_RATE) -> np.ndarray:
    t = np.arange(n) / sr
    k = np.arange(1, len(amps) + 1)[:, None]
    return np.sum(np.asarray(amps)[:, None] * np.cos(2 * np.pi * f0 * k * t + np.asarray(phases)[:, None]), axis=0)


def _phase_scrambled(f0, amps, n, rng, frame=1024, hop=512, sr=SAMPLE_RATE) -> np.ndarray:
    # overlap-add of Hann-windowed frames, each with fresh harmonic phases
    win = np.hanning(frame + 1)[:-1]
    out = np.zeros(n + frame)
    t = np.arange(frame) / sr
    k = np.arange(1, len(amps) + 1)[:, None]
    for start in range(0, n, hop):
        ph = rng.uniform(-np.pi, np.pi, len(amps))[:, None]
        seg = np.sum(amps[:, None] * np.cos(2 * np.pi * f0 * k * t + ph), axis=0)
        out[start:start + frame] += win * seg
    return out[:n]


def synth_utterance(rng: np.random.Generator, n: int, kind: str, snr_db: float = 30.0) -> np.ndarray:
    f0, amps, phases = _harmonic_params(rng)
    if kind == MAGNITUDE_PERTURBED:
        tilt = rng.uniform(-1.5, 1.5)
        amps = amps * np.arange(1, len(amps) + 1) ** tilt
        x = harmonic_signal(f0, amps, phases, n)
    elif kind == PHASE_RANDOMIZED:
        x = _phase_scrambled(f0, amps, n, rng)
    else:
        x = harmonic_signal(f0, amps, phases, n)
    x = _add_noise(x, snr_db, rng)
    return 0.5 * x / max(np.max(np.abs(x)), 1e-12)


def harmonic_test_utterance(duration_s: float = 3.0, f0: float = 150.0, n_harmonics: int = 5,
                            snr_db: float = 30.0, seed: int = 0) -> Waveform:
    """Equal-amplitude harmonic tone in white noise, peak-normalised to 0.5."""
    n = int(round(duration_s * SAMPLE_RATE))
    x = harmonic_signal(f0, np.ones(n_harmonics), np.zeros(n_harmonics), n)
    x = _add_noise(x, snr_db, np.random.default_rng(seed))
    return Waveform(0.5 * x / np.max(np.abs(x)), SAMPLE_RATE, "harmonic")


def synth_corpus(spec: SynthSpec, out_dir) -> Manifest:
    """Generate a labelled corpus of harmonic utterances under ``out_dir``.

    Writes one PCM16 WAV per utterance, ``manifest.json`` and ``protocol.txt``.
    Output is a pure function of ``spec``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * SAMPLE_RATE))
    attack = "S01" if spec.spoof_mode == MAGNITUDE_PERTURBED else "S02"
    records, paths = [], {}
    kinds = [BONAFIDE] * spec.n_bonafide + [SPOOF] * spec.n_spoof
    for i, label in enumerate(kinds):
        utt = f"SYN_{i:05d}"
        x = synth_utterance(rng, n, "bonafide" if label == BONAFIDE else spec.spoof_mode)
        save_wav(out_dir / f"{utt}.wav", x)
        records.append(TrialRecord(utt, f"SPK_{i % 10:02d}", "-" if label == BONAFIDE else attack, label, "LA"))
        paths[utt] = f"{utt}.wav"
    manifest = Manifest(records, Path("."), KNOWN_KIND, paths)
    manifest.save(out_dir / "manifest.json")
    (out_dir / "protocol.txt").write_text(serialize_protocol(records))
    manifest.audio_root = out_dir
    return manifest
