"""Training with best-dev-epoch selection, utterance-level scoring and the
framework x pairing experiment matrix."""
from __future__ import annotations

import contextlib
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .dataset_io import KNOWN_KIND, Manifest, load_wav, require_16k
from .entropy import map_entropy
from .featmap import (SEGMENT_HOP, SEGMENT_LEN, FeatureCorpusSpec, LabeledFeatures,
                      aggregate_scores, segment_starts, synth_feature_corpus)
from .metrics import compute_eer, compute_min_tdcf
from .models import (A_MAGNITUDE_ONLY, BackendConfig, Framework, backend_preset,
                     build_framework, framework_from_config, framework_kind)
from .nn import AdamState, adam_step, log_softmax, softmax_xent
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .scorefile import BONAFIDE, SPOOF, ScoreFile

log = logging.getLogger(__name__)


class TrainError(RuntimeError):
    pass


class FeatureCacheMiss(TrainError):
    pass


class ConfigMismatch(ValueError):
    pass


@dataclass
class TrainConfig:
    framework: str = "c"
    pairing: str = "cqt"
    scenario: str = KNOWN_KIND
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 1e-5
    seeds: list = field(default_factory=lambda: [1, 2, 3])
    backend: str = "lite"
    eval_batch_size: int = 64

    def __post_init__(self):
        framework_kind(self.framework)
        if self.pairing not in dsp.PAIRINGS:
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ValueError("batch sizes must be positive")
        if not self.seeds:
            raise ValueError("need at least one seed")
        self.seeds = [int(s) for s in self.seeds]


@dataclass
class Utterance:
    """One utterance's feature maps; label 1 = bonafide, 0 = spoof."""
    utterance_id: str
    attack_id: str
    label: int
    magnitude: np.ndarray
    phase: np.ndarray | None = None


# --- feature sources -----------------------------------------------------------

def utterances_from_corpus(items: list[LabeledFeatures]) -> list[Utterance]:
    return [Utterance(it.utterance_id, it.attack_id, it.label,
                      it.magnitude.values.astype(np.float32),
                      it.phase.values.astype(np.float32)) for it in items]


def _from_cache(paths: dict, utt: str, with_phase: bool):
    mag_key = next((k for k in (dsp.MAGNITUDE, dsp.CEPSTRAL) if k in paths), None)
    if mag_key is None:
        raise FeatureCacheMiss(f"{utt}: no magnitude entry in feature cache")
    keys = [mag_key] + ([dsp.PHASE] if with_phase else [])
    maps = []
    for k in keys:
        if k not in paths:
            raise FeatureCacheMiss(f"{utt}: no {k} entry in feature cache")
        if not Path(paths[k]).exists():
            raise FeatureCacheMiss(f"{utt}: cache file {paths[k]} missing")
        maps.append(dsp.read_feature_cache(paths[k])[1].values)
    return maps[0], maps[1] if with_phase else None


def utterances_from_manifest(manifest: Manifest, pairing: str, with_phase: bool = True) -> list[Utterance]:
    """Load cached features when the manifest points at caches, else extract from audio."""
    if len(manifest) == 0:
        raise TrainError("empty manifest")
    out = []
    for rec in manifest.records:
        src = manifest.path_of(rec.utterance_id)
        if isinstance(src, dict):
            mag, ph = _from_cache(src, rec.utterance_id, with_phase)
        else:
            if not Path(src).exists():
                raise TrainError(f"{rec.utterance_id}: audio file {src} missing")
            wave = load_wav(src)
            require_16k(wave)
            m, p = dsp.extract_pair(wave, pairing, with_phase)
            mag, ph = m.values, (p.values if p is not None else None)
        out.append(Utterance(rec.utterance_id, rec.attack_id, int(rec.is_bonafide),
                             mag.astype(np.float32), None if ph is None else ph.astype(np.float32)))
    return out


def controlled_splits(n_train: int = 2000, n_dev: int = 400, n_eval: int = 400, D: int = 8,
                      seed: int = 0, **spec_kw) -> tuple[list[Utterance], ...]:
    """Balanced train/dev/eval splits of the feature-domain controlled corpus.

    Each split is drawn from its own seed (seed, seed + 1, seed + 2).
    """
    out = []
    for k, (n, prefix) in enumerate(((n_train, "TR"), (n_dev, "DV"), (n_eval, "EV"))):
        if n < 2 or n % 2:
            raise ValueError("split sizes must be even and >= 2")
        spec = FeatureCorpusSpec(n_per_class=n // 2, D=D, seed=seed + k, **spec_kw)
        out.append(utterances_from_corpus(synth_feature_corpus(spec, prefix)))
    return tuple(out)


# --- segmentation ----------------------------------------------------------------

def utterance_segments(u: Utterance) -> list[tuple[np.ndarray, np.ndarray | None]]:
    """Extend cyclically to a multiple of the segment length and cut 400/200 segments."""
    t = u.magnitude.shape[0]
    if u.phase is not None and u.phase.shape[0] != t:
        raise ValueError(f"{u.utterance_id}: magnitude and phase frame counts differ")
    target = SEGMENT_LEN * -(-t // SEGMENT_LEN)
    idx = np.arange(target) % t
    mag = u.magnitude[idx]
    ph = u.phase[idx] if u.phase is not None else None
    return [(mag[s:s + SEGMENT_LEN], None if ph is None else ph[s:s + SEGMENT_LEN])
            for s in segment_starts(target, SEGMENT_LEN, SEGMENT_HOP)]


def _batch(segs, with_phase: bool):
    mag = np.stack([m for m, _ in segs])[:, None].astype(np.float32, copy=False)
    ph = np.stack([p for _, p in segs])[:, None].astype(np.float32, copy=False) if with_phase else None
    return mag, ph


# --- evaluation ----------------------------------------------------------------------

def segment_scores(model: Framework, utts: list[Utterance], batch_size: int = 64) -> list[np.ndarray]:
    """Bonafide log-probability of every segment, grouped per utterance."""
    model.eval()
    with_phase = model.uses_phase
    flat, owner = [], []
    for i, u in enumerate(utts):
        if with_phase and u.phase is None:
            raise TrainError(f"{u.utterance_id}: framework needs phase features")
        segs = utterance_segments(u)
        flat += segs
        owner += [i] * len(segs)
    scores = np.empty(len(flat))
    for s in range(0, len(flat), batch_size):
        mag, ph = _batch(flat[s:s + batch_size], with_phase)
        scores[s:s + len(mag)] = log_softmax(model.forward(mag, ph).astype(np.float64))[:, 1]
    owner = np.asarray(owner)
    return [scores[owner == i] for i in range(len(utts))]


def score_utterances(model: Framework, utts: list[Utterance], batch_size: int = 64) -> ScoreFile:
    sf = ScoreFile()
    for u, s in zip(utts, segment_scores(model, utts, batch_size)):
        sf.append(u.utterance_id, u.attack_id, BONAFIDE if u.label == 1 else SPOOF, aggregate_scores(s))
    return sf


def phase_entropy_comparison(model: Framework, utts: list[Utterance], batch_size: int = 64):
    """Mean per-frame entropy of raw phase segments and of the phase network's
    output for the same segments, as (raw, processed)."""
    if model.phase_net is None:
        raise ValueError("model has no phase network")
    model.eval()
    segs = [s for u in utts for s in utterance_segments(u)]
    raw, proc = [], []
    for s in range(0, len(segs), batch_size):
        _, ph = _batch(segs[s:s + batch_size], True)
        out = model.phase_net.forward(ph)
        for p, o in zip(ph[:, 0], out[:, 0]):
            raw.append(map_entropy(dsp.FeatureMap(p.astype(np.float64), dsp.PHASE, "synthetic")).mean)
            proc.append(map_entropy(dsp.FeatureMap(o.astype(np.float64), dsp.PROCESSED_PHASE, "synthetic")).mean)
    return float(np.mean(raw)), float(np.mean(proc))


# --- checkpoints ---------------------------------------------------------------------

@dataclass
class Checkpoint:
    state: dict
    model_config: dict
    train_config: dict
    seed: int
    best_dev_eer: float
    epoch_of_best: int
    dev_eer_history: list = field(default_factory=list)
    adam: AdamState | None = None

    def build_model(self, dtype=np.float32) -> Framework:
        model = framework_from_config(self.model_config, seed=self.seed, dtype=dtype)
        model.load_state_dict(self.state)
        return model.eval()

    def save(self, path) -> None:
        tensors = dict(self.state)
        adam_meta = {}
        if self.adam is not None and self.adam.m:
            names = [n for n, _ in self.build_model().named_parameters()]
            for n, m, v in zip(names, self.adam.m, self.adam.v):
                tensors[f"adam.m/{n}"] = m
                tensors[f"adam.v/{n}"] = v
            adam_meta = {k: getattr(self.adam, k) for k in
                         ("lr", "beta1", "beta2", "eps", "weight_decay", "step")}
        meta = {"seed": self.seed, "best_dev_eer": self.best_dev_eer,
                "epoch_of_best": self.epoch_of_best, "dev_eer_history": self.dev_eer_history,
                "train_config": self.train_config}
        save_checkpoint(path, tensors, self.model_config, meta, adam_meta)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        tensors, config, meta, adam_meta = load_checkpoint(path)
        state = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
        adam = None
        if adam_meta:
            names = [n for n in tensors if n.startswith("adam.m/")]
            adam = AdamState(**adam_meta,
                             m=[tensors[n] for n in names],
                             v=[tensors["adam.v/" + n[len("adam.m/"):]] for n in names])
        return cls(state, config, meta["train_config"], meta["seed"], meta["best_dev_eer"],
                   meta["epoch_of_best"], meta["dev_eer_history"], adam)


def check_compatible(ckpt: Checkpoint, framework: str | None = None, pairing: str | None = None) -> None:
    cfg = ckpt.model_config
    if framework is not None and framework_kind(framework) != cfg["kind"]:
        raise ConfigMismatch(f"checkpoint framework {cfg['kind']} != requested {framework_kind(framework)}")
    if pairing is not None and pairing != cfg["pairing"]:
        raise ConfigMismatch(f"checkpoint pairing {cfg['pairing']} != requested {pairing}")


def evaluate(ckpt: Checkpoint, utts: list[Utterance], pairing: str | None = None,
             batch_size: int = 64) -> ScoreFile:
    """Score utterances with a checkpoint: mean segment bonafide log-probability."""
    check_compatible(ckpt, pairing=pairing)
    if not utts:
        raise TrainError("nothing to evaluate")
    return score_utterances(ckpt.build_model(), utts, batch_size)


# --- training ---------------------------------------------------------------------------

def _dims(utts: list[Utterance], uses_phase: bool) -> tuple[int, int | None]:
    d = {u.magnitude.shape[1] for u in utts}
    p = {u.phase.shape[1] for u in utts if u.phase is not None}
    if len(d) != 1 or (uses_phase and len(p) != 1):
        raise TrainError("feature dimensions differ across utterances")
    return d.pop(), (p.pop() if p else None)


def build_model(cfg: TrainConfig, utts: list[Utterance], seed: int) -> Framework:
    uses_phase = framework_kind(cfg.framework) != A_MAGNITUDE_ONLY
    mag_dim, phase_dim = _dims(utts, uses_phase)
    backend = cfg.backend if isinstance(cfg.backend, BackendConfig) else backend_preset(cfg.backend)
    return build_framework(cfg.framework, cfg.pairing, backend, seed=seed,
                           mag_dim=mag_dim, phase_dim=phase_dim)


def train(train_utts: list[Utterance], dev_utts: list[Utterance], cfg: TrainConfig,
          seed: int | None = None, progress=None) -> Checkpoint:
    """Adam on shuffled segments; keep the parameters of the lowest dev-EER epoch.

    A later epoch replaces the kept one only if its dev EER is strictly lower.
    ``progress(epoch, loss, dev_eer)`` is called after every epoch when given.
    """
    if not train_utts or not dev_utts:
        raise TrainError("empty training or development set")
    seed = cfg.seeds[0] if seed is None else int(seed)
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    model = build_model(cfg, train_utts, int(init_seq.generate_state(1)[0]))
    params = model.parameters()
    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(shuffle_seq)

    segs, labels = [], []
    for u in train_utts:
        for s in utterance_segments(u):
            segs.append(s)
            labels.append(u.label)
    labels = np.asarray(labels)
    with_phase = model.uses_phase

    best = None
    history = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = rng.permutation(len(segs))
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            mag, ph = _batch([segs[i] for i in idx], with_phase)
            model.zero_grad()
            loss, grad = softmax_xent(model.forward(mag, ph), labels[idx])
            model.backward(grad)
            adam_step(params, opt)
            losses.append(loss)
        dev_eer = compute_eer(score_utterances(model, dev_utts, cfg.eval_batch_size)).eer
        history.append(dev_eer)
        if progress is not None:
            progress(epoch, float(np.mean(losses)), dev_eer)
        log.info("seed %d epoch %d loss %.4f dev EER %.4f", seed, epoch, np.mean(losses), dev_eer)
        if best is None or dev_eer < best[0]:
            best = (dev_eer, epoch, model.state_dict(),
                    AdamState(opt.lr, opt.beta1, opt.beta2, opt.eps, opt.weight_decay, opt.step,
                              [m.copy() for m in opt.m], [v.copy() for v in opt.v]))
    dev_eer, epoch, state, adam = best
    return Checkpoint(state, model.config(), asdict(cfg), seed, dev_eer, epoch, history, adam)


@contextlib.contextmanager
def deterministic_mode(enabled: bool = True):
    """Single-threaded BLAS so repeated runs are bit-identical."""
    if not enabled:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=1):
        yield


# --- experiment matrix ----------------------------------------------------------------

def avg_best(values) -> str:
    """'avg(best)' with lower-is-better best, two decimals."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no values")
    return f"{v.mean():.2f}({v.min():.2f})"


@dataclass
class MatrixRow:
    framework: str
    pairing: str
    eers: list
    tdcfs: list

    @property
    def eer_cell(self) -> str:
        return avg_best([100 * e for e in self.eers])

    @property
    def tdcf_cell(self) -> str:
        return avg_best(self.tdcfs)


def format_matrix(rows: list[MatrixRow]) -> str:
    lines = [f"{'framework':<24}{'pairing':<8}{'EER(%)':>16}{'min t-DCF':>16}"]
    lines += [f"{framework_kind(r.framework):<24}{r.pairing:<8}{r.eer_cell:>16}{r.tdcf_cell:>16}"
              for r in rows]
    return "\n".join(lines) + "\n"


def run_matrix(frameworks, pairings, seeds, data, cfg: TrainConfig | None = None,
               op=None, progress=None) -> list[MatrixRow]:
    """Train and evaluate every (framework, pairing, seed).

    ``data(pairing)`` returns (train, dev, eval) utterance lists.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    base = asdict(cfg or TrainConfig())
    rows = []
    for pairing in pairings:
        tr, dev, ev = data(pairing)
        for fw in frameworks:
            eers, tdcfs = [], []
            for seed in seeds:
                run_cfg = TrainConfig(**{**base, "framework": fw, "pairing": pairing, "seeds": [seed]})
                ckpt = train(tr, dev, run_cfg, seed)
                sf = evaluate(ckpt, ev, batch_size=run_cfg.eval_batch_size)
                eers.append(compute_eer(sf).eer)
                tdcfs.append(compute_min_tdcf(sf, op).min_tdcf)
                if progress is not None:
                    progress(fw, pairing, seed, eers[-1])
            rows.append(MatrixRow(fw, pairing, eers, tdcfs))
    return rows


__all__ = [
    "Checkpoint", "ConfigMismatch", "FeatureCacheMiss", "MatrixRow", "ScoreFile", "TrainConfig",
    "TrainError", "Utterance", "avg_best", "check_compatible", "controlled_splits",
    "deterministic_mode", "evaluate", "format_matrix", "phase_entropy_comparison", "run_matrix",
    "score_utterances", "segment_scores", "train",
    "utterance_segments", "utterances_from_corpus", "utterances_from_manifest",
]
