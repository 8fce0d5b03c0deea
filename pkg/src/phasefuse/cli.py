"""``phasefuse`` command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 configuration error. Option
values resolve as command-line flag, then ``--config`` JSON file, then the
built-in default. Every run that writes output also writes a
``*.run.json`` manifest of the resolved options (no timestamps, so
deterministic runs produce identical bytes).
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("phasefuse")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Opt:
    flag: str
    default: object
    help: str
    type: object = str
    choices: tuple | None = None
    is_switch: bool = False

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_strs(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


FRAMEWORK_CHOICES = ("a", "b", "c")
PAIRING_CHOICES = ("lps", "cqt", "lfcc")

COMMON = [
    Opt("--config", None, "JSON file of option values; flags override it"),
    Opt("--seed", 0, "seed for all randomness in this run", int),
    Opt("--deterministic", False, "single-threaded numerics for bit-reproducible output", is_switch=True),
    Opt("--verbose", False, "log progress to stderr", is_switch=True),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "synth": ("generate a synthetic audio or feature-domain corpus", [
        Opt("--out", None, "output directory (required)"),
        Opt("--spec", None, "JSON file of corpus fields (SynthSpec or FeatureCorpusSpec names); "
            "flags override it"),
        Opt("--kind", "audio", "audio: WAV corpus; features: feature-domain corpus with cached maps",
            choices=("audio", "features")),
        Opt("--n-bonafide", 10, "audio: number of bonafide utterances", int),
        Opt("--n-spoof", 10, "audio: number of spoofed utterances", int),
        Opt("--spoof-mode", "magnitude_perturbed", "audio: how spoofs are built",
            choices=("magnitude_perturbed", "phase_randomized")),
        Opt("--duration", 2.0, "audio: utterance length in seconds", float),
        Opt("--n-per-class", 10, "features: utterances per class", int),
        Opt("--frames", 400, "features: frames per utterance", int),
        Opt("--dim", 8, "features: feature dimension", int),
        Opt("--phase-mode", "structured", "features: bonafide phase law",
            choices=("structured", "uniform_random")),
        Opt("--magnitude-mode", "shared_distribution", "features: magnitude law across classes",
            choices=("shared_distribution", "class_tilted")),
        Opt("--prefix", "F", "features: utterance id prefix"),
    ]),
    "extract": ("extract and cache features for every utterance of a manifest", [
        Opt("--manifest", None, "input manifest JSON (required)"),
        Opt("--feature", "cqt", "feature pairing", choices=PAIRING_CHOICES),
        Opt("--with-phase", False, "also cache the paired phase map", is_switch=True),
        Opt("--out", None, "output directory for caches and the new manifest (required)"),
    ]),
    "entropy": ("per-frame entropy curves of one utterance", [
        Opt("--utt", None, "16 kHz WAV file; omit to use a synthetic harmonic utterance"),
        Opt("--feature", "cqt", "feature family", choices=PAIRING_CHOICES),
        Opt("--bins", 32, "histogram bins", int),
        Opt("--out", None, "per-frame CSV path (required); means go to <out stem>_means.csv"),
        Opt("--ckpt", None, "framework-C checkpoint; adds the processed-phase curve"),
    ]),
    "train": ("train one framework and keep the best development-EER epoch", [
        Opt("--framework", "c", "fusion framework", choices=FRAMEWORK_CHOICES),
        Opt("--pairing", "cqt", "feature pairing", choices=PAIRING_CHOICES),
        Opt("--scenario", "known", "known: one subset; unknown: merge all training manifests",
            choices=("known", "unknown")),
        Opt("--train-manifest", None, "training manifest(s), comma-separated (required)", _csv_strs),
        Opt("--dev-manifest", None, "development manifest (required)"),
        Opt("--eval-manifest", None, "optional manifest to score after training"),
        Opt("--epochs", 30, "training epochs", int),
        Opt("--batch-size", 32, "segments per minibatch", int),
        Opt("--lr", 1e-3, "Adam learning rate", float),
        Opt("--weight-decay", 1e-5, "L2 weight decay added to the gradient", float),
        Opt("--backend", "lite", "backend size preset", choices=("lite", "paper_scale")),
        Opt("--out", None, "checkpoint path (required)"),
        Opt("--scores", None, "score file path for --eval-manifest"),
    ]),
    "eval": ("score a manifest with a checkpoint", [
        Opt("--ckpt", None, "checkpoint path (required)"),
        Opt("--manifest", None, "manifest to score (required)"),
        Opt("--out", None, "score file path (required)"),
        Opt("--framework", None, "expected framework; mismatch with the checkpoint is an error",
            choices=FRAMEWORK_CHOICES),
        Opt("--pairing", None, "expected pairing; mismatch with the checkpoint is an error",
            choices=PAIRING_CHOICES),
        Opt("--batch-size", 64, "segments per forward batch", int),
    ]),
    "score": ("EER, min t-DCF and optional per-attack breakdown of a score file", [
        Opt("--scores", None, "score file (required)"),
        Opt("--asv-op", None, "ASV operating point JSON; default is the shipped illustrative one"),
        Opt("--breakdown", False, "add per-attack EERs", is_switch=True),
        Opt("--out", None, "optional CSV report path"),
        Opt("--det-out", None, "optional DET curve CSV path"),
    ]),
    "matrix": ("train and evaluate every framework x pairing over several seeds", [
        Opt("--frameworks", "a,b,c", "comma-separated frameworks", _csv_strs),
        Opt("--pairings", "cqt", "comma-separated pairings", _csv_strs),
        Opt("--seeds", "1,2,3", "comma-separated training seeds", _csv_ints),
        Opt("--controlled", False, "use the feature-domain controlled corpus", is_switch=True),
        Opt("--n-train", 2000, "controlled corpus: training utterances", int),
        Opt("--n-dev", 400, "controlled corpus: development utterances", int),
        Opt("--n-eval", 400, "controlled corpus: evaluation utterances", int),
        Opt("--dim", 8, "controlled corpus: feature dimension", int),
        Opt("--train-manifest", None, "audio mode: training manifest"),
        Opt("--dev-manifest", None, "audio mode: development manifest"),
        Opt("--eval-manifest", None, "audio mode: evaluation manifest"),
        Opt("--epochs", 30, "training epochs", int),
        Opt("--batch-size", 32, "segments per minibatch", int),
        Opt("--lr", 1e-3, "Adam learning rate", float),
        Opt("--backend", "lite", "backend size preset", choices=("lite", "paper_scale")),
        Opt("--asv-op", None, "ASV operating point JSON for t-DCF"),
        Opt("--out", None, "optional report path (text); a CSV is written alongside"),
    ]),
    "selftest": ("run gradient checks, metric oracles and segmentation checks", []),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasefuse", description="Phase-aware spoof detection toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, (desc, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=desc, description=desc)
        for o in opts + COMMON:
            text = o.help if o.default is None or o.is_switch else f"{o.help} (default: {o.default})"
            if o.is_switch:
                p.add_argument(o.flag, dest=o.dest, action="store_true", default=None, help=text)
            else:
                p.add_argument(o.flag, dest=o.dest, type=o.type, choices=o.choices, default=None, help=text)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Effective option values: flag > config file > default."""
    _, opts = COMMANDS[args.command]
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    known = {o.dest: o for o in opts + COMMON}
    unknown = set(cfg) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    explicit = set()
    for dest, o in known.items():
        value = getattr(args, dest)
        if value is not None:
            explicit.add(dest)
        else:
            value = cfg.get(dest, o.default)
            if value is not None and not o.is_switch and o.type in (_csv_ints, _csv_strs) \
                    and not isinstance(value, list):
                value = o.type(value)
        if o.choices and value is not None and value not in o.choices:
            raise ConfigError(f"{o.flag}: {value!r} not in {list(o.choices)}")
        out[dest] = value
    out["command"] = args.command
    out["_explicit"] = explicit
    return out


def _require(cfg: dict, *names: str) -> None:
    missing = [n for n in names if cfg.get(n) in (None, [], "")]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version("phasefuse")
    except PackageNotFoundError:
        return "0.0.0+local"


def write_run_manifest(path, cfg: dict) -> None:
    import numba
    import scipy
    doc = {
        "config": {k: v for k, v in sorted(cfg.items()) if k not in ("verbose", "_explicit")},
        "versions": {"phasefuse": _version(), "numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__, "python": platform.python_version()},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- subcommands ------------------------------------------------------------------

# corpus-spec field name -> option name
_SPEC_FIELDS = {
    "n_bonafide": "n_bonafide", "n_spoof": "n_spoof", "spoof_mode": "spoof_mode",
    "duration_s": "duration", "seed": "seed", "n_per_class": "n_per_class", "T": "frames",
    "D": "dim", "phase_mode": "phase_mode", "magnitude_mode": "magnitude_mode",
}


def _apply_spec_file(cfg: dict) -> dict:
    """Fill options from a --spec JSON unless they were given as flags."""
    if not cfg.get("spec"):
        return cfg
    try:
        spec = json.loads(Path(cfg["spec"]).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read spec {cfg['spec']}: {e}") from None
    unknown = set(spec) - set(_SPEC_FIELDS)
    if unknown:
        raise ConfigError(f"unknown spec fields: {sorted(unknown)}")
    out = dict(cfg)
    explicit = cfg.get("_explicit", set())
    for k, v in spec.items():
        if _SPEC_FIELDS[k] not in explicit:
            out[_SPEC_FIELDS[k]] = v
    return out


def cmd_synth(cfg: dict) -> int:
    from . import dataset_io as dio
    from .dsp import write_feature_cache
    from .featmap import FeatureCorpusSpec, synth_feature_corpus
    _require(cfg, "out")
    cfg = _apply_spec_file(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if cfg["kind"] == "audio":
        spec = dio.SynthSpec(cfg["n_bonafide"], cfg["n_spoof"], cfg["spoof_mode"], cfg["duration"], cfg["seed"])
        m = dio.synth_corpus(spec, out)
        print(f"wrote {len(m)} utterances to {out}")
    else:
        spec = FeatureCorpusSpec(cfg["n_per_class"], cfg["frames"], cfg["dim"], cfg["phase_mode"],
                                 cfg["magnitude_mode"], cfg["seed"])
        feats = out / "feats"
        feats.mkdir(exist_ok=True)
        records, paths = [], {}
        for item in synth_feature_corpus(spec, cfg["prefix"]):
            u = item.utterance_id
            write_feature_cache(feats / f"{u}.magnitude.pffc", item.magnitude, u)
            write_feature_cache(feats / f"{u}.phase.pffc", item.phase, u)
            label = dio.BONAFIDE if item.label == 1 else dio.SPOOF
            records.append(dio.TrialRecord(u, "SYN", item.attack_id, label, "LA"))
            paths[u] = {"magnitude": f"feats/{u}.magnitude.pffc", "phase": f"feats/{u}.phase.pffc"}
        dio.Manifest(records, Path("."), dio.KNOWN_KIND, paths).save(out / "manifest.json")
        (out / "protocol.txt").write_text(dio.serialize_protocol(records))
        print(f"wrote {len(records)} feature pairs to {out}")
    write_run_manifest(out / "synth.run.json", cfg)
    return EXIT_OK


def cmd_extract(cfg: dict) -> int:
    from . import dsp
    from .dataset_io import Manifest, load_wav, require_16k
    _require(cfg, "manifest", "out")
    m = Manifest.load(cfg["manifest"])
    out = Path(cfg["out"])
    (out / "feats").mkdir(parents=True, exist_ok=True)
    paths = {}
    for rec in m.records:
        src = m.path_of(rec.utterance_id)
        if isinstance(src, dict):
            raise ConfigError(f"{rec.utterance_id}: manifest already points at feature caches")
        wave = load_wav(src)
        require_16k(wave)
        mag, ph = dsp.extract_pair(wave, cfg["feature"], cfg["with_phase"])
        u = rec.utterance_id
        entry = {mag.channel_kind: f"feats/{u}.{cfg['feature']}.{mag.channel_kind}.pffc"}
        dsp.write_feature_cache(out / entry[mag.channel_kind], mag, u)
        if ph is not None:
            entry["phase"] = f"feats/{u}.{cfg['feature']}.phase.pffc"
            dsp.write_feature_cache(out / entry["phase"], ph, u)
        paths[u] = entry
    Manifest(m.records, Path("."), m.scenario, paths).save(out / "manifest.json")
    write_run_manifest(out / "extract.run.json", cfg)
    print(f"cached {len(paths)} utterances under {out}")
    return EXIT_OK


def cmd_entropy(cfg: dict) -> int:
    from . import dsp, entropy
    from .dataset_io import harmonic_test_utterance, load_wav
    _require(cfg, "out")
    wave = load_wav(cfg["utt"]) if cfg["utt"] else harmonic_test_utterance(seed=cfg["seed"])
    ecfg = entropy.EntropyConfig(n_bins=cfg["bins"])
    res = entropy.analyze_utterance(wave, cfg["feature"], ecfg, noise_seed=cfg["seed"])
    curves = list(res.curves)
    if cfg["ckpt"]:
        from .train_eval import Checkpoint
        ck = Checkpoint.load(cfg["ckpt"])
        if ck.model_config["pairing"] != cfg["feature"]:
            raise ConfigError(f"checkpoint pairing {ck.model_config['pairing']} != --feature {cfg['feature']}")
        model = ck.build_model()
        if model.phase_net is None:
            raise ConfigError("--ckpt must be a framework-C checkpoint")
        x = res.phase_map.values.astype(np.float32)[None, None]
        out = model.phase_net.forward(x)[0, 0].astype(np.float64)
        fm = dsp.FeatureMap(out, dsp.PROCESSED_PHASE, res.phase_map.source)
        curves.append(entropy.map_entropy(fm, ecfg, "processed_phase", curves[0].frame_times))
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(entropy.entropy_report(curves))
    means = entropy.UtteranceAnalysis(curves, res.voiced, res.phase_map).means()
    lines = ["source,mean_entropy_bits"] + [f"{k},{v:.6f}" for k, v in means.items()]
    means_path = out.with_name(out.stem + "_means.csv")
    means_path.write_text("\n".join(lines) + "\n")
    write_run_manifest(out.with_name(out.stem + ".run.json"), cfg)
    for k, v in means.items():
        print(f"{k:<24}{v:.4f}")
    return EXIT_OK


def _load_utts(path: str, pairing: str, framework: str):
    from .dataset_io import Manifest
    from .models import A_MAGNITUDE_ONLY, framework_kind
    from .train_eval import utterances_from_manifest
    return utterances_from_manifest(Manifest.load(path), pairing,
                                    framework_kind(framework) != A_MAGNITUDE_ONLY)


def cmd_train(cfg: dict) -> int:
    from .dataset_io import KNOWN_KIND, UNKNOWN_KIND, Manifest, merge_manifests
    from .models import A_MAGNITUDE_ONLY, framework_kind
    from .train_eval import TrainConfig, evaluate, train, utterances_from_manifest
    _require(cfg, "train_manifest", "dev_manifest", "out")
    if cfg["eval_manifest"] and not cfg["scores"]:
        raise ConfigError("--eval-manifest needs --scores")
    scenario = KNOWN_KIND if cfg["scenario"] == "known" else UNKNOWN_KIND
    manifests = [Manifest.load(p) for p in cfg["train_manifest"]]
    if scenario == KNOWN_KIND and len(manifests) != 1:
        raise ConfigError("known scenario takes exactly one training manifest")
    train_m = manifests[0] if scenario == KNOWN_KIND else merge_manifests(*manifests)
    with_phase = framework_kind(cfg["framework"]) != A_MAGNITUDE_ONLY
    tcfg = TrainConfig(cfg["framework"], cfg["pairing"], scenario, cfg["epochs"], cfg["batch_size"],
                       cfg["lr"], cfg["weight_decay"], [cfg["seed"]], cfg["backend"])
    tr = utterances_from_manifest(train_m, cfg["pairing"], with_phase)
    dev = _load_utts(cfg["dev_manifest"], cfg["pairing"], cfg["framework"])
    progress = lambda e, loss, d: log.info("epoch %d loss %.4f dev EER %.2f%%", e, loss, 100 * d)
    ck = train(tr, dev, tcfg, cfg["seed"], progress)
    Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
    ck.save(cfg["out"])
    print(f"best dev EER {100 * ck.best_dev_eer:.2f}% at epoch {ck.epoch_of_best}; saved {cfg['out']}")
    if cfg["eval_manifest"]:
        sf = evaluate(ck, _load_utts(cfg["eval_manifest"], cfg["pairing"], cfg["framework"]), cfg["pairing"])
        sf.save(cfg["scores"])
        print(f"wrote {len(sf)} scores to {cfg['scores']}")
    write_run_manifest(Path(cfg["out"]).with_suffix(".run.json"), cfg)
    return EXIT_OK


def cmd_eval(cfg: dict) -> int:
    from .train_eval import Checkpoint, check_compatible, evaluate
    _require(cfg, "ckpt", "manifest", "out")
    ck = Checkpoint.load(cfg["ckpt"])
    check_compatible(ck, cfg["framework"], cfg["pairing"])
    pairing = ck.model_config["pairing"]
    utts = _load_utts(cfg["manifest"], pairing, ck.model_config["kind"])
    sf = evaluate(ck, utts, pairing, cfg["batch_size"])
    sf.save(cfg["out"])
    write_run_manifest(Path(cfg["out"]).with_suffix(".run.json"), cfg)
    print(f"wrote {len(sf)} scores to {cfg['out']}")
    return EXIT_OK


def cmd_score(cfg: dict) -> int:
    from .metrics import (AsvOperatingPoint, compute_eer, compute_min_tdcf, default_operating_point,
                          det_curve, per_attack_breakdown)
    from .scorefile import ScoreFile
    _require(cfg, "scores")
    sf = ScoreFile.load(cfg["scores"])
    op = AsvOperatingPoint.load(cfg["asv_op"]) if cfg["asv_op"] else default_operating_point()
    if cfg["breakdown"]:
        bd = per_attack_breakdown(sf, op)
        sys.stdout.write(bd.to_text())
        csv_text = bd.to_csv()
    else:
        eer, tdcf = compute_eer(sf), compute_min_tdcf(sf, op)
        flag = "  (inverted: spoofs outscore bonafide)" if eer.inverted else ""
        print(f"EER {100 * eer.eer:.2f}% at threshold {eer.threshold:.6g}{flag}")
        print(f"min t-DCF {tdcf.min_tdcf:.4f}")
        csv_text = f"metric,value\neer,{eer.eer!r}\nmin_tdcf,{tdcf.min_tdcf!r}\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(csv_text)
    if cfg["det_out"]:
        Path(cfg["det_out"]).write_text(det_curve(sf).to_csv())
    return EXIT_OK


def cmd_matrix(cfg: dict) -> int:
    from .metrics import AsvOperatingPoint
    from .train_eval import TrainConfig, controlled_splits, format_matrix, run_matrix
    for fw in cfg["frameworks"]:
        if fw not in FRAMEWORK_CHOICES:
            raise ConfigError(f"unknown framework {fw!r}")
    for p in cfg["pairings"]:
        if p not in PAIRING_CHOICES:
            raise ConfigError(f"unknown pairing {p!r}")
    if not cfg["seeds"]:
        raise ConfigError("--seeds is empty")
    if cfg["controlled"]:
        splits = controlled_splits(cfg["n_train"], cfg["n_dev"], cfg["n_eval"], cfg["dim"], cfg["seed"])
        data = lambda pairing: splits
    else:
        _require(cfg, "train_manifest", "dev_manifest", "eval_manifest")
        cache = {}

        def data(pairing):
            if pairing not in cache:
                cache[pairing] = tuple(_load_utts(cfg[k], pairing, "b") for k in
                                       ("train_manifest", "dev_manifest", "eval_manifest"))
            return cache[pairing]
    tcfg = TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"],
                       seeds=cfg["seeds"], backend=cfg["backend"])
    op = AsvOperatingPoint.load(cfg["asv_op"]) if cfg["asv_op"] else None
    progress = lambda fw, p, s, e: log.info("%s %s seed %d eval EER %.2f%%", fw, p, s, 100 * e)
    rows = run_matrix(cfg["frameworks"], cfg["pairings"], cfg["seeds"], data, tcfg, op, progress)
    text = format_matrix(rows)
    sys.stdout.write(text)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.write_text(text)
        lines = ["framework,pairing,seed,eer,min_tdcf"]
        for r in rows:
            lines += [f"{r.framework},{r.pairing},{s},{e!r},{t!r}"
                      for s, e, t in zip(cfg["seeds"], r.eers, r.tdcfs)]
        out.with_suffix(".csv").write_text("\n".join(lines) + "\n")
        write_run_manifest(out.with_suffix(".run.json"), cfg)
    return EXIT_OK


def cmd_selftest(cfg: dict) -> int:
    from .selftest import run_selftest
    results = run_selftest(cfg["seed"])
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


HANDLERS = {
    "synth": cmd_synth, "extract": cmd_extract, "entropy": cmd_entropy, "train": cmd_train,
    "eval": cmd_eval, "score": cmd_score, "matrix": cmd_matrix, "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    from .dataset_io import ManifestError, ProtocolError, WavError
    from .metrics import MetricError
    from .train_eval import ConfigMismatch, deterministic_mode

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = resolve(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with deterministic_mode(bool(cfg["deterministic"])):
            return HANDLERS[args.command](cfg)
    except ConfigMismatch as e:
        print(f"config mismatch: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ManifestError, ProtocolError, MetricError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (WavError, OSError, ValueError, RuntimeError) as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
