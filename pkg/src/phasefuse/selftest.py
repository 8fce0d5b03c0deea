"""Built-in health checks behind ``phasefuse selftest``."""
from __future__ import annotations

import numpy as np

from .dsp import MAGNITUDE, FeatureMap
from .featmap import aggregate_scores, extend_to_multiple, segment_starts
from .metrics import compute_eer, compute_min_tdcf, default_operating_point
from .models import backend_preset, build_framework, build_phase_network, phase_config_for
from .nn import (AdaptiveAvgPool2d, BatchNorm2d, Conv2d, GlobalAvgPool, Linear, ReLU,
                 Res2NetBlock, SEBlock, Sigmoid, grad_check)

F64 = np.float64
LAYER_TOL = 1e-5
MODEL_TOL = 1e-4
MUTATION_MIN = 1e-2


def layer_cases(rng: np.random.Generator):
    """(name, module, inputs) for every layer type, in float64."""
    x = lambda *s: rng.standard_normal(s)
    return [
        ("conv2d", Conv2d(2, 3, 3, 1, 1, rng=rng, dtype=F64), [x(2, 2, 5, 5)]),
        ("conv2d_strided", Conv2d(2, 3, 3, (1, 2), 1, rng=rng, dtype=F64), [x(2, 2, 5, 6)]),
        ("conv2d_1x1", Conv2d(3, 4, 1, rng=rng, dtype=F64), [x(2, 3, 4, 4)]),
        ("batchnorm2d", BatchNorm2d(3, dtype=F64), [x(2, 3, 4, 5)]),
        ("relu", ReLU(), [x(2, 3, 4, 4)]),
        ("sigmoid", Sigmoid(), [x(3, 5)]),
        ("adaptive_avg_pool", AdaptiveAvgPool2d((3, 4)), [x(2, 2, 7, 9)]),
        ("global_avg_pool", GlobalAvgPool(), [x(2, 3, 4, 5)]),
        ("linear", Linear(5, 3, rng=rng, dtype=F64), [x(4, 5)]),
        ("se_block", SEBlock(8, 4, rng=rng, dtype=F64), [x(2, 8, 6, 6)]),
        ("res2net_block", Res2NetBlock(16, 8, 4, 4, rng=rng, dtype=F64), [x(2, 16, 6, 6)]),
        ("phase_network_lfcc", build_phase_network(phase_config_for("lfcc", 8), dtype=F64), [x(2, 1, 8, 20)]),
    ]


def framework_c_case(seed: int = 0):
    rng = np.random.default_rng(seed)
    model = build_framework("c", "cqt", backend_preset("lite"), seed=seed, dtype=F64)
    return model, [rng.standard_normal((2, 1, 16, 16)), rng.uniform(-np.pi, np.pi, (2, 1, 16, 16))]


class _ScaledBackward:
    """Wraps a module so its backward returns a distorted input gradient."""

    def __init__(self, module, factor=1.5):
        self.module, self.factor = module, factor
        self.orig = module.backward

    def __enter__(self):
        self.module.backward = lambda g: None if (r := self.orig(g)) is None else self.factor * r
        return self

    def __exit__(self, *exc):
        self.module.backward = self.orig


def mutation_error(seed: int = 0) -> float:
    """Gradient-check error of framework C with one corrupted backward pass."""
    model, inputs = framework_c_case(seed)
    target = model.backend.net[3]  # first transition conv
    with _ScaledBackward(target):
        return grad_check(model, inputs, eps=1e-6, n_coords=10, check_inputs=False)


def sweep_eer(bona, spoof) -> float:
    """Brute-force EER: loop over thresholds, interpolate at the first crossing."""
    thr = sorted(set(bona) | set(spoof)) + [np.inf]
    pts = [(sum(b < t for b in bona) / len(bona), sum(s >= t for s in spoof) / len(spoof)) for t in thr]
    for i, (frr, far) in enumerate(pts):
        if frr - far >= 0:
            if frr == far or i == 0:
                return frr
            (r0, a0), (r1, a1) = pts[i - 1], pts[i]
            lam = -(r0 - a0) / ((r1 - a1) - (r0 - a0))
            return r0 + lam * (r1 - r0)
    raise AssertionError("no crossing")


def sweep_tdcf(bona, spoof, op) -> float:
    c1, c2 = op.c1, op.c2
    thr = [-np.inf] + sorted(set(bona) | set(spoof)) + [np.inf]
    return min((c1 * (sum(b < t for b in bona) / len(bona)) + c2 * (sum(s >= t for s in spoof) / len(spoof)))
               / min(c1, c2) for t in thr)


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []
    for name, module, inputs in layer_cases(rng):
        err = grad_check(module, inputs, eps=1e-6, seed=seed)
        results.append((f"grad {name}", err < LAYER_TOL, f"rel err {err:.2e}"))
    model, inputs = framework_c_case(seed)
    err = grad_check(model, inputs, eps=1e-6, n_coords=20, seed=seed, check_inputs=False)
    results.append(("grad framework C", err < MODEL_TOL, f"rel err {err:.2e}"))
    mut = mutation_error(seed)
    results.append(("grad mutation control", mut > MUTATION_MIN, f"rel err {mut:.2e}"))

    ok = (compute_eer([0.9, 0.8], [0.1, 0.2]).eer == 0.0
          and compute_eer([0.8, 0.6], [0.7, 0.1]).eer == 0.5
          and compute_eer([0.1, 0.2], [0.9, 0.8]).inverted)
    results.append(("eer examples", ok, ""))
    op = default_operating_point()
    worst_eer = worst_tdcf = 0.0
    for _ in range(100):
        nb, ns = rng.integers(1, 30, 2)
        bona = list(np.round(rng.normal(1, 1, nb), 1))
        spoof = list(np.round(rng.normal(0, 1, ns), 1))
        worst_eer = max(worst_eer, abs(compute_eer(bona, spoof).eer - sweep_eer(bona, spoof)))
        worst_tdcf = max(worst_tdcf, abs(compute_min_tdcf(bona, op, spoof).min_tdcf - sweep_tdcf(bona, spoof, op)))
    results.append(("eer vs sweep oracle", worst_eer < 1e-12, f"max diff {worst_eer:.1e}"))
    results.append(("min t-DCF vs sweep oracle", worst_tdcf == 0.0, f"max diff {worst_tdcf:.1e}"))

    extended = extend_to_multiple(FeatureMap(rng.normal(size=(900, 4)), MAGNITUDE, "synthetic"))
    starts = segment_starts(extended.T)
    seg = rng.normal(size=len(starts))
    ok = extended.T == 1200 and starts == [0, 200, 400, 600, 800] and abs(aggregate_scores(seg) - seg.mean()) < 1e-12
    results.append(("segmentation T=900", ok, f"starts {starts}"))
    return results
