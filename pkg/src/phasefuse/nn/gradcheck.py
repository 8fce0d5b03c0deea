"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

import numpy as np

from .layers import Module


# when both gradient norms sum below this, the tensor's true gradient is zero
# (e.g. a conv bias feeding batch norm) and the numeric one is rounding noise
ABS_FLOOR = 1e-7
KINK_TOL = 1e-4


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom < ABS_FLOOR:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def grad_check(model: Module, inputs, eps: float = 1e-5, n_coords: int = 50,
               seed: int = 0, check_inputs: bool = True, skip_kinks: bool = True) -> float:
    """Max relative error between backprop and central differences.

    The scalar objective is ``sum(model(*inputs) * R)`` for a fixed random R.
    Up to ``n_coords`` coordinates are sampled per parameter tensor (and per
    input); the error for each tensor is ||a - n|| / (||a|| + ||n||) over
    its sampled coordinates, taken as 0 when both norms sum below
    ``ABS_FLOOR``. Run the model in float64.

    With ``skip_kinks`` a coordinate whose one-sided differences disagree by
    more than ``KINK_TOL`` (in derivative units) is dropped: the central
    difference straddled a ReLU kink and says nothing about the backward pass.
    Smooth coordinates differ only at O(eps^2), and a wrong backward formula
    does not create such an asymmetry.
    """
    if not isinstance(inputs, (tuple, list)):
        inputs = (inputs,)
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    rng = np.random.default_rng(seed)
    out = model.forward(*inputs)
    proj = rng.standard_normal(out.shape)

    def objective():
        return float(np.sum(model.forward(*inputs) * proj))

    model.zero_grad()
    model.forward(*inputs)
    g_in = model.backward(proj)
    analytic_params = {n: p.grad.copy() for n, p in model.named_parameters()}
    if g_in is not None and not isinstance(g_in, (tuple, list)):
        g_in = (g_in,)

    f0 = objective()
    worst = 0.0
    targets = [(p.data, analytic_params[n]) for n, p in model.named_parameters()]
    if check_inputs and g_in is not None:
        targets += [(x, g) for x, g in zip(inputs, g_in) if g is not None]
    for data, analytic in targets:
        flat = data.reshape(-1)
        k = min(n_coords, flat.size)
        idx = rng.choice(flat.size, size=k, replace=False)
        numeric = np.empty(k)
        keep = np.ones(k, dtype=bool)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = objective()
            flat[i] = orig - eps
            f_minus = objective()
            flat[i] = orig
            numeric[j] = (f_plus - f_minus) / (2 * eps)
            asym = abs((f_plus - f0) - (f0 - f_minus)) / eps
            keep[j] = not (skip_kinks and asym > KINK_TOL * (1.0 + abs(numeric[j])))
        worst = max(worst, _relative_error(analytic.reshape(-1)[idx][keep], numeric[keep]))
    return worst
