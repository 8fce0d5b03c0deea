"""Layers with hand-written forward and backward passes.

Tensors are numpy arrays in (B, C, H, W) layout. Each layer caches what its
backward pass needs during ``forward``; ``backward`` takes the upstream
gradient, accumulates parameter gradients and returns the input gradient.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels

DEFAULT_DTYPE = np.float32
# stride-1 convs with at most this many input channels use the direct-loop kernels
DIRECT_CONV_MAX_CHANNELS = 8


class Parameter:
    __slots__ = ("data", "grad")

    def __init__(self, data):
        self.data = np.asarray(data)
        self.grad = np.zeros_like(self.data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size


class Buffer:
    """Non-trainable state (batch-norm running statistics)."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = np.asarray(data)


class Module:
    training = True
    needs_input_grad = True

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def __call__(self, *args):
        return self.forward(*args)

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Buffer, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, v in enumerate(value):
                    if isinstance(v, (Parameter, Buffer, Module)):
                        yield f"{name}.{i}", v

    def named_parameters(self, prefix: str = ""):
        for name, value in self._children():
            if isinstance(value, Parameter):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = ""):
        for name, value in self._children():
            if isinstance(value, Buffer):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self):
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)

    def astype(self, dtype):
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
            p.grad = np.zeros_like(p.data)
        for _, b in self.named_buffers():
            b.data = b.data.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {n: p.data.copy() for n, p in self.named_parameters()}
        state.update({n: b.data.copy() for n, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        own.update(dict(self.named_buffers()))
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"missing tensors in state: {sorted(missing)}")
        for name, target in own.items():
            value = np.asarray(state[name])
            if value.shape != target.data.shape:
                raise ValueError(f"{name}: shape {value.shape} != {target.data.shape}")
            target.data = value.astype(target.data.dtype, copy=True)


def param_count(model: Module | None) -> int:
    if model is None:
        return 0
    return sum(p.size for p in model.parameters())


def _pair(v) -> tuple[int, int]:
    return (v, v) if isinstance(v, int) else tuple(v)


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype=DEFAULT_DTYPE):
    bound = math.sqrt(6.0 / fan_in) if fan_in else 0.0
    return rng.uniform(-bound, bound, shape).astype(dtype)


class Conv2d(Module):
    """2-D cross-correlation.

    Narrow stride-1 convs run on direct-loop kernels; everything else uses
    im2col + matmul.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0,
                 bias=True, rng=None, dtype=DEFAULT_DTYPE):
        if rng is None:
            rng = np.random.default_rng(0)
        kh, kw = _pair(kernel_size)
        self.stride = _pair(stride)
        self.padding = _pair(padding)
        if kh < 1 or kw < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ValueError("invalid conv hyperparameters")
        self.in_channels, self.out_channels = in_channels, out_channels
        fan_in = in_channels * kh * kw
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels, kh, kw), fan_in, dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype)) if bias else None

    def output_shape(self, h, w):
        kh, kw = self.weight.shape[2:]
        (sh, sw), (ph, pw) = self.stride, self.padding
        return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1

    def forward(self, x):
        b, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"conv expects {self.in_channels} input channels, got {c}")
        o, _, kh, kw = self.weight.shape
        (sh, sw), (ph, pw) = self.stride, self.padding
        ho, wo = self.output_shape(h, w)
        if ho < 1 or wo < 1:
            raise ValueError("input smaller than kernel")
        if self._direct(c, kh, kw):
            return self._forward_direct(x, ho, wo)
        if kh == kw == 1 and ph == pw == 0:
            xs = x[:, :, ::sh, ::sw]
            cols = xs.transpose(0, 2, 3, 1).reshape(-1, c)
        else:
            xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
            win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw][:, :, :ho, :wo]
            cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(-1, c * kh * kw)
        out = cols @ self.weight.data.reshape(o, -1).T
        if self.bias is not None:
            out += self.bias.data
        self._cache = (x.shape, cols, None)
        # contiguous NCHW keeps downstream per-channel reductions fast
        return np.ascontiguousarray(out.reshape(b, ho, wo, o).transpose(0, 3, 1, 2))

    def _direct(self, c, kh, kw) -> bool:
        return self.stride == (1, 1) and kh * kw > 1 and c <= DIRECT_CONV_MAX_CHANNELS

    def backward(self, grad):
        (b, c, h, w), saved, swap = self._cache
        o, _, kh, kw = self.weight.shape
        (sh, sw), (ph, pw) = self.stride, self.padding
        if swap is not None:
            return self._backward_direct(grad, saved, h, w, swap)
        cols = saved
        ho, wo = grad.shape[2:]
        gm = grad.transpose(0, 2, 3, 1).reshape(-1, o)
        self.weight.grad += (gm.T @ cols).reshape(self.weight.shape)
        if self.bias is not None:
            self.bias.grad += gm.sum(axis=0)
        if not self.needs_input_grad:
            return None
        gcols = (gm @ self.weight.data.reshape(o, -1)).reshape(b, ho, wo, c, kh, kw)
        gx = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i:i + sh * (ho - 1) + 1:sh, j:j + sw * (wo - 1) + 1:sw] += \
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gx[:, :, ph:ph + h, pw:pw + w]

    # The direct kernels vectorise along the last axis, so when the map is
    # taller than wide they run on the transposed (B, C, W, H) layout.

    def _forward_direct(self, x, ho, wo):
        shape, b, o = x.shape, x.shape[0], self.out_channels
        swap = x.shape[3] < x.shape[2]
        ph, pw = self.padding[::-1] if swap else self.padding
        wt = self.weight.data.astype(x.dtype, copy=False)
        if swap:
            x, wt, (ho, wo) = _swap_hw(x), _swap_hw(wt), (wo, ho)
        xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else np.ascontiguousarray(x)
        out = np.empty((b, o, ho, wo), dtype=x.dtype)
        bias = self.bias.data if self.bias is not None else np.zeros(o, x.dtype)
        _kernels.conv_forward_s1(xp, np.ascontiguousarray(wt), bias, out)
        self._cache = (shape, xp, swap)
        return _swap_hw(out) if swap else out

    def _backward_direct(self, grad, xp, h, w, swap):
        ph, pw = self.padding[::-1] if swap else self.padding
        if swap:
            h, w = w, h
        grad = _swap_hw(grad) if swap else np.ascontiguousarray(grad)
        wt = self.weight.data.astype(grad.dtype, copy=False)
        wt = _swap_hw(wt) if swap else np.ascontiguousarray(wt)
        gw = np.zeros(wt.shape, dtype=np.float64)
        _kernels.conv_backward_weight_s1(grad, xp, gw)
        self.weight.grad += (gw.transpose(0, 1, 3, 2) if swap else gw).astype(self.weight.grad.dtype)
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=(0, 2, 3))
        if not self.needs_input_grad:
            return None
        gxp = np.zeros_like(xp)
        _kernels.conv_backward_input_s1(grad, wt, gxp)
        gx = gxp[:, :, ph:ph + h, pw:pw + w]
        return _swap_hw(gx) if swap else gx


def _swap_hw(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.transpose(0, 1, 3, 2))


class BatchNorm2d(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=DEFAULT_DTYPE):
        self.eps, self.momentum = eps, momentum
        self.gamma = Parameter(np.ones(channels, dtype))
        self.beta = Parameter(np.zeros(channels, dtype))
        self.running_mean = Buffer(np.zeros(channels, dtype))
        self.running_var = Buffer(np.ones(channels, dtype))

    def forward(self, x):
        b, c, h, w = x.shape
        x3 = x.reshape(b, c, h * w)
        if self.training:
            n = b * h * w
            if n < 2:
                raise ValueError("batch norm needs B*H*W >= 2 in training mode")
            mean = _channel_sum(x3) / n
            xc = x3 - mean[:, None]
            var = _channel_sum(xc * xc) / n
            m = self.momentum
            self.running_mean.data = ((1 - m) * self.running_mean.data + m * mean).astype(x.dtype)
            self.running_var.data = ((1 - m) * self.running_var.data + m * var * n / (n - 1)).astype(x.dtype)
        else:
            xc = x3 - self.running_mean.data[:, None]
            var = self.running_var.data
        inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = xc * inv_std[:, None]
        self._cache = (xhat, inv_std, x.shape)
        return (xhat * self.gamma.data[:, None] + self.beta.data[:, None]).reshape(x.shape)

    def backward(self, grad):
        xhat, inv_std, shape = self._cache
        g3 = grad.reshape(xhat.shape)
        g_gamma = _channel_sum(g3 * xhat)
        g_beta = _channel_sum(g3)
        self.gamma.grad += g_gamma
        self.beta.grad += g_beta
        if not self.needs_input_grad:
            return None
        scale = (self.gamma.data * inv_std)[:, None]
        if not self.training:
            return (g3 * scale).reshape(shape)
        n = xhat.shape[0] * xhat.shape[2]
        gx = g3 - (g_beta / n)[:, None] - xhat * (g_gamma / n)[:, None]
        return (scale * gx).reshape(shape)


def _channel_sum(a3: np.ndarray) -> np.ndarray:
    """Per-channel sum of a (B, C, N) array."""
    return a3.sum(axis=2).sum(axis=0)


class ReLU(Module):
    def forward(self, x):
        out = np.maximum(x, 0)
        self._mask = out > 0
        return out

    def backward(self, grad):
        return grad * self._mask


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Sigmoid(Module):
    def forward(self, x):
        self._out = _sigmoid(np.asarray(x))
        return self._out

    def backward(self, grad):
        return grad * self._out * (1.0 - self._out)


def _pool_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    m = np.zeros((n_out, n_in), dtype)
    for i in range(n_out):
        lo = (i * n_in) // n_out
        hi = -((-(i + 1) * n_in) // n_out)
        m[i, lo:hi] = 1.0 / (hi - lo)
    return m


class AdaptiveAvgPool2d(Module):
    """Bin i spans rows [floor(i*H/H'), ceil((i+1)*H/H')); separable averages."""

    def __init__(self, output_size):
        self.output_size = _pair(output_size)
        if min(self.output_size) < 1:
            raise ValueError("adaptive pool target must be >= 1")

    def forward(self, x):
        h, w = x.shape[2:]
        th, tw = self.output_size
        if th > h or tw > w:
            raise ValueError(f"pool target {self.output_size} exceeds input ({h}, {w})")
        self._ph = _pool_matrix(h, th, x.dtype)
        self._pw = _pool_matrix(w, tw, x.dtype)
        out = x if tw == w else x @ self._pw.T
        return out if th == h else np.einsum("ih,bchw->bciw", self._ph, out)

    def backward(self, grad):
        th, tw = self.output_size
        g = grad if th == self._ph.shape[1] else np.einsum("ih,bciw->bchw", self._ph, grad)
        return g if tw == self._pw.shape[1] else g @ self._pw


class GlobalAvgPool(Module):
    """(B, C, H, W) -> (B, C)."""

    def forward(self, x):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        b, c, h, w = self._shape
        return np.broadcast_to((grad / (h * w))[:, :, None, None], self._shape).copy()


class Linear(Module):
    def __init__(self, in_features, out_features, bias=True, rng=None, dtype=DEFAULT_DTYPE):
        if rng is None:
            rng = np.random.default_rng(0)
        self.weight = Parameter(kaiming_uniform(rng, (out_features, in_features), in_features, dtype))
        self.bias = Parameter(np.zeros(out_features, dtype)) if bias else None

    def forward(self, x):
        if x.shape[-1] != self.weight.shape[1]:
            raise ValueError(f"linear expects {self.weight.shape[1]} features, got {x.shape[-1]}")
        self._x = x
        out = x @ self.weight.data.T
        return out + self.bias.data if self.bias is not None else out

    def backward(self, grad):
        self.weight.grad += grad.T @ self._x
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=0)
        return grad @ self.weight.data


class Sequential(Module):
    def __init__(self, *layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            if grad is None:
                break
        return grad

    def __getitem__(self, i):
        return self.layers[i]

    def __len__(self):
        return len(self.layers)


def conv_bn_relu(cin, cout, kernel, stride=1, padding=None, rng=None, dtype=DEFAULT_DTYPE):
    if padding is None:
        padding = _pair(kernel)[0] // 2, _pair(kernel)[1] // 2
    return [Conv2d(cin, cout, kernel, stride, padding, rng=rng, dtype=dtype),
            BatchNorm2d(cout, dtype=dtype), ReLU()]


def softmax_xent(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean two-class cross-entropy; label 1 = bonafide, 0 = spoof."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    b = logits.shape[0]
    loss = -float(log_p[np.arange(b), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(b), labels] -= 1.0
    return loss, (grad / b).astype(logits.dtype, copy=False)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))
