"""Squeeze-and-excitation gate and the Res2Net bottleneck block."""
from __future__ import annotations

import math

import numpy as np

from .layers import (DEFAULT_DTYPE, BatchNorm2d, Conv2d, Linear, Module, ReLU,
                     Sigmoid)


class SEBlock(Module):
    """Channel gate: pool -> linear C->ceil(C/r) -> relu -> linear -> sigmoid -> scale."""

    def __init__(self, channels, reduction=16, rng=None, dtype=DEFAULT_DTYPE):
        hidden = max(1, math.ceil(channels / reduction))
        self.fc1 = Linear(channels, hidden, rng=rng, dtype=dtype)
        self.relu = ReLU()
        self.fc2 = Linear(hidden, channels, rng=rng, dtype=dtype)
        self.sigmoid = Sigmoid()

    def forward(self, x):
        b, c, h, w = x.shape
        pooled = x.mean(axis=(2, 3))
        gate = self.sigmoid(self.fc2(self.relu(self.fc1(pooled))))
        self._x, self._gate = x, gate
        return x * gate[:, :, None, None]

    def backward(self, grad):
        x, gate = self._x, self._gate
        h, w = x.shape[2:]
        g_gate = np.sum(grad * x, axis=(2, 3))
        g = self.sigmoid.backward(g_gate)
        g = self.fc1.backward(self.relu.backward(self.fc2.backward(g)))
        return grad * gate[:, :, None, None] + (g / (h * w))[:, :, None, None]


class Res2NetBlock(Module):
    """Stride-1 Res2Net bottleneck with SE gate; output shape equals input shape.

    1x1 reduce to ``width`` channels, split into ``scale`` groups; group 0
    passes through, group 1 gets a 3x3 conv, group i>1 a 3x3 conv of
    (x_i + y_{i-1}); concat, 1x1 expand, SE, residual add, ReLU.
    """

    def __init__(self, channels, width, scale=4, se_reduction=16, rng=None, dtype=DEFAULT_DTYPE):
        if scale < 2:
            raise ValueError("res2net scale must be >= 2")
        if width % scale:
            raise ValueError(f"width {width} not divisible by scale {scale}")
        self.channels, self.width, self.scale = channels, width, scale
        g = width // scale
        self.conv1 = Conv2d(channels, width, 1, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm2d(width, dtype=dtype)
        self.relu1 = ReLU()
        self.convs = [Conv2d(g, g, 3, 1, 1, rng=rng, dtype=dtype) for _ in range(scale - 1)]
        self.bns = [BatchNorm2d(g, dtype=dtype) for _ in range(scale - 1)]
        self.relus = [ReLU() for _ in range(scale - 1)]
        self.conv3 = Conv2d(width, channels, 1, rng=rng, dtype=dtype)
        self.bn3 = BatchNorm2d(channels, dtype=dtype)
        self.se = SEBlock(channels, se_reduction, rng=rng, dtype=dtype) if se_reduction else None
        self.relu_out = ReLU()

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ValueError(f"block expects {self.channels} channels, got {x.shape[1]}")
        out = self.relu1(self.bn1(self.conv1(x)))
        g = self.width // self.scale
        xs = [out[:, i * g:(i + 1) * g] for i in range(self.scale)]
        ys = [xs[0]]
        for i in range(1, self.scale):
            z = xs[i] if i == 1 else xs[i] + ys[-1]
            k = i - 1
            ys.append(self.relus[k](self.bns[k](self.convs[k](z))))
        out = self.bn3(self.conv3(np.concatenate(ys, axis=1)))
        if self.se is not None:
            out = self.se(out)
        return self.relu_out(out + x)

    def backward(self, grad):
        g_sum = self.relu_out.backward(grad)
        g = self.se.backward(g_sum) if self.se is not None else g_sum
        g = self.conv3.backward(self.bn3.backward(g))
        w = self.width // self.scale
        g_ys = [g[:, i * w:(i + 1) * w] for i in range(self.scale)]
        g_xs = [None] * self.scale
        carry = None
        for i in range(self.scale - 1, 0, -1):
            gy = g_ys[i] if carry is None else g_ys[i] + carry
            k = i - 1
            gz = self.convs[k].backward(self.bns[k].backward(self.relus[k].backward(gy)))
            g_xs[i] = gz
            carry = gz if i > 1 else None
        g_xs[0] = g_ys[0]
        g_mid = np.concatenate(g_xs, axis=1)
        g_in = self.conv1.backward(self.bn1.backward(self.relu1.backward(g_mid)))
        return g_in + g_sum
