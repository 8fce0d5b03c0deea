"""Phase network, Res2Net backend and the three fusion frameworks.

Framework A feeds the magnitude map alone (1 channel). B stacks magnitude
with raw phase (2 channels). C stacks magnitude with the phase network's
output (2 channels). Channel order is always (magnitude, phase-like).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .featmap import SEGMENT_LEN
from .nn.blocks import Res2NetBlock
from .nn.layers import (DEFAULT_DTYPE, AdaptiveAvgPool2d, BatchNorm2d, Conv2d,
                        GlobalAvgPool, Linear, Module, ReLU, Sequential,
                        param_count)

A_MAGNITUDE_ONLY = "A_magnitude_only"
B_RAW_CONCAT = "B_raw_concat"
C_PHASE_NETWORK_CONCAT = "C_phase_network_concat"
FRAMEWORKS = {"a": A_MAGNITUDE_ONLY, "b": B_RAW_CONCAT, "c": C_PHASE_NETWORK_CONCAT}

# feature dimension of each pairing: (magnitude D, phase D)
PAIRING_DIMS = {"lps": (513, 513), "cqt": (108, 108), "lfcc": (60, 513)}


def framework_kind(name: str) -> str:
    key = name.lower()
    if key in FRAMEWORKS:
        return FRAMEWORKS[key]
    if name in FRAMEWORKS.values():
        return name
    raise ValueError(f"unknown framework {name!r}")


@dataclass
class PhaseNetConfig:
    stride: int = 1
    use_adaptive_pool: bool = False
    target_dim: int | None = None
    seg_len: int = SEGMENT_LEN
    # (out_channels, kernel) per conv; all but the last are followed by BN + ReLU
    ladder: list = field(default_factory=lambda: [[4, 3], [4, 3], [1, 1]])

    def __post_init__(self):
        if self.stride not in (1, 2):
            raise ValueError("phase network stride must be 1 or 2")
        if self.use_adaptive_pool and not self.target_dim:
            raise ValueError("adaptive pooling needs a target dimension")
        if self.ladder[-1][0] != 1:
            raise ValueError("phase network must end with one output channel")


def phase_config_for(pairing: str, mag_dim: int | None = None, seg_len: int = SEGMENT_LEN) -> PhaseNetConfig:
    """LFCC + DFT phase uses frequency stride 2 and pooling to the magnitude
    dimension; every other pairing uses stride 1 and no pooling."""
    if pairing == "lfcc":
        return PhaseNetConfig(2, True, mag_dim or PAIRING_DIMS["lfcc"][0], seg_len)
    if pairing in ("lps", "cqt"):
        return PhaseNetConfig(1, False, None, seg_len)
    raise ValueError(f"unknown pairing {pairing!r}")


class PhaseNetwork(Module):
    """Shallow conv stack mapping (B, 1, T, D) phase to (B, 1, T, D*).

    The stride applies to the frequency axis only so T is preserved.
    """

    def __init__(self, cfg: PhaseNetConfig, rng=None, dtype=DEFAULT_DTYPE):
        self.cfg = cfg
        layers, cin = [], 1
        for i, (cout, k) in enumerate(cfg.ladder):
            stride = (1, cfg.stride) if i == 0 else 1
            layers.append(Conv2d(cin, cout, k, stride, k // 2, rng=rng, dtype=dtype))
            if i < len(cfg.ladder) - 1:
                layers += [BatchNorm2d(cout, dtype=dtype), ReLU()]
            cin = cout
        layers[0].needs_input_grad = False
        self.body = Sequential(*layers)
        self.pool = None

    def forward(self, x):
        out = self.body(x)
        if self.cfg.use_adaptive_pool:
            if self.cfg.target_dim > out.shape[3]:
                raise ValueError(f"target dim {self.cfg.target_dim} exceeds conv output {out.shape[3]}")
            self.pool = AdaptiveAvgPool2d((out.shape[2], self.cfg.target_dim))
            out = self.pool(out)
        return out

    def backward(self, grad):
        if self.pool is not None and self.cfg.use_adaptive_pool:
            grad = self.pool.backward(grad)
        return self.body.backward(grad)


def build_phase_network(cfg: PhaseNetConfig, seed: int = 0, dtype=DEFAULT_DTYPE) -> PhaseNetwork:
    return PhaseNetwork(cfg, np.random.default_rng(seed), dtype)


@dataclass
class BackendConfig:
    preset: str = "lite"
    in_channels: int = 1
    stem_width: int = 8
    stem_stride: int = 2
    stage_widths: list = field(default_factory=lambda: [8, 16, 32])
    stage_depths: list = field(default_factory=lambda: [1, 1, 1])
    stage_strides: list = field(default_factory=lambda: [2, 2, 2])
    expansion: int = 4
    scale: int = 4
    se_reduction: int = 4
    n_classes: int = 2

    def __post_init__(self):
        if self.in_channels not in (1, 2):
            raise ValueError("backend input channels must be 1 or 2")
        if not (len(self.stage_widths) == len(self.stage_depths) == len(self.stage_strides)):
            raise ValueError("stage widths, depths and strides must align")
        if any(w < 1 or w % self.scale for w in self.stage_widths):
            raise ValueError("stage widths must be positive multiples of the res2net scale")


def backend_preset(name: str, in_channels: int = 1) -> BackendConfig:
    if name == "lite":
        return BackendConfig("lite", in_channels)
    if name == "paper_scale":
        # Res2Net50 layout (3, 4, 6, 3) with narrowed widths, ~0.84M parameters
        return BackendConfig("paper_scale", in_channels, stem_width=16, stem_stride=1,
                             stage_widths=[12, 24, 56, 112], stage_depths=[3, 4, 6, 3],
                             stage_strides=[1, 2, 2, 2], expansion=4, scale=4, se_reduction=16)
    raise ValueError(f"unknown backend preset {name!r}")


class Res2NetBackend(Module):
    def __init__(self, cfg: BackendConfig, rng=None, dtype=DEFAULT_DTYPE):
        self.cfg = cfg
        layers = [Conv2d(cfg.in_channels, cfg.stem_width, 3, cfg.stem_stride, 1, rng=rng, dtype=dtype),
                  BatchNorm2d(cfg.stem_width, dtype=dtype), ReLU()]
        cin = cfg.stem_width
        for width, depth, stride in zip(cfg.stage_widths, cfg.stage_depths, cfg.stage_strides):
            cout = width * cfg.expansion
            layers += [Conv2d(cin, cout, 1, stride, 0, rng=rng, dtype=dtype),
                       BatchNorm2d(cout, dtype=dtype), ReLU()]
            layers += [Res2NetBlock(cout, width, cfg.scale, cfg.se_reduction, rng=rng, dtype=dtype)
                       for _ in range(depth)]
            cin = cout
        layers += [GlobalAvgPool(), Linear(cin, cfg.n_classes, rng=rng, dtype=dtype)]
        self.net = Sequential(*layers)

    @property
    def stem(self) -> Conv2d:
        return self.net[0]

    def forward(self, x):
        return self.net(x)

    def backward(self, grad):
        return self.net.backward(grad)


def build_backend(cfg: BackendConfig, seed: int = 0, dtype=DEFAULT_DTYPE) -> Res2NetBackend:
    return Res2NetBackend(cfg, np.random.default_rng(seed), dtype)


class Framework(Module):
    """Backend plus the framework's phase path; forward(mag, phase) -> logits."""

    def __init__(self, kind: str, pairing: str, backend_cfg: BackendConfig,
                 phase_cfg: PhaseNetConfig | None = None, seed: int = 0,
                 dtype=DEFAULT_DTYPE, mag_dim: int | None = None, phase_dim: int | None = None):
        self.kind = framework_kind(kind)
        self.pairing = pairing
        self.mag_dim, self.phase_dim = mag_dim, phase_dim
        want = 1 if self.kind == A_MAGNITUDE_ONLY else 2
        if backend_cfg.in_channels != want:
            backend_cfg = BackendConfig(**{**asdict(backend_cfg), "in_channels": want})
        rng = np.random.default_rng(seed)
        self.phase_net = None
        if self.kind == C_PHASE_NETWORK_CONCAT:
            self.phase_net = PhaseNetwork(phase_cfg or phase_config_for(pairing, mag_dim), rng, dtype)
        self.backend = Res2NetBackend(backend_cfg, rng, dtype)
        self.backend.stem.needs_input_grad = self.kind == C_PHASE_NETWORK_CONCAT
        self._pool = None

    @property
    def uses_phase(self) -> bool:
        return self.kind != A_MAGNITUDE_ONLY

    def phase_features(self, phase):
        """Phase-like channel fed to the backend, shape (B, 1, T, D*)."""
        if self.kind == C_PHASE_NETWORK_CONCAT:
            return self.phase_net(phase)
        if self.kind == B_RAW_CONCAT:
            return phase
        raise ValueError("framework A has no phase channel")

    def forward(self, mag, phase=None):
        if mag.ndim != 4 or mag.shape[1] != 1:
            raise ValueError("magnitude batch must be (B, 1, T, D)")
        if self.kind == A_MAGNITUDE_ONLY:
            return self.backend(mag)
        if phase is None:
            raise ValueError(f"framework {self.kind} needs a phase input")
        p = self.phase_features(phase)
        if self.kind == B_RAW_CONCAT and p.shape[2:] != mag.shape[2:]:
            if self.pairing != "lfcc":
                raise ValueError(f"phase {p.shape[2:]} does not match magnitude {mag.shape[2:]}")
            self._pool = AdaptiveAvgPool2d(mag.shape[2:])
            p = self._pool(p)
        if p.shape[2:] != mag.shape[2:]:
            raise ValueError(f"phase path output {p.shape[2:]} does not match magnitude {mag.shape[2:]}")
        return self.backend(np.concatenate([mag, p.astype(mag.dtype, copy=False)], axis=1))

    def backward(self, grad):
        g = self.backend.backward(grad)
        if self.kind == C_PHASE_NETWORK_CONCAT:
            self.phase_net.backward(g[:, 1:2])
        return None

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "pairing": self.pairing,
            "backend": asdict(self.backend.cfg),
            "phase_net": asdict(self.phase_net.cfg) if self.phase_net is not None else None,
            "mag_dim": self.mag_dim,
            "phase_dim": self.phase_dim,
        }


def build_framework(kind: str, pairing: str, backend_cfg: BackendConfig | None = None,
                    seed: int = 0, dtype=DEFAULT_DTYPE, mag_dim: int | None = None,
                    phase_dim: int | None = None, phase_cfg: PhaseNetConfig | None = None,
                    seg_len: int = SEGMENT_LEN) -> Framework:
    if pairing not in PAIRING_DIMS:
        raise ValueError(f"unknown pairing {pairing!r}")
    if phase_cfg is None and framework_kind(kind) == C_PHASE_NETWORK_CONCAT:
        phase_cfg = phase_config_for(pairing, mag_dim, seg_len)
    return Framework(kind, pairing, backend_cfg or backend_preset("lite"), phase_cfg,
                     seed, dtype, mag_dim, phase_dim)


def framework_from_config(cfg: dict, seed: int = 0, dtype=DEFAULT_DTYPE) -> Framework:
    phase_cfg = PhaseNetConfig(**cfg["phase_net"]) if cfg.get("phase_net") else None
    return Framework(cfg["kind"], cfg["pairing"], BackendConfig(**cfg["backend"]), phase_cfg,
                     seed, dtype, cfg.get("mag_dim"), cfg.get("phase_dim"))


__all__ = [
    "A_MAGNITUDE_ONLY", "B_RAW_CONCAT", "BackendConfig", "C_PHASE_NETWORK_CONCAT", "Framework",
    "PhaseNetConfig", "PhaseNetwork", "Res2NetBackend", "backend_preset", "build_backend",
    "build_framework", "build_phase_network", "framework_from_config", "param_count",
    "phase_config_for",
]
