from .blocks import Res2NetBlock, SEBlock
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .layers import (AdaptiveAvgPool2d, BatchNorm2d, Conv2d, GlobalAvgPool,
                     Linear, Module, Parameter, ReLU, Sequential, Sigmoid,
                     log_softmax, param_count, softmax_xent)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "AdaptiveAvgPool2d", "Adam", "AdamState", "BatchNorm2d", "Conv2d", "GlobalAvgPool",
    "Linear", "Module", "Parameter", "ReLU", "Res2NetBlock", "SEBlock", "Sequential",
    "Sigmoid", "adam_step", "grad_check", "load_checkpoint", "log_softmax", "param_count",
    "save_checkpoint", "softmax_xent",
]
