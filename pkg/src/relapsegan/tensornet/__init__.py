"""Small numpy network core: layers, reverse-mode gradients, Adam, checkpoints."""
from .kernels import BACKEND
from .layers import (
    LayerSpec,
    Network,
    ShapeError,
    backward,
    conv2d,
    dense,
    flatten,
    forward,
    gradients,
    init_params,
    leaky_relu,
    relu,
    reshape,
    sigmoid,
    softmax,
    transposed_conv2d,
)
from .optim import AdamState, adam_step


__all__ = [
    "BACKEND",
    "AdamState",
    "LayerSpec",
    "Network",
    "ShapeError",
    "adam_step",
    "backward",
    "conv2d",
    "dense",
    "flatten",
    "forward",
    "gradients",
    "init_params",
    "leaky_relu",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "transposed_conv2d",
]
