"""From-scratch float64 numeric kernel: tensors, layers, Adam, grad checks, weight I/O."""

from .tensor import as_tensor4, check_tensor4, require_finite, zeros
from .layers import (
    NORM_EPS,
    LEAKY_SLOPE,
    INIT_STD,
    Layer,
    Conv2d,
    ConvTranspose2d,
    InstanceNorm2d,
    ReLU,
    LeakyReLU,
    Tanh,
    Sequential,
    im2col,
    col2im,
    conv_output_hw,
)
from .optim import AdamState, adam_step
from .gradcheck import grad_check
from .weightio import save_weights, load_weights

__all__ = [
    "as_tensor4", "check_tensor4", "require_finite", "zeros",
    "NORM_EPS", "LEAKY_SLOPE", "INIT_STD",
    "Layer", "Conv2d", "ConvTranspose2d", "InstanceNorm2d", "ReLU", "LeakyReLU",
    "Tanh", "Sequential", "im2col", "col2im", "conv_output_hw",
    "AdamState", "adam_step", "grad_check", "save_weights", "load_weights",
]
