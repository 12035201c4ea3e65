"""
Conv2D Baseline Layer
=====================

The plain convolution layer (``c_in * c_out * h^2`` trainable weights, no
bias) that SCEF layers replace.  Forward is :func:`core.tensor_core.conv2d`;
the backward pass returns exact gradients for the weights and the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ParameterError
from ..tensor_core import (
    FilterBank,
    PADDING_MODES,
    as_tensor4,
    conv2d,
    conv2d_backward_kernel,
    output_size,
)
from .base import Layer, LayerGrads


@dataclass(eq=False)
class Conv2dParams:
    """A Conv2D layer: its filter bank plus stride and padding."""

    bank: FilterBank
    stride: int = 1
    padding: str = "same"

    def __post_init__(self) -> None:
        if not isinstance(self.bank, FilterBank):
            self.bank = FilterBank(self.bank)
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        if self.padding not in PADDING_MODES:
            raise ParameterError(f"padding must be one of {PADDING_MODES}")


def init_conv2d(c_in: int, c_out: int, h: int, seed: int, stride: int = 1,
                padding: str = "same", std: float | None = None) -> Conv2dParams:
    """Scaled normal init, std ``sqrt(2 / (c_in * h^2))`` unless given."""
    if min(c_in, c_out, h) < 1:
        raise ParameterError(f"conv2d dims must be positive: c_in={c_in}, c_out={c_out}, h={h}")
    scale = math.sqrt(2.0 / (c_in * h * h)) if std is None else std
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, scale, size=(c_out, c_in, h, h))
    return Conv2dParams(FilterBank(weights), stride=stride, padding=padding)


def conv2d_forward(params: Conv2dParams, input) -> np.ndarray:
    return conv2d(input, params.bank, params.stride, params.padding)


def conv2d_backward(params: Conv2dParams, input, upstream):
    """Returns ``(LayerGrads(weight=...), grad_input)``."""
    grad_x, grad_w = conv2d_backward_kernel(
        input, params.bank, upstream, params.stride, params.padding
    )
    return LayerGrads(weight=grad_w), grad_x


class Conv2dLayer(Layer):
    """Stateful wrapper around :class:`Conv2dParams`."""

    kind = "conv2d"

    def __init__(self, params: Conv2dParams) -> None:
        super().__init__()
        self.params = params

    def forward(self, x):
        self._input = as_tensor4(x)
        return conv2d_forward(self.params, self._input)

    def backward(self, upstream):
        self.grads, grad_x = conv2d_backward(self.params, self._cached_input(), upstream)
        return grad_x

    def parameters(self):
        return {"weight": self.params.bank.weights}

    def output_shape(self, in_shape):
        c, height, width = in_shape
        if c != self.params.bank.c_in:
            raise DimensionError(f"conv2d expects {self.params.bank.c_in} channels, got {c}")
        h, s, pad = self.params.bank.h, self.params.stride, self.params.padding
        return (
            self.params.bank.c_out,
            output_size(height, h, s, pad),
            output_size(width, h, s, pad),
        )
