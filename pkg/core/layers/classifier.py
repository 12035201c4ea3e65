"""
Activation, Pooling and Dense Classifier Layers
===============================================

The non-convolutional building blocks of a network: ReLU after each conv
block, 2-D max pooling, global average pooling, and the dense classifier
(the only layer that carries a bias).
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, ParameterError
from .base import Layer, LayerGrads


class ReluLayer(Layer):
    """Element-wise ``max(0, x)``."""

    kind = "relu"

    def forward(self, x):
        self._input = np.asarray(x, dtype=np.float64)
        return np.maximum(self._input, 0.0)

    def backward(self, upstream):
        return np.where(self._cached_input() > 0.0, upstream, 0.0)


class MaxPoolLayer(Layer):
    """Non-overlapping ``size x size`` max pooling; trailing rows/cols are dropped."""

    kind = "pool"

    def __init__(self, size: int = 2) -> None:
        super().__init__()
        if size < 1:
            raise ParameterError(f"pool size must be >= 1, got {size}")
        self.size = size
        self._argmax: np.ndarray | None = None

    def _blocks(self, x: np.ndarray) -> np.ndarray:
        n, c, height, width = x.shape
        k = self.size
        oh, ow = height // k, width // k
        if oh == 0 or ow == 0:
            raise DimensionError(f"max pool {k}x{k} collapses a {height}x{width} map")
        crop = x[:, :, : oh * k, : ow * k]
        return crop.reshape(n, c, oh, k, ow, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, k * k)

    def forward(self, x):
        self._input = np.asarray(x, dtype=np.float64)
        blocks = self._blocks(self._input)
        self._argmax = np.argmax(blocks, axis=-1)
        return np.take_along_axis(blocks, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, upstream):
        x = self._cached_input()
        n, c, height, width = x.shape
        k = self.size
        oh, ow = upstream.shape[2:]
        grad_blocks = np.zeros((n, c, oh, ow, k * k))
        np.put_along_axis(grad_blocks, self._argmax[..., None], upstream[..., None], axis=-1)
        grad = grad_blocks.reshape(n, c, oh, ow, k, k).transpose(0, 1, 2, 4, 3, 5)
        grad_x = np.zeros_like(x)
        grad_x[:, :, : oh * k, : ow * k] = grad.reshape(n, c, oh * k, ow * k)
        return grad_x

    def output_shape(self, in_shape):
        c, height, width = in_shape
        if height // self.size == 0 or width // self.size == 0:
            raise DimensionError(f"max pool {self.size} collapses a {height}x{width} map")
        return (c, height // self.size, width // self.size)


class GlobalAvgPoolLayer(Layer):
    """Mean over the spatial axes; output shape ``(N, C)``."""

    kind = "pool"

    def forward(self, x):
        self._input = np.asarray(x, dtype=np.float64)
        return self._input.mean(axis=(2, 3))

    def backward(self, upstream):
        x = self._cached_input()
        scale = 1.0 / (x.shape[2] * x.shape[3])
        return np.broadcast_to(upstream[:, :, None, None] * scale, x.shape).copy()

    def output_shape(self, in_shape):
        return (in_shape[0], 1, 1)


class DenseLayer(Layer):
    """Fully connected layer ``y = x W^T + b`` on flattened features."""

    kind = "dense"

    def __init__(self, weight: np.ndarray, bias: np.ndarray) -> None:
        super().__init__()
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(
                f"dense weight {self.weight.shape} and bias {self.bias.shape} disagree"
            )
        self._in_shape: tuple = ()

    @classmethod
    def initialize(cls, c_in: int, c_out: int, seed: int) -> "DenseLayer":
        rng = np.random.default_rng(seed)
        weight = rng.normal(0.0, math.sqrt(1.0 / c_in), size=(c_out, c_in))
        return cls(weight, np.zeros(c_out))

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._in_shape = x.shape
        self._input = x.reshape(x.shape[0], -1)
        if self._input.shape[1] != self.weight.shape[1]:
            raise DimensionError(
                f"dense expects {self.weight.shape[1]} features, got {self._input.shape[1]}"
            )
        return self._input @ self.weight.T + self.bias

    def backward(self, upstream):
        x = self._cached_input()
        self.grads = LayerGrads(weight=upstream.T @ x, bias=upstream.sum(axis=0))
        return (upstream @ self.weight).reshape(self._in_shape)

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def output_shape(self, in_shape):
        return (self.weight.shape[0], 1, 1)
