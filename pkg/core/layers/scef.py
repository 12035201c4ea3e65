"""
SCEF Layer - Separable Convolutional Eigen-Filters
==================================================

A SCEF layer expresses every filter of a Conv2D bank as a combination of
``r`` eigen-filters that are specific to its input channel::

    w_j^(i) = sum_k a[i, j, k] * u[i, k]

Parameters live in :class:`ScefParams`:

* ``eigen_filters`` - shape ``(c_in, r, h, h)``, the ``u_k^(i)``
* ``coefficients``  - shape ``(c_in, c_out, r)``, the ``a_{k,j}^(i)``
* ``frozen``        - eigen-filters excluded from training when true

The forward pass is a depthwise convolution producing ``c_in * r``
intermediate maps (channel ``i * r + k``) followed by a pointwise weighted sum.
Eigen-filter gradients are plain Euclidean gradients; orthonormality is only
encouraged through the Phi1 penalty in :mod:`core.objective`.
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
    depthwise_backward_kernel,
    depthwise_conv,
    output_size,
    small_svd,
    unvectorize_filter,
    vectorize_filter,
)
from .base import Layer, LayerGrads


@dataclass(eq=False)
class ScefParams:
    """Eigen-filters and coefficients of one SCEF layer."""

    eigen_filters: np.ndarray
    coefficients: np.ndarray
    frozen: bool = False

    def __post_init__(self) -> None:
        self.eigen_filters = np.asarray(self.eigen_filters, dtype=np.float64)
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        u, a = self.eigen_filters, self.coefficients
        if u.ndim != 4 or u.shape[2] != u.shape[3] or 0 in u.shape:
            raise DimensionError(f"eigen_filters must be (c_in, r, h, h), got {u.shape}")
        if a.ndim != 3 or 0 in a.shape:
            raise DimensionError(f"coefficients must be (c_in, c_out, r), got {a.shape}")
        if a.shape[0] != u.shape[0] or a.shape[2] != u.shape[1]:
            raise DimensionError(
                f"coefficients {a.shape} do not match eigen_filters {u.shape}"
            )
        if u.shape[2] % 2 == 0:
            raise DimensionError(f"filter size must be odd, got h={u.shape[2]}")
        if not 1 <= self.r <= self.K:
            raise ParameterError(f"rank r={self.r} outside [1, {self.K}]")

    @property
    def c_in(self) -> int:
        return self.eigen_filters.shape[0]

    @property
    def c_out(self) -> int:
        return self.coefficients.shape[1]

    @property
    def r(self) -> int:
        return self.eigen_filters.shape[1]

    @property
    def h(self) -> int:
        return self.eigen_filters.shape[2]

    @property
    def K(self) -> int:  # pylint: disable=invalid-name
        return self.h * self.h

    def basis(self, i: int) -> np.ndarray:
        """``K x r`` matrix whose columns are ``vec(u_k^(i))``."""
        return np.stack([vectorize_filter(u) for u in self.eigen_filters[i]], axis=1)

    def pointwise(self) -> np.ndarray:
        """``(c_out, c_in * r)`` matrix of the 1x1 combination stage."""
        return self.coefficients.transpose(1, 0, 2).reshape(self.c_out, self.c_in * self.r)

    def copy(self) -> "ScefParams":
        return ScefParams(self.eigen_filters.copy(), self.coefficients.copy(), self.frozen)


# ---------------------------------------------------------------------------
# Initialization (basis from the SVD of a random matrix)
# ---------------------------------------------------------------------------

def init_scef(c_in: int, c_out: int, h: int, r: int, seed: int,
              coeff_std: float | None = None, frozen: bool = False) -> ScefParams:
    """Random orthonormal eigen-filters and normal coefficients.

    For each input channel a ``K x r`` standard-normal matrix is drawn and the
    left singular vectors of its SVD become the eigen-filters.  Coefficients
    are i.i.d. normal with std ``sqrt(2 / (c_in * r))`` unless *coeff_std*
    is given.
    """
    if min(c_in, c_out, h) < 1:
        raise ParameterError(f"scef dims must be positive: c_in={c_in}, c_out={c_out}, h={h}")
    K = h * h
    if not 1 <= r <= K:
        raise ParameterError(f"rank r={r} outside [1, {K}] for h={h}")
    rng = np.random.default_rng(seed)
    eigen = np.empty((c_in, r, h, h))
    for i in range(c_in):
        basis = small_svd(rng.standard_normal((K, r))).left[:, :r]
        for k in range(r):
            eigen[i, k] = unvectorize_filter(basis[:, k], h)
    std = math.sqrt(2.0 / (c_in * r)) if coeff_std is None else coeff_std
    coefficients = rng.normal(0.0, std, size=(c_in, c_out, r))
    return ScefParams(eigen, coefficients, frozen=frozen)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def scef_forward(params: ScefParams, input, stride: int = 1, padding: str = "same") -> np.ndarray:
    """Depthwise stage (``c_in * r`` maps) then pointwise combination."""
    x = as_tensor4(input)
    if x.shape[1] != params.c_in:
        raise DimensionError(f"input has {x.shape[1]} channels, SCEF layer expects {params.c_in}")
    maps = depthwise_conv(x, params.eigen_filters, stride, padding)
    out = np.tensordot(params.pointwise(), maps, axes=([1], [1]))
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def scef_backward(params: ScefParams, input, upstream, stride: int = 1, padding: str = "same"):
    """Exact gradients; returns ``(LayerGrads, grad_input)``.

    The eigen-filter gradient is all zeros when ``params.frozen``.
    """
    x = as_tensor4(input)
    if x.shape[1] != params.c_in:
        raise DimensionError(f"input has {x.shape[1]} channels, SCEF layer expects {params.c_in}")
    maps = depthwise_conv(x, params.eigen_filters, stride, padding)
    g = as_tensor4(upstream, "upstream gradient")
    expected = (x.shape[0], params.c_out) + maps.shape[2:]
    if g.shape != expected:
        raise DimensionError(f"upstream gradient shape {g.shape} != forward output {expected}")

    grad_p = np.tensordot(g, maps, axes=([0, 2, 3], [0, 2, 3]))
    grad_a = grad_p.reshape(params.c_out, params.c_in, params.r).transpose(1, 0, 2)
    grad_maps = np.tensordot(params.pointwise(), g, axes=([0], [1])).transpose(1, 0, 2, 3)
    grad_x, grad_u = depthwise_backward_kernel(x, params.eigen_filters, grad_maps, stride, padding)
    if params.frozen:
        grad_u = np.zeros_like(params.eigen_filters)
    grads = LayerGrads(
        eigen_filters=grad_u, coefficients=np.ascontiguousarray(grad_a)
    )
    return grads, grad_x


def compose_filters(params: ScefParams) -> FilterBank:
    """Dense bank with ``w_j^(i) = sum_k a[i, j, k] u[i, k]``."""
    w = np.einsum("ijk,ikab->jiab", params.coefficients, params.eigen_filters)
    return FilterBank(w)


def project_onto_basis(eigen_filters, bank: FilterBank) -> np.ndarray:
    """Coefficients ``a_j^(i) = U^(i)T vec(w_j^(i))`` of a bank in a given basis.

    Exact reconstruction whenever ``U^(i)`` is a full orthonormal basis.
    """
    u = np.asarray(eigen_filters, dtype=np.float64)
    c_in, r, h, _ = u.shape
    if bank.c_in != c_in or bank.h != h:
        raise DimensionError(f"bank {bank.weights.shape} does not match eigen-filters {u.shape}")
    flat_u = u.reshape(c_in, r, h * h)
    flat_w = bank.weights.transpose(1, 0, 2, 3).reshape(c_in, bank.c_out, h * h)
    return np.matmul(flat_w, flat_u.transpose(0, 2, 1))


def orthonormality_defect(params: ScefParams, norm: str = "frobenius") -> np.ndarray:
    """Per-channel ``||U^(i)T U^(i) - I||`` (``"frobenius"`` or ``"spectral"``)."""
    flat = params.eigen_filters.reshape(params.c_in, params.r, params.K)
    defect = np.matmul(flat, flat.transpose(0, 2, 1)) - np.eye(params.r)
    if norm == "frobenius":
        return np.sqrt(np.einsum("ijk,ijk->i", defect, defect))
    if norm == "spectral":
        return np.max(np.abs(np.linalg.eigvalsh(defect)), axis=1)
    raise ParameterError(f"unknown norm {norm!r}; use 'spectral' or 'frobenius'")


class ScefLayer(Layer):
    """Stateful wrapper around :class:`ScefParams` with stride and padding."""

    kind = "scef"

    def __init__(self, params: ScefParams, stride: int = 1, padding: str = "same") -> None:
        super().__init__()
        if padding not in PADDING_MODES:
            raise ParameterError(f"padding must be one of {PADDING_MODES}")
        self.params = params
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        self._input = as_tensor4(x)
        return scef_forward(self.params, self._input, self.stride, self.padding)

    def backward(self, upstream):
        self.grads, grad_x = scef_backward(
            self.params, self._cached_input(), upstream, self.stride, self.padding
        )
        return grad_x

    def parameters(self):
        return {
            "eigen_filters": self.params.eigen_filters,
            "coefficients": self.params.coefficients,
        }

    def trainable_names(self):
        if self.params.frozen:
            return ("coefficients",)
        return ("eigen_filters", "coefficients")

    def output_shape(self, in_shape):
        c, height, width = in_shape
        if c != self.params.c_in:
            raise DimensionError(f"scef expects {self.params.c_in} channels, got {c}")
        h = self.params.h
        return (
            self.params.c_out,
            output_size(height, h, self.stride, self.padding),
            output_size(width, h, self.stride, self.padding),
        )
