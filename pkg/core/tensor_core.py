"""
Tensor Core - Convolution Kernels and Small-Matrix Linear Algebra
=================================================================

Dense tensors in this package are plain ``numpy`` arrays in 64-bit floating
point with the layout ``(batch, channels, height, width)``.  This module
provides everything the layers, the redundancy analysis and the compressor
share:

* 2-D cross-correlation (``conv2d``) and its per-channel variant
  (``depthwise_conv``), with exact backward kernels
* column-major filter vectorisation (``vectorize_filter``) and the
  per-input-channel analysis matrix (``channel_matrix``)
* a deterministic cyclic one-sided Jacobi SVD for small matrices
  (``small_svd``)
* spectral and max-abs norms

Padding conventions
-------------------
``"valid"`` uses no padding.  ``"same"`` zero-pads so that the output has
``floor(H / stride)`` rows (and likewise for columns); when the total padding
is odd the extra pixel goes to the bottom / right.

Every function is a pure function of its inputs and runs serially, so equal
input bytes always give equal output bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NumericError, ParameterError

Tensor4 = np.ndarray

PADDING_MODES = ("valid", "same")

# Jacobi sweeps run over pairs of the shorter side; the longer side is only a vector length
MAX_SVD_SIDE = 64
JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 60


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilterBank:
    """A dense Conv2D filter bank ``weights[j, i] = w_j^(i)``.

    ``weights`` has shape ``(c_out, c_in, h, h)`` with ``h`` odd.
    """

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 4:
            raise DimensionError(f"filter bank must be 4-D, got shape {w.shape}")
        if 0 in w.shape:
            raise DimensionError(f"filter bank has an empty dimension: {w.shape}")
        if w.shape[2] != w.shape[3]:
            raise DimensionError(f"filters must be square, got {w.shape[2:]}")
        if w.shape[2] % 2 == 0:
            raise DimensionError(f"filter size must be odd, got h={w.shape[2]}")
        object.__setattr__(self, "weights", w)

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def h(self) -> int:
        return self.weights.shape[2]

    @property
    def K(self) -> int:  # pylint: disable=invalid-name
        return self.h * self.h


@dataclass(frozen=True, eq=False)
class SvdResult:
    """Thin SVD ``m = left @ diag(singular) @ right.T`` with ``p = min(K, c)``."""

    left: np.ndarray
    singular: np.ndarray
    right: np.ndarray

    @property
    def p(self) -> int:
        return self.singular.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular) @ self.right.T


def as_tensor4(x, name: str = "input") -> np.ndarray:
    """Validate *x* as a non-empty 4-D tensor and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise DimensionError(f"{name} must be 4-D (batch, channels, H, W), got {arr.shape}")
    if 0 in arr.shape:
        raise DimensionError(f"{name} has zero size: {arr.shape}")
    return arr


def _as_weights(filters) -> np.ndarray:
    if isinstance(filters, FilterBank):
        return filters.weights
    return FilterBank(filters).weights


# ---------------------------------------------------------------------------
# Padding / window geometry
# ---------------------------------------------------------------------------

def same_padding(size: int, h: int, stride: int) -> tuple[int, int]:
    """Return ``(before, after)`` zero padding for ``"same"`` mode."""
    out = size // stride
    if out == 0:
        raise DimensionError(f"spatial size {size} collapses to 0 with stride {stride}")
    total = max((out - 1) * stride + h - size, 0)
    before = total // 2
    return before, total - before


def output_size(size: int, h: int, stride: int, padding: str) -> int:
    """Spatial output length of a convolution along one axis."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    if padding == "same":
        out = size // stride
    elif padding == "valid":
        out = (size - h) // stride + 1 if size >= h else 0
    else:
        raise ParameterError(f"padding must be one of {PADDING_MODES}, got {padding!r}")
    if out <= 0:
        raise DimensionError(
            f"spatial size {size} too small for h={h}, stride={stride}, padding={padding}"
        )
    return out


class _Geometry:
    """Padding and output extent of one convolution call."""

    def __init__(self, shape, h: int, stride: int, padding: str) -> None:
        _, _, height, width = shape
        self.h = h
        self.stride = stride
        self.height = height
        self.width = width
        self.out_h = output_size(height, h, stride, padding)
        self.out_w = output_size(width, h, stride, padding)
        if padding == "same":
            self.pad_h = same_padding(height, h, stride)
            self.pad_w = same_padding(width, h, stride)
        else:
            self.pad_h = (0, 0)
            self.pad_w = (0, 0)

    def pad(self, x: np.ndarray) -> np.ndarray:
        if self.pad_h == (0, 0) and self.pad_w == (0, 0):
            return x
        return np.pad(x, ((0, 0), (0, 0), self.pad_h, self.pad_w))

    def windows(self, xp: np.ndarray) -> np.ndarray:
        """View of shape ``(N, C, out_h, out_w, h, h)``."""
        s = self.stride
        win = sliding_window_view(xp, (self.h, self.h), axis=(2, 3))[:, :, ::s, ::s]
        return win[:, :, : self.out_h, : self.out_w]

    def col2im(self, dwin: np.ndarray, padded_shape) -> np.ndarray:
        """Scatter-add window gradients ``(N, C, oh, ow, h, h)`` back to the input."""
        s = self.stride
        dxp = np.zeros(padded_shape, dtype=np.float64)
        span_h = s * self.out_h
        span_w = s * self.out_w
        for a in range(self.h):
            for b in range(self.h):
                dxp[:, :, a : a + span_h : s, b : b + span_w : s] += dwin[..., a, b]
        top, left = self.pad_h[0], self.pad_w[0]
        return dxp[:, :, top : top + self.height, left : left + self.width]


def _check_stride(stride: int) -> None:
    if int(stride) != stride or stride < 1:
        raise ParameterError(f"stride must be a positive integer, got {stride}")


# ---------------------------------------------------------------------------
# Convolutions
# ---------------------------------------------------------------------------

def conv2d(input, filters, stride: int = 1, padding: str = "valid") -> Tensor4:
    """Multi-channel 2-D cross-correlation (no kernel flip).

    ``out[n, j] = sum_i input[n, i] (*) filters[j, i]``.
    """
    x = as_tensor4(input)
    w = _as_weights(filters)
    _check_stride(stride)
    if x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"input has {x.shape[1]} channels but filters expect c_in={w.shape[1]}"
        )
    geo = _Geometry(x.shape, w.shape[2], stride, padding)
    win = geo.windows(geo.pad(x))
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward_kernel(input, filters, upstream, stride: int = 1, padding: str = "valid"):
    """Gradients of :func:`conv2d` w.r.t. input and filters.

    Returns ``(grad_input, grad_filters)``.
    """
    x = as_tensor4(input)
    w = _as_weights(filters)
    _check_stride(stride)
    if x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"input has {x.shape[1]} channels but filters expect c_in={w.shape[1]}"
        )
    geo = _Geometry(x.shape, w.shape[2], stride, padding)
    xp = geo.pad(x)
    win = geo.windows(xp)
    g = as_tensor4(upstream, "upstream gradient")
    expected = (x.shape[0], w.shape[0], geo.out_h, geo.out_w)
    if g.shape != expected:
        raise DimensionError(f"upstream gradient shape {g.shape} != forward output {expected}")

    grad_w = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
    dwin = np.tensordot(g, w, axes=([1], [0]))  # (N, oh, ow, C, h, h)
    grad_x = geo.col2im(dwin.transpose(0, 3, 1, 2, 4, 5), xp.shape)
    return np.ascontiguousarray(grad_x), np.ascontiguousarray(grad_w)


def _check_depthwise(x: np.ndarray, f: np.ndarray) -> None:
    if f.ndim != 4 or f.shape[2] != f.shape[3] or 0 in f.shape:
        raise DimensionError(f"per-channel filters must be (c_in, r, h, h), got {f.shape}")
    if f.shape[0] != x.shape[1]:
        raise DimensionError(
            f"input has {x.shape[1]} channels but per-channel filters have {f.shape[0]}"
        )


def depthwise_conv(input, per_channel_filters, stride: int = 1, padding: str = "valid") -> Tensor4:
    """Per-channel cross-correlation with ``r`` filters per input channel.

    Output channel ``i * r + k`` is input channel ``i`` correlated with
    ``per_channel_filters[i, k]``.
    """
    x = as_tensor4(input)
    f = np.asarray(per_channel_filters, dtype=np.float64)
    _check_stride(stride)
    _check_depthwise(x, f)
    n, c = x.shape[:2]
    r, h = f.shape[1], f.shape[2]
    geo = _Geometry(x.shape, h, stride, padding)
    win = geo.windows(geo.pad(x)).reshape(n, c, geo.out_h * geo.out_w, h * h)
    out = np.matmul(win, f.reshape(c, r, h * h).transpose(0, 2, 1)[None])  # (N, C, P, r)
    out = out.transpose(0, 1, 3, 2).reshape(n, c * r, geo.out_h, geo.out_w)
    return np.ascontiguousarray(out)


def depthwise_backward_kernel(input, per_channel_filters, upstream, stride: int = 1, padding: str = "valid"):
    """Gradients of :func:`depthwise_conv`; returns ``(grad_input, grad_filters)``."""
    x = as_tensor4(input)
    f = np.asarray(per_channel_filters, dtype=np.float64)
    _check_stride(stride)
    _check_depthwise(x, f)
    n, c = x.shape[:2]
    r, h = f.shape[1], f.shape[2]
    geo = _Geometry(x.shape, h, stride, padding)
    xp = geo.pad(x)
    p = geo.out_h * geo.out_w
    g = as_tensor4(upstream, "upstream gradient")
    if g.shape != (n, c * r, geo.out_h, geo.out_w):
        raise DimensionError(
            f"upstream gradient shape {g.shape} != forward output {(n, c * r, geo.out_h, geo.out_w)}"
        )
    g = g.reshape(n, c, r, p)
    win = geo.windows(xp).reshape(n, c, p, h * h)

    grad_f = np.matmul(g, win).sum(axis=0).reshape(c, r, h, h)
    dwin = np.matmul(g.transpose(0, 1, 3, 2), f.reshape(c, r, h * h)[None])  # (N, C, P, K)
    dwin = dwin.reshape(n, c, geo.out_h, geo.out_w, h, h)
    grad_x = geo.col2im(dwin, xp.shape)
    return np.ascontiguousarray(grad_x), np.ascontiguousarray(grad_f)


# ---------------------------------------------------------------------------
# Vectorisation
# ---------------------------------------------------------------------------

def vectorize_filter(w) -> np.ndarray:
    """Column-major ``vec(w)``: ``[[1, 2], [3, 4]] -> [1, 3, 2, 4]``."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"filter must be a matrix, got shape {w.shape}")
    return w.reshape(-1, order="F")


def unvectorize_filter(v, h: int) -> np.ndarray:
    """Inverse of :func:`vectorize_filter` for an ``h x h`` filter."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (h * h,):
        raise DimensionError(f"expected a length-{h * h} vector, got {v.shape}")
    return v.reshape((h, h), order="F")


def channel_matrix(bank: FilterBank | np.ndarray, i: int) -> np.ndarray:
    """``K x c_out`` matrix whose column ``j`` is ``vec(w_j^(i))``."""
    w = _as_weights(bank)
    c_out, c_in, h, _ = w.shape
    if not 0 <= i < c_in:
        raise DimensionError(f"input channel {i} out of range for c_in={c_in}")
    return w[:, i].transpose(0, 2, 1).reshape(c_out, h * h).T.copy()


# ---------------------------------------------------------------------------
# Small-matrix SVD (cyclic one-sided Jacobi)
# ---------------------------------------------------------------------------

def _jacobi_sweeps(cols: np.ndarray, vcols: np.ndarray | None) -> None:
    """Orthogonalise the rows of *cols* in place, mirroring rotations in *vcols*."""
    n = cols.shape[0]
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(cols[p] @ cols[p])
                beta = float(cols[q] @ cols[q])
                if alpha == 0.0 or beta == 0.0:
                    continue
                gamma = float(cols[p] @ cols[q])
                if abs(gamma) <= JACOBI_TOLERANCE * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                cp = cols[p].copy()
                cols[p] = c * cp - s * cols[q]
                cols[q] = s * cp + c * cols[q]
                if vcols is not None:
                    vp = vcols[p].copy()
                    vcols[p] = c * vp - s * vcols[q]
                    vcols[q] = s * vp + c * vcols[q]
        if not rotated:
            return


def _prepare_svd_input(m) -> np.ndarray:
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or 0 in a.shape:
        raise DimensionError(f"small_svd expects a non-empty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("small_svd input contains non-finite entries")
    if min(a.shape) > MAX_SVD_SIDE:
        raise ParameterError(
            f"small_svd needs min(K, c) <= {MAX_SVD_SIDE}, got shape {a.shape}"
        )
    return a


def _complete_columns(basis: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Fill the columns flagged in *missing* with unit vectors orthogonal to the rest."""
    length = basis.shape[0]
    done = [basis[:, k] for k in range(basis.shape[1]) if not missing[k]]
    candidates = iter(np.eye(length))
    for k in np.flatnonzero(missing):
        while True:
            v = next(candidates).copy()
            for _ in range(2):
                for u in done:
                    v -= (u @ v) * u
            norm = np.linalg.norm(v)
            if norm > 0.5:
                break
        v /= norm
        basis[:, k] = v
        done.append(v)
    return basis


def small_svd(m) -> SvdResult:
    """Deterministic thin SVD of a ``K x c`` matrix with ``min(K, c) <= 64``.

    Cyclic one-sided Jacobi (row-cyclic pair order, at most 60 sweeps,
    rotation threshold 1e-12 on the normalised off-diagonal Gram entry).
    Singular values are returned in descending order; in every left singular
    vector the entry of largest magnitude (lowest index on ties) is
    non-negative.
    """
    a = _prepare_svd_input(m)
    k_rows, c_cols = a.shape
    wide = k_rows < c_cols
    cols = (a if wide else a.T).copy()
    n, length = cols.shape
    vcols = np.eye(n)
    _jacobi_sweeps(cols, vcols)

    sigma = np.sqrt(np.einsum("ij,ij->i", cols, cols))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    cols = cols[order]
    vcols = vcols[order]

    cutoff = sigma[0] * max(k_rows, c_cols) * np.finfo(np.float64).eps
    null = sigma <= cutoff
    sigma[null] = 0.0
    u = np.zeros((length, n))
    live = ~null
    u[:, live] = (cols[live] / sigma[live, None]).T
    if null.any():
        u = _complete_columns(u, null)
    v = vcols.T.copy()

    left, right = (v, u) if wide else (u, v)
    for k in range(n):
        pivot = int(np.argmax(np.abs(left[:, k])))
        if left[pivot, k] < 0:
            left[:, k] = -left[:, k]
            right[:, k] = -right[:, k]
    return SvdResult(left=left, singular=sigma, right=right)


def singular_values(m) -> np.ndarray:
    """Singular values only (same sweeps as :func:`small_svd`), descending."""
    a = _prepare_svd_input(m)
    cols = (a if a.shape[0] < a.shape[1] else a.T).copy()
    _jacobi_sweeps(cols, None)
    sigma = np.sqrt(np.einsum("ij,ij->i", cols, cols))
    return sigma[np.argsort(-sigma, kind="stable")]


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def spectral_norm(m) -> float:
    """Largest singular value of a matrix.

    Uses the Jacobi kernel when one side is at most 64 long, otherwise power
    iteration on the Gram matrix to 1e-10 relative tolerance.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"spectral_norm expects a matrix, got shape {a.shape}")
    if a.size == 0 or not np.any(a):
        return 0.0
    if min(a.shape) <= MAX_SVD_SIDE:
        return float(singular_values(a)[0])
    gram = a.T @ a
    v = np.full(gram.shape[0], 1.0 / math.sqrt(gram.shape[0]))
    lam = 0.0
    for _ in range(100_000):
        w = gram @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= 1e-12 * new:
            lam = new
            break
        lam = new
    return math.sqrt(lam)


def inf_norm(t) -> float:
    """Maximum absolute entry; 0 for an empty or all-zero tensor."""
    arr = np.asarray(t, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


__all__ = [
    "Tensor4",
    "FilterBank",
    "SvdResult",
    "PADDING_MODES",
    "as_tensor4",
    "same_padding",
    "output_size",
    "conv2d",
    "conv2d_backward_kernel",
    "depthwise_conv",
    "depthwise_backward_kernel",
    "vectorize_filter",
    "unvectorize_filter",
    "channel_matrix",
    "small_svd",
    "singular_values",
    "spectral_norm",
    "inf_norm",
]
