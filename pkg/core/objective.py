"""
Training Objective
==================

Total loss of a network with SCEF layers::

    total = task_loss
          + sum_l lambda1_l * sum_i ||U^(i)T U^(i) - I||      (Phi1)
          + lambda2        * sum_{l,i,j} ||a_j^(i)||_2         (Phi2)

with ``lambda1_l = lambda1_base * r_l``.  Sums run over channels without
averaging.  The Phi1 matrix norm is the spectral norm by default (Frobenius
available); its gradient uses the top eigenpair of the symmetric defect.
Phi2 uses the subgradient 0 at ``a_j^(i) = 0``.

The task loss is softmax cross-entropy (:func:`softmax_cross_entropy`).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .layers.scef import ScefParams

PHI1_NORMS = ("spectral", "frobenius")


@dataclass(frozen=True)
class RegWeights:
    """Regularisation multipliers and switches."""

    lambda1_base: float = 0.0001
    lambda2: float = 0.0001
    phi1_norm: str = "spectral"
    phi1_enabled: bool = True
    phi2_enabled: bool = True

    def __post_init__(self) -> None:
        for name in ("lambda1_base", "lambda2"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1), got {value}")
        if self.phi1_norm not in PHI1_NORMS:
            raise ParameterError(f"phi1_norm must be one of {PHI1_NORMS}, got {self.phi1_norm!r}")

    def lambda1_for(self, r: int) -> float:
        return self.lambda1_base * r

    @classmethod
    def from_dict(cls, data: dict) -> "RegWeights":
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LossBreakdown:
    task_loss: float
    phi1_total: float
    phi2_total: float
    total: float


# ---------------------------------------------------------------------------
# Regularisers
# ---------------------------------------------------------------------------

def _defect(params: ScefParams):
    flat = params.eigen_filters.reshape(params.c_in, params.r, params.K)
    return flat, np.matmul(flat, flat.transpose(0, 2, 1)) - np.eye(params.r)


def phi1(params: ScefParams, lambda1: float, norm: str = "spectral"):
    """``lambda1 * sum_i ||U^(i)T U^(i) - I||`` and its gradient w.r.t. eigen-filters."""
    flat, defect = _defect(params)
    if norm == "spectral":
        evals, evecs = np.linalg.eigh(defect)
        top = np.argmax(np.abs(evals), axis=1)
        lam = np.take_along_axis(evals, top[:, None], axis=1)[:, 0]
        vec = np.take_along_axis(evecs, top[:, None, None], axis=2)[:, :, 0]
        norms = np.abs(lam)
        outer = np.sign(lam)[:, None, None] * vec[:, :, None] * vec[:, None, :]
        grad_flat = 2.0 * lambda1 * np.matmul(outer, flat)
    elif norm == "frobenius":
        norms = np.sqrt(np.einsum("ijk,ijk->i", defect, defect))
        safe = np.where(norms > 0.0, norms, 1.0)
        scaled = np.where(norms[:, None, None] > 0.0, defect / safe[:, None, None], 0.0)
        grad_flat = 2.0 * lambda1 * np.matmul(scaled, flat)
    else:
        raise ParameterError(f"unknown Phi1 norm {norm!r}; use one of {PHI1_NORMS}")
    value = lambda1 * float(np.sum(norms))
    return value, grad_flat.reshape(params.eigen_filters.shape)


def phi2(params: ScefParams, lambda2: float):
    """``lambda2 * sum_{i,j} ||a_j^(i)||_2`` and its (sub)gradient w.r.t. coefficients."""
    a = params.coefficients
    norms = np.sqrt(np.einsum("ijk,ijk->ij", a, a))
    safe = np.where(norms > 0.0, norms, 1.0)
    grad = np.where(norms[:, :, None] > 0.0, a / safe[:, :, None], 0.0) * lambda2
    return lambda2 * float(np.sum(norms)), grad


def regularization(layers: list[ScefParams], weights: RegWeights):
    """Phi1 / Phi2 totals plus per-layer gradient dicts (``eigen_filters`` / ``coefficients``)."""
    phi1_total = 0.0
    phi2_total = 0.0
    grads = []
    for params in layers:
        layer_grads = {
            "eigen_filters": np.zeros_like(params.eigen_filters),
            "coefficients": np.zeros_like(params.coefficients),
        }
        if weights.phi1_enabled:
            value, grad_u = phi1(params, weights.lambda1_for(params.r), weights.phi1_norm)
            phi1_total += value
            layer_grads["eigen_filters"] = grad_u
        if weights.phi2_enabled:
            value, grad_a = phi2(params, weights.lambda2)
            phi2_total += value
            layer_grads["coefficients"] = grad_a
        grads.append(layer_grads)
    return phi1_total, phi2_total, grads


def total_loss(task: float, layers: list[ScefParams], weights: RegWeights) -> LossBreakdown:
    phi1_total, phi2_total, _ = regularization(layers, weights)
    return LossBreakdown(
        task_loss=float(task),
        phi1_total=phi1_total,
        phi2_total=phi2_total,
        total=float(task) + phi1_total + phi2_total,
    )


# ---------------------------------------------------------------------------
# Task loss
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy, its gradient w.r.t. logits, and the number correct."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise DimensionError(f"logits {z.shape} and labels {y.shape} disagree")
    n = z.shape[0]
    shifted = z - z.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -float(log_probs[rows, y].mean())
    grad = np.exp(log_probs)
    grad[rows, y] -= 1.0
    correct = int(np.sum(np.argmax(z, axis=1) == y))
    return loss, grad / n, correct


__all__ = [
    "RegWeights",
    "LossBreakdown",
    "PHI1_NORMS",
    "phi1",
    "phi2",
    "regularization",
    "total_loss",
    "softmax_cross_entropy",
]
