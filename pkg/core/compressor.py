"""
Conv2D to SCEF Compression
==========================

Converts trained Conv2D filter banks into SCEF layers by truncated SVD of
each input channel's analysis matrix: the top ``r`` left singular vectors
become the eigen-filters and the projections ``a_j^(i) = U^(i)T vec(w_j^(i))``
become the coefficients.  Per channel this is the best rank-``r``
approximation, so the reconstruction error equals the singular-value tail
``sqrt(sum_{k>r} sigma_k^2)``.

Ranks per layer come from an explicit value, a rank-decay schedule, or an
error budget (smallest ``r`` whose relative error fits).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import structlog

from .checkpoint import Checkpoint
from .complexity import count_flops, count_params
from .errors import DimensionError, ParameterError, UsageError
from .layers.scef import ScefParams, compose_filters
from .schedules import RankSchedule, rank_at_depth
from .tensor_core import FilterBank, channel_matrix, singular_values, small_svd, unvectorize_filter

log = structlog.get_logger(__name__)

METHOD = "svd-truncation"
BUDGET_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CompressionReport:
    per_channel_error: np.ndarray
    total_error: float
    rank_used: int
    params_before: int
    params_after: int
    flops_before: int | None = None
    flops_after: int | None = None
    relative_error: float = 0.0
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "method": METHOD,
            "name": self.name,
            "rank_used": self.rank_used,
            "per_channel_error": self.per_channel_error.tolist(),
            "total_error": self.total_error,
            "relative_error": self.relative_error,
            "params_before": self.params_before,
            "params_after": self.params_after,
            "flops_before": self.flops_before,
            "flops_after": self.flops_after,
        }


def _as_bank(bank) -> FilterBank:
    return bank if isinstance(bank, FilterBank) else FilterBank(bank)


def reconstruction_error(original: FilterBank, compressed: ScefParams) -> tuple[np.ndarray, float]:
    """Per-channel and total Frobenius norm of ``original - compose(compressed)``."""
    original = _as_bank(original)
    composed = compose_filters(compressed)
    if composed.weights.shape != original.weights.shape:
        raise DimensionError(
            f"compressed layer composes to {composed.weights.shape}, original is {original.weights.shape}"
        )
    diff = original.weights - composed.weights
    per_channel = np.sqrt(np.einsum("jiab,jiab->i", diff, diff))
    return per_channel, float(np.sqrt(np.sum(per_channel**2)))


def compress_conv_to_scef(bank: FilterBank, r: int, frozen: bool = False,
                          input_hw: tuple[int, int] | None = None, stride: int = 1,
                          name: str = "") -> tuple[ScefParams, CompressionReport]:
    """Rank-``r`` SCEF layer closest to *bank*, channel by channel."""
    bank = _as_bank(bank)
    p = min(bank.K, bank.c_out)
    if not 1 <= r <= p:
        raise ParameterError(f"rank {r} outside [1, {p}] (min(K, c_out))")
    eigen = np.empty((bank.c_in, r, bank.h, bank.h))
    coefficients = np.empty((bank.c_in, bank.c_out, r))
    for i in range(bank.c_in):
        m = channel_matrix(bank, i)
        basis = small_svd(m).left[:, :r]
        coefficients[i] = (basis.T @ m).T
        for k in range(r):
            eigen[i, k] = unvectorize_filter(basis[:, k], bank.h)
    params = ScefParams(eigen, coefficients, frozen=frozen)

    per_channel, total = reconstruction_error(bank, params)
    norm = float(np.linalg.norm(bank.weights))
    flops_before = flops_after = None
    if input_hw is not None:
        height, width = input_hw
        flops_before = count_flops("conv2d", height, width, stride, bank.c_in, bank.c_out, bank.h)
        flops_after = count_flops("scef", height, width, stride, bank.c_in, bank.c_out, bank.h, r)
    report = CompressionReport(
        per_channel_error=per_channel,
        total_error=total,
        rank_used=r,
        params_before=count_params("conv2d", bank.c_in, bank.c_out, bank.h),
        params_after=count_params("scef", bank.c_in, bank.c_out, bank.h, r, frozen),
        flops_before=flops_before,
        flops_after=flops_after,
        relative_error=total / norm if norm > 0.0 else 0.0,
        name=name,
    )
    return params, report


def select_rank_for_budget(bank: FilterBank, budget: float) -> int:
    """Smallest ``r`` whose relative total reconstruction error is ``<= budget``."""
    bank = _as_bank(bank)
    if not 0.0 <= budget <= 1.0:
        raise ParameterError(f"error budget must lie in [0, 1], got {budget}")
    p = min(bank.K, bank.c_out)
    energy = np.zeros(p)
    for i in range(bank.c_in):
        energy += singular_values(channel_matrix(bank, i)) ** 2
    total = float(energy.sum())
    if total == 0.0:
        return 1
    for r in range(1, p + 1):
        tail = float(energy[r:].sum())
        if np.sqrt(tail / total) <= budget + BUDGET_TOLERANCE:
            return r
    return p


# ---------------------------------------------------------------------------
# Whole checkpoints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompressionMode:
    """Exactly one of an explicit rank, a rank-decay kind or an error budget."""

    rank: int | None = None
    rank_decay: str | None = None
    error_budget: float | None = None

    def __post_init__(self) -> None:
        chosen = [v is not None for v in (self.rank, self.rank_decay, self.error_budget)]
        if sum(chosen) != 1:
            raise UsageError("choose exactly one of --rank, --rank-decay or --error-budget")
        if self.rank is not None and self.rank < 1:
            raise ParameterError(f"rank must be >= 1, got {self.rank}")


def _rank_for(bank: FilterBank, mode: CompressionMode, depth: int, n_eligible: int) -> int:
    p = min(bank.K, bank.c_out)
    if mode.rank is not None:
        return min(mode.rank, p)
    if mode.rank_decay is not None:
        sched = RankSchedule(mode.rank_decay, bank.K, 0, max(n_eligible - 1, 0))
        return min(rank_at_depth(sched, depth), p)
    return select_rank_for_budget(bank, mode.error_budget)


def compress_banks(banks: list[tuple[str, FilterBank]], mode: CompressionMode):
    """Compress loose ``(name, bank)`` pairs (e.g. from an ``.npz`` archive).

    Banks with ``h = 1`` are skipped; depth for schedules counts the rest.
    Returns ``[(name, ScefParams, CompressionReport), ...]``.
    """
    eligible = [(name, bank) for name, bank in banks if bank.h > 1]
    out = []
    for depth, (name, bank) in enumerate(eligible):
        r = _rank_for(bank, mode, depth, len(eligible))
        params, report = compress_conv_to_scef(bank, r, name=name)
        out.append((name, params, report))
    return out


def compress_network(checkpoint: Checkpoint, mode: CompressionMode) -> tuple[Checkpoint, list[CompressionReport]]:
    """Replace every Conv2D layer with ``h > 1`` by its SCEF compression."""
    config = checkpoint.config.resolved()
    eligible = config.eligible_indices
    depth = {idx: d for d, idx in enumerate(eligible)}
    layers = list(config.layers)
    params = dict(checkpoint.parameters)
    reports = []
    for idx in eligible:
        spec = layers[idx]
        if spec.kind != "conv2d":
            continue
        bank = FilterBank(params.pop(f"layer{idx}.weight"))
        r = _rank_for(bank, mode, depth[idx], len(eligible))
        frozen = config.freeze_full_rank and r == bank.K
        _, height, width = config.input_shape_of(idx)
        scef, report = compress_conv_to_scef(
            bank, r, frozen=frozen, input_hw=(height, width), stride=spec.stride, name=f"layer{idx}"
        )
        params[f"layer{idx}.eigen_filters"] = scef.eigen_filters
        params[f"layer{idx}.coefficients"] = scef.coefficients
        layers[idx] = replace(spec, kind="scef", rank=r, frozen=frozen)
        reports.append(report)
        log.info("layer compressed", layer=idx, rank=r, relative_error=report.relative_error)

    new_config = replace(
        config,
        layers=tuple(layers),
        scef_set=tuple(i for i, s in enumerate(layers) if s.kind == "scef"),
    )
    compressed = Checkpoint(
        config=new_config,
        parameters=params,
        epoch=checkpoint.epoch,
        metrics={"method": METHOD, "source_epoch": checkpoint.epoch},
        seed=checkpoint.seed,
    )
    return compressed, reports


__all__ = [
    "METHOD",
    "CompressionReport",
    "CompressionMode",
    "compress_conv_to_scef",
    "reconstruction_error",
    "select_rank_for_budget",
    "compress_banks",
    "compress_network",
]
