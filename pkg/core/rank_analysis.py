"""
Effective-Rank Analysis
=======================

Measures how many independent 2-D filters a Conv2D layer actually uses.

For input channel ``i`` the analysis matrix ``W^(i)`` (``K x c_out``, column
``j`` = ``vec(w_j^(i))``) is decomposed; its effective rank ``r_i`` counts
singular values with ``sigma_k >= gamma * sigma_1``.  The layer rank ``r^l``
counts the entries ``s_k >= gamma`` of the channel-averaged normalised
spectrum ``s_k = mean_i(sigma_k^(i) / sigma_1^(i))``.  All-zero channels get
``r_i = 0`` and are left out of the mean.

Also provided:
- :func:`analyze_network` - reports and rank histograms for every ``h > 1``
  layer of a weights container
- :func:`rank_trajectory` - ``r^l`` over a checkpoint series with a
  convergence diagnostic over the final 20% of checkpoints
- :func:`verify_robustness_bound` - Monte-Carlo check of the perturbation
  bound ``||sum_i dI_i * w_j^(i)||_inf <= eps h r sum_i ||dI_i||_2``
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from os import PathLike
from pathlib import Path
from typing import Sequence

import numpy as np
import structlog

from .checkpoint import Checkpoint, load_checkpoint, load_filter_banks, load_scef_banks
from .errors import ConsistencyError, DimensionError, ParameterError, PreconditionError
from .layers.scef import ScefParams, compose_filters
from .network import Network
from .schedules import DEFAULT_GAMMA, gamma_in_range
from .tensor_core import FilterBank, channel_matrix, conv2d, singular_values, spectral_norm

log = structlog.get_logger(__name__)

# ratios within this of gamma count as reaching it (Jacobi ties on flat spectra)
RATIO_TOLERANCE = 1e-12
ORTHONORMAL_TOLERANCE = 1e-6
FINAL_WINDOW_FRACTION = 0.2


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma_in_range(gamma):
        raise ParameterError(f"gamma must lie in [0, 1], got {gamma}")
    return gamma


def _count_at_least(ratios: np.ndarray, gamma: float) -> int:
    return int(np.count_nonzero(ratios >= gamma - RATIO_TOLERANCE))


# ---------------------------------------------------------------------------
# Per-channel and per-layer ranks
# ---------------------------------------------------------------------------

def channel_effective_rank(filters_for_channel, gamma: float = DEFAULT_GAMMA) -> int:
    """Effective rank of one ``K x c_out`` analysis matrix."""
    gamma = _check_gamma(gamma)
    sigma = singular_values(filters_for_channel)
    if sigma[0] == 0.0:
        return 0
    return _count_at_least(sigma / sigma[0], gamma)


@dataclass(frozen=True, eq=False)
class EffRankReport:
    per_channel_ranks: np.ndarray
    layer_rank: int
    normalized_spectrum: np.ndarray
    gamma: float
    layer_depth: int
    zero_channels: int = 0
    name: str = ""
    max_rank: int = 0

    @property
    def empty_spectrum(self) -> bool:
        return self.normalized_spectrum.size == 0

    def histogram(self) -> np.ndarray:
        """Density of per-channel ranks over bins ``1..min(K, c_out)``.

        Zero channels are not counted; an all-zero layer gives all zeros.
        """
        ranks = self.per_channel_ranks[self.per_channel_ranks > 0]
        counts = np.bincount(ranks, minlength=self.max_rank + 1)[1:].astype(np.float64)
        if ranks.size == 0:
            return counts
        return counts / ranks.size

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "depth": self.layer_depth,
            "gamma": self.gamma,
            "layer_rank": self.layer_rank,
            "per_channel_ranks": self.per_channel_ranks.tolist(),
            "normalized_spectrum": self.normalized_spectrum.tolist(),
            "zero_channels": self.zero_channels,
            "empty_spectrum": self.empty_spectrum,
            "histogram": self.histogram().tolist(),
        }


def layer_effective_rank(bank: FilterBank, gamma: float = DEFAULT_GAMMA,
                         layer_depth: int = 0, name: str = "") -> EffRankReport:
    """Per-channel ranks and the layer rank of a dense filter bank."""
    gamma = _check_gamma(gamma)
    if not isinstance(bank, FilterBank):
        bank = FilterBank(bank)
    p = min(bank.K, bank.c_out)
    ranks = np.zeros(bank.c_in, dtype=np.int64)
    live_ratios = []
    for i in range(bank.c_in):
        sigma = singular_values(channel_matrix(bank, i))
        if sigma[0] == 0.0:
            continue
        ratios = sigma / sigma[0]
        ranks[i] = _count_at_least(ratios, gamma)
        live_ratios.append(ratios)

    zero_channels = bank.c_in - len(live_ratios)
    if live_ratios:
        spectrum = np.mean(np.stack(live_ratios), axis=0)
        layer_rank = _count_at_least(spectrum, gamma)
    else:
        log.warning("layer has only zero channels", layer=name, depth=layer_depth)
        spectrum = np.zeros(0)
        layer_rank = 0
    return EffRankReport(
        per_channel_ranks=ranks,
        layer_rank=layer_rank,
        normalized_spectrum=spectrum,
        gamma=gamma,
        layer_depth=layer_depth,
        zero_channels=zero_channels,
        name=name,
        max_rank=p,
    )


# ---------------------------------------------------------------------------
# Whole networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkAnalysis:
    reports: tuple[EffRankReport, ...]
    gamma: float

    @property
    def layer_ranks(self) -> dict[str, int]:
        return {r.name: r.layer_rank for r in self.reports}

    def histograms(self) -> list[np.ndarray]:
        return [r.histogram() for r in self.reports]

    def to_dict(self) -> dict:
        return {"schema": 1, "gamma": self.gamma, "layers": [r.to_dict() for r in self.reports]}

    def csv_rows(self) -> list[list]:
        """``depth, name, layer_rank, zero_channels, hist_1..hist_p`` per layer."""
        rows = []
        for r in self.reports:
            rows.append([r.layer_depth, r.name, r.layer_rank, r.zero_channels,
                         *(f"{d:.6f}" for d in r.histogram())])
        return rows


def _banks_of(container) -> list[tuple[str, FilterBank]]:
    if isinstance(container, (str, PathLike)):
        return load_filter_banks(container)
    if isinstance(container, Checkpoint):
        container = container.network()
    if isinstance(container, Network):
        return [(f"layer{idx}", bank) for idx, bank in container.conv_banks()]
    banks = []
    for n, item in enumerate(container):
        if isinstance(item, tuple):
            label, bank = item
        else:
            label, bank = f"bank{n}", item
        if isinstance(bank, ScefParams):
            bank = compose_filters(bank)
        banks.append((label, bank if isinstance(bank, FilterBank) else FilterBank(bank)))
    return banks


def analyze_network(container, gamma: float = DEFAULT_GAMMA) -> NetworkAnalysis:
    """Reports for every ``h > 1`` filter bank of *container*, in depth order.

    *container* may be a checkpoint / ``.npz`` path, a :class:`Checkpoint`,
    a :class:`Network`, or an iterable of banks or ``(name, bank)`` pairs.
    """
    gamma = _check_gamma(gamma)
    eligible = [(name, bank) for name, bank in _banks_of(container) if bank.h > 1]
    reports = tuple(
        layer_effective_rank(bank, gamma, depth, name)
        for depth, (name, bank) in enumerate(eligible)
    )
    log.info("network analysed", layers=len(reports), gamma=gamma)
    return NetworkAnalysis(reports=reports, gamma=gamma)


@dataclass(frozen=True, eq=False)
class RankTrajectory:
    epochs: tuple[int, ...]
    layers: tuple[str, ...]
    table: np.ndarray
    final_window_std: np.ndarray
    converged: tuple[str, ...] = field(default=())

    @property
    def window(self) -> int:
        return final_window_size(len(self.epochs))

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "layers": list(self.layers),
            "rows": [
                {"epoch": epoch, "ranks": [int(v) for v in row]}
                for epoch, row in zip(self.epochs, self.table)
            ],
            "final_window": self.window,
            "final_window_std": self.final_window_std.tolist(),
            "converged": list(self.converged),
        }


def final_window_size(n: int) -> int:
    return max(1, math.ceil(FINAL_WINDOW_FRACTION * n))


def rank_trajectory(checkpoints: Sequence, gamma: float = DEFAULT_GAMMA) -> RankTrajectory:
    """``r^l`` for every checkpoint (rows) and SCEF-eligible layer (columns)."""
    gamma = _check_gamma(gamma)
    if not checkpoints:
        raise ParameterError("rank_trajectory needs at least one checkpoint")
    loaded = [c if isinstance(c, Checkpoint) else load_checkpoint(c) for c in checkpoints]
    topology = loaded[0].config.to_dict()
    for n, ckpt in enumerate(loaded[1:], start=1):
        if ckpt.config.to_dict() != topology:
            raise ConsistencyError(f"checkpoint {n} has a different topology than checkpoint 0")

    rows = []
    names: tuple[str, ...] = ()
    for ckpt in loaded:
        analysis = analyze_network(ckpt, gamma)
        names = tuple(r.name for r in analysis.reports)
        rows.append([r.layer_rank for r in analysis.reports])
    table = np.asarray(rows, dtype=np.int64).reshape(len(loaded), len(names))

    window = table[-final_window_size(len(loaded)):]
    stds = window.std(axis=0) if names else np.zeros(0)
    converged = []
    for name, std in zip(names, stds):
        if std == 0.0:
            converged.append(name)
        else:
            log.warning("effective rank not converged", layer=name, final_window_std=float(std))
    return RankTrajectory(
        epochs=tuple(c.epoch for c in loaded),
        layers=names,
        table=table,
        final_window_std=stds,
        converged=tuple(converged),
    )


# ---------------------------------------------------------------------------
# Perturbation bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RobustnessCheckConfig:
    epsilon: float
    trials: int = 100
    perturbation_scale: float = 1.0
    image_size: tuple[int, int] = (8, 8)

    def __post_init__(self) -> None:
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        if not self.epsilon > 0.0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if self.perturbation_scale < 0.0:
            raise ParameterError(f"perturbation_scale must be >= 0, got {self.perturbation_scale}")
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ParameterError(f"image_size must be (H, W) > 0, got {self.image_size}")

    @classmethod
    def from_dict(cls, data: dict) -> "RobustnessCheckConfig":
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["image_size"] = list(self.image_size)
        return out


@dataclass(frozen=True)
class RobustnessReport:
    trials: int
    violations: int
    max_ratio: float
    epsilon: float
    max_orthonormality_defect: float
    max_coefficient_norm: float

    def to_dict(self) -> dict:
        return {"schema": 1, **asdict(self)}


def check_bound_hypotheses(params: ScefParams, epsilon: float) -> tuple[float, float]:
    """Raise :class:`PreconditionError` unless the eigen-filters are
    orthonormal within 1e-6 and every coefficient vector has norm <= epsilon."""
    flat = params.eigen_filters.reshape(params.c_in, params.r, params.K)
    defect = np.matmul(flat, flat.transpose(0, 2, 1)) - np.eye(params.r)
    max_defect = float(np.max(np.abs(defect)))
    if max_defect > ORTHONORMAL_TOLERANCE:
        raise PreconditionError(
            f"eigen-filters are not orthonormal: max |U^T U - I| = {max_defect:.3e} > {ORTHONORMAL_TOLERANCE}"
        )
    max_norm = float(np.max(np.linalg.norm(params.coefficients, axis=2)))
    if max_norm > epsilon * (1.0 + 1e-12):
        raise PreconditionError(
            f"coefficient norm bound violated: max ||a_j^(i)||_2 = {max_norm:.6g} > epsilon = {epsilon:.6g}"
        )
    return max_defect, max_norm


def verify_robustness_bound(params: ScefParams, cfg: RobustnessCheckConfig, seed: int = 0) -> RobustnessReport:
    """Monte-Carlo check of the output-perturbation bound of a SCEF layer.

    Trial ``t`` draws ``dI_i ~ N(0, scale^2)`` of size ``image_size`` with
    seed ``seed + t``; the left side is the largest absolute entry of the
    valid-mode response over all output channels and the right side is
    ``eps h r sum_i ||dI_i||_2`` (spectral norms).
    """
    max_defect, max_norm = check_bound_hypotheses(params, cfg.epsilon)
    height, width = cfg.image_size
    if height < params.h or width < params.h:
        raise DimensionError(f"image_size {cfg.image_size} smaller than the filter (h={params.h})")
    bank = compose_filters(params)
    factor = cfg.epsilon * params.h * params.r

    violations = 0
    max_ratio = 0.0
    for trial in range(cfg.trials):
        rng = np.random.default_rng(seed + trial)
        delta = rng.standard_normal((params.c_in, height, width)) * cfg.perturbation_scale
        lhs = float(np.max(np.abs(conv2d(delta[None], bank, 1, "valid"))))
        rhs = factor * sum(spectral_norm(d) for d in delta)
        if lhs > rhs:
            violations += 1
        if rhs > 0.0:
            max_ratio = max(max_ratio, lhs / rhs)
    if violations:
        log.warning("perturbation bound violated", violations=violations, trials=cfg.trials)
    return RobustnessReport(
        trials=cfg.trials,
        violations=violations,
        max_ratio=max_ratio,
        epsilon=cfg.epsilon,
        max_orthonormality_defect=max_defect,
        max_coefficient_norm=max_norm,
    )


def scef_params_of(container) -> list[tuple[str, ScefParams]]:
    """SCEF layer parameters of a checkpoint, a compressed ``.npz`` or a network."""
    if isinstance(container, (str, PathLike)):
        if Path(container).suffix == ".npz":
            return load_scef_banks(container)
        container = load_checkpoint(container)
    if isinstance(container, Checkpoint):
        container = container.network()
    return [(f"layer{idx}", layer.params) for idx, layer in container.scef_layers()]


__all__ = [
    "EffRankReport",
    "NetworkAnalysis",
    "RankTrajectory",
    "RobustnessCheckConfig",
    "RobustnessReport",
    "channel_effective_rank",
    "layer_effective_rank",
    "analyze_network",
    "rank_trajectory",
    "final_window_size",
    "check_bound_hypotheses",
    "verify_robustness_bound",
    "scef_params_of",
]
