"""
Hyperparameter Rules
====================

Deterministic choice of the per-layer rank, the regularisation multipliers
and the effective-rank threshold.

Rank decay is indexed by the depth of SCEF-eligible layers (``h > 1``) only,
relative to the first eligible layer:

* linear:       ``r = floor(K - l' (K - 1) / (l_max - l_min))``, ``l' = l - l_min``
* logarithmic:  ``r = floor((K - 1) / log2(l''))``, ``l'' = l - l_min + 1``,
                with ``r = K`` at ``l'' = 1`` (``log2(1) = 0``)

Results are clamped to ``[1, K]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .utilities import clamp

RANK_DECAY_KINDS = ("none", "linear", "logarithmic")
_ALIASES = {"log": "logarithmic"}

DEFAULT_LAMBDA1_BASE = 0.0001
DEFAULT_LAMBDA2 = 0.0001
DEFAULT_GAMMA = 0.3
# gamma may exceed 1 by this much so that exact ties with the top singular value still count
GAMMA_SLACK = 1e-12


def gamma_in_range(gamma: float) -> bool:
    return 0.0 <= gamma <= 1.0 + GAMMA_SLACK


def normalize_decay_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in RANK_DECAY_KINDS:
        raise ParameterError(f"rank decay must be one of none|linear|log, got {kind!r}")
    return kind


@dataclass(frozen=True)
class RankSchedule:
    kind: str
    K: int  # pylint: disable=invalid-name
    l_min: int
    l_max: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", normalize_decay_kind(self.kind))
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if self.l_min > self.l_max:
            raise ParameterError(f"l_min={self.l_min} exceeds l_max={self.l_max}")


def rank_at_depth(sched: RankSchedule, l: int) -> int:
    """Scheduled rank for the eligible layer at depth *l*."""
    if not sched.l_min <= l <= sched.l_max:
        raise ParameterError(f"depth {l} outside [{sched.l_min}, {sched.l_max}]")
    K = sched.K
    if sched.kind == "none":
        return K
    if sched.kind == "linear":
        span = sched.l_max - sched.l_min
        if span == 0:
            return K
        rel = l - sched.l_min
        # floor(K - x) == K - ceil(x), kept in integers
        r = K - (-(-rel * (K - 1) // span))
    else:
        rel = l - sched.l_min + 1
        r = K if rel == 1 else math.floor((K - 1) / math.log2(rel))
    return clamp(r, 1, K)


@dataclass(frozen=True)
class HyperParams:
    lambda1_per_layer: tuple[float, ...]
    lambda2: float
    gamma: float


def default_hyperparams(r_per_layer) -> HyperParams:
    ranks = tuple(int(r) for r in r_per_layer)
    if any(r < 1 for r in ranks):
        raise ParameterError(f"ranks must be >= 1, got {ranks}")
    return HyperParams(
        lambda1_per_layer=tuple(DEFAULT_LAMBDA1_BASE * r for r in ranks),
        lambda2=DEFAULT_LAMBDA2,
        gamma=DEFAULT_GAMMA,
    )


__all__ = [
    "RANK_DECAY_KINDS",
    "RankSchedule",
    "HyperParams",
    "normalize_decay_kind",
    "rank_at_depth",
    "default_hyperparams",
    "DEFAULT_GAMMA",
    "GAMMA_SLACK",
    "gamma_in_range",
]
