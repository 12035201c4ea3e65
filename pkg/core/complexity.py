"""
Complexity Accounting
=====================

Exact trainable-parameter and FLOP counts for Conv2D and SCEF layers, plus
whole-network summaries.

Counting rules::

    N(Conv2D) = c_in c_out h^2
    N(SCEF)   = N_u + N_a,  N_u = c_in h^2 r (0 when frozen or r = h^2),
                            N_a = c_in c_out r
    F(Conv2D) = t h^2 c_in c_out
    F(SCEF)   = t c_in r (h^2 + c_out)
    t         = floor(H / stride) * floor(W / stride)

FLOPs are multiply-accumulate counts without bias terms.  ``t`` follows the
formula literally whatever the padding mode.  Dense rows count
``c_in c_out + c_out`` parameters and ``c_in c_out`` maccs; pooling is free.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ParameterError
from .network import NetworkConfig

COUNTED_KINDS = ("conv2d", "scef", "dense", "pool")


@dataclass(frozen=True)
class LayerComplexity:
    params: int
    flops: int
    n_u: int = 0
    n_a: int = 0
    t: int = 0


def _check_dims(**dims: int) -> None:
    for name, value in dims.items():
        if value is None or int(value) != value or value < 1:
            raise ParameterError(f"{name} must be a positive integer, got {value}")


def _check_kind(layer_kind: str) -> None:
    if layer_kind not in COUNTED_KINDS:
        raise ParameterError(f"layer kind must be one of {COUNTED_KINDS}, got {layer_kind!r}")


def _check_rank(r, h: int) -> None:
    if r is None or not 1 <= r <= h * h:
        raise ParameterError(f"scef rank must lie in [1, {h * h}], got {r}")


def _param_split(layer_kind: str, c_in: int, c_out: int, h: int, r, frozen: bool) -> tuple[int, int]:
    K = h * h
    if layer_kind == "conv2d":
        return 0, c_in * c_out * K
    if layer_kind == "scef":
        n_u = 0 if (frozen or r == K) else c_in * K * r
        return n_u, c_in * c_out * r
    if layer_kind == "dense":
        return 0, c_in * c_out + c_out
    return 0, 0


def count_params(layer_kind: str, c_in: int, c_out: int, h: int = 1,
                 r: int | None = None, frozen: bool = False) -> int:
    """Trainable parameters of one layer (``r`` is ignored for Conv2D)."""
    _check_kind(layer_kind)
    if layer_kind == "pool":
        return 0
    _check_dims(c_in=c_in, c_out=c_out, h=h)
    if layer_kind == "scef":
        _check_rank(r, h)
    n_u, n_a = _param_split(layer_kind, c_in, c_out, h, r, frozen)
    return n_u + n_a


def spatial_positions(H: int, W: int, stride: int) -> int:  # pylint: disable=invalid-name
    _check_dims(H=H, W=W, stride=stride)
    t = (H // stride) * (W // stride)
    if t == 0:
        raise ParameterError(f"{H}x{W} input has no output positions at stride {stride}")
    return t


def count_flops(layer_kind: str, H: int, W: int, stride: int, c_in: int, c_out: int,  # pylint: disable=invalid-name
                h: int = 1, r: int | None = None, mult_add: bool = False) -> int:
    """Multiply-accumulate count of one layer; doubled when *mult_add*."""
    _check_kind(layer_kind)
    if layer_kind == "pool":
        return 0
    _check_dims(c_in=c_in, c_out=c_out, h=h)
    if layer_kind == "dense":
        flops = c_in * c_out
    else:
        t = spatial_positions(H, W, stride)
        if layer_kind == "conv2d":
            flops = t * h * h * c_in * c_out
        else:
            _check_rank(r, h)
            flops = t * c_in * r * (h * h + c_out)
    return 2 * flops if mult_add else flops


def layer_complexity(layer_kind: str, H: int, W: int, stride: int, c_in: int, c_out: int,  # pylint: disable=invalid-name
                     h: int = 1, r: int | None = None, frozen: bool = False,
                     mult_add: bool = False) -> LayerComplexity:
    params = count_params(layer_kind, c_in, c_out, h, r, frozen)
    flops = count_flops(layer_kind, H, W, stride, c_in, c_out, h, r, mult_add)
    if layer_kind in ("pool", "dense"):
        return LayerComplexity(params=params, flops=flops, n_a=params, t=1 if layer_kind == "dense" else 0)
    n_u, n_a = _param_split(layer_kind, c_in, c_out, h, r, frozen)
    return LayerComplexity(params=params, flops=flops, n_u=n_u, n_a=n_a,
                           t=spatial_positions(H, W, stride))


@dataclass(frozen=True)
class ComplexityRow:
    index: int
    kind: str
    c_in: int
    c_out: int
    h: int
    stride: int
    rank: int | None
    frozen: bool
    input_hw: tuple[int, int]
    cost: LayerComplexity

    def to_dict(self) -> dict:
        out = asdict(self)
        out["input_hw"] = list(self.input_hw)
        return out


@dataclass(frozen=True)
class NetworkSummary:
    name: str
    rows: tuple[ComplexityRow, ...]
    mult_add: bool = False

    @property
    def total_params(self) -> int:
        return sum(row.cost.params for row in self.rows)

    @property
    def total_flops(self) -> int:
        return sum(row.cost.flops for row in self.rows)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "name": self.name,
            "mult_add": self.mult_add,
            "layers": [row.to_dict() for row in self.rows],
            "totals": {"params": self.total_params, "flops": self.total_flops},
        }


def network_summary(config: NetworkConfig, mult_add: bool = False) -> NetworkSummary:
    """Per-layer complexity in depth order, SCEF rows at their resolved rank."""
    rows = []
    for idx, spec in enumerate(config.resolved_layers()):
        channels, height, width = config.input_shape_of(idx)
        if spec.kind == "pool":
            c_in = c_out = channels
        else:
            c_in, c_out = spec.c_in, spec.c_out
        h = spec.h if spec.is_conv else 1
        stride = spec.stride if spec.is_conv else 1
        cost = layer_complexity(spec.kind, height, width, stride, c_in, c_out, h,
                                spec.rank, spec.frozen, mult_add)
        rows.append(ComplexityRow(
            index=idx, kind=spec.kind, c_in=c_in, c_out=c_out, h=h, stride=stride,
            rank=spec.rank if spec.kind == "scef" else None,
            frozen=spec.frozen if spec.kind == "scef" else False,
            input_hw=(height, width), cost=cost,
        ))
    return NetworkSummary(name=config.name, rows=tuple(rows), mult_add=mult_add)


__all__ = [
    "LayerComplexity",
    "ComplexityRow",
    "NetworkSummary",
    "count_params",
    "count_flops",
    "layer_complexity",
    "network_summary",
    "spatial_positions",
]
