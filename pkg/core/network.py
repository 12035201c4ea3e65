"""
Network - Topology Configuration and Layer Stack
================================================

The network engine turns a :class:`NetworkConfig` into a stack of layer
objects and runs forward and backward passes through it.

Key responsibilities:
- Parse and validate topologies (channel chaining, spatial sizes, SCEF
  eligibility) and name the failing layer index on error
- Replace the Conv2D layers listed in ``scef_set`` by SCEF layers and assign
  their ranks (explicit rank, else the rank-decay schedule, else ``K``)
- Initialise parameters deterministically from a seed
- Enumerate parameters as ``layer{idx}.{param}`` for optimizers and
  checkpoints

Topology JSON::

    {"name": "tinynet", "input_shape": [1, 16, 16],
     "scef_set": "all", "rank_decay": "linear",
     "layers": [{"kind": "conv2d", "c_in": 1, "c_out": 16, "h": 3}, ...]}
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError
from .layers import (
    Conv2dLayer,
    DenseLayer,
    GlobalAvgPoolLayer,
    Layer,
    MaxPoolLayer,
    ReluLayer,
    ScefLayer,
    compose_filters,
    init_conv2d,
    init_scef,
)
from .schedules import RankSchedule, normalize_decay_kind, rank_at_depth
from .tensor_core import PADDING_MODES, FilterBank, output_size
from .utilities import derive_seed

LAYER_KINDS = ("conv2d", "scef", "pool", "dense")
POOL_MODES = ("global_avg", "max")
ACTIVATIONS = ("relu", "none")


# ---------------------------------------------------------------------------
# Configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    """One entry of a topology."""

    kind: str
    c_in: int = 0
    c_out: int = 0
    h: int = 1
    stride: int = 1
    padding: str = "same"
    rank: int | None = None
    frozen: bool = False
    pool: str = "global_avg"
    size: int = 2

    @property
    def K(self) -> int:  # pylint: disable=invalid-name
        return self.h * self.h

    @property
    def is_conv(self) -> bool:
        return self.kind in ("conv2d", "scef")

    @property
    def eligible(self) -> bool:
        """SCEF-eligible: a convolution with a spatial extent (``h > 1``)."""
        return self.is_conv and self.h > 1

    @classmethod
    def from_dict(cls, data: dict, index: int | None = None) -> "LayerSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown layer keys {sorted(unknown)}", index)
        if "kind" not in data:
            raise ConfigError("layer is missing 'kind'", index)
        return cls(**data)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.is_conv:
            out.update(c_in=self.c_in, c_out=self.c_out, h=self.h,
                       stride=self.stride, padding=self.padding)
            if self.kind == "scef" or self.rank is not None:
                out["rank"] = self.rank
            if self.kind == "scef" or self.frozen:
                out["frozen"] = self.frozen
        elif self.kind == "pool":
            out["pool"] = self.pool
            if self.pool == "max":
                out["size"] = self.size
        else:
            out.update(c_in=self.c_in, c_out=self.c_out)
        return out


@dataclass(frozen=True)
class NetworkConfig:
    """A validated network topology."""

    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    scef_set: tuple[int, ...] | str = ()
    rank_decay: str = "none"
    activation: str = "relu"
    freeze_full_rank: bool = True
    coeff_std: float | None = None
    name: str = "network"
    shapes: tuple[tuple[int, int, int], ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not isinstance(self.scef_set, str):
            object.__setattr__(self, "scef_set", tuple(int(i) for i in self.scef_set))
        elif self.scef_set != "all":
            raise ConfigError(f"scef_set must be a list of indices or 'all', got {self.scef_set!r}")
        try:
            object.__setattr__(self, "rank_decay", normalize_decay_kind(self.rank_decay))
        except ParameterError as e:
            raise ConfigError(str(e)) from e
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        object.__setattr__(self, "shapes", self._validate())

    # ---- validation ----

    def _validate(self) -> tuple[tuple[int, int, int], ...]:
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ConfigError(f"input_shape must be (channels, H, W) > 0, got {self.input_shape}")
        if not self.layers:
            raise ConfigError("network has no layers")
        members = set(self.scef_indices)
        for idx in members:
            if not 0 <= idx < len(self.layers):
                raise ConfigError(f"scef_set index {idx} out of range")
            if not self.layers[idx].eligible:
                raise ConfigError("SCEF layers must be convolutions with h > 1", idx)

        shape = self.input_shape
        shapes = []
        flattened = False
        for idx, spec in enumerate(self.layers):
            if spec.kind not in LAYER_KINDS:
                raise ConfigError(f"unknown layer kind {spec.kind!r}", idx)
            channels, height, width = shape
            if spec.is_conv:
                if flattened:
                    raise ConfigError("convolution after a dense layer", idx)
                if spec.c_in != channels:
                    raise ConfigError(f"c_in={spec.c_in} but incoming channels={channels}", idx)
                if spec.c_out < 1 or spec.h < 1 or spec.h % 2 == 0:
                    raise ConfigError(f"need c_out >= 1 and odd h >= 1 (c_out={spec.c_out}, h={spec.h})", idx)
                if spec.stride < 1 or spec.padding not in PADDING_MODES:
                    raise ConfigError(f"bad stride/padding ({spec.stride}, {spec.padding!r})", idx)
                if spec.rank is not None and not 1 <= spec.rank <= spec.K:
                    raise ConfigError(f"rank {spec.rank} outside [1, {spec.K}]", idx)
                try:
                    shape = (
                        spec.c_out,
                        output_size(height, spec.h, spec.stride, spec.padding),
                        output_size(width, spec.h, spec.stride, spec.padding),
                    )
                except (DimensionError, ParameterError) as e:
                    raise ConfigError(str(e), idx) from e
            elif spec.kind == "pool":
                if spec.pool == "global_avg":
                    shape = (channels, 1, 1)
                elif spec.pool == "max":
                    if spec.size < 1 or height // spec.size == 0 or width // spec.size == 0:
                        raise ConfigError(f"max pool {spec.size} collapses {height}x{width}", idx)
                    shape = (channels, height // spec.size, width // spec.size)
                else:
                    raise ConfigError(f"pool must be one of {POOL_MODES}", idx)
            else:
                features = channels * height * width
                if spec.c_in != features:
                    raise ConfigError(f"dense c_in={spec.c_in} but incoming features={features}", idx)
                if spec.c_out < 1:
                    raise ConfigError("dense c_out must be >= 1", idx)
                shape = (spec.c_out, 1, 1)
                flattened = True
            shapes.append(shape)
        return tuple(shapes)

    # ---- derived views ----

    @property
    def scef_indices(self) -> tuple[int, ...]:
        """The indices of layers realised as SCEF (declared or listed)."""
        if self.scef_set == "all":
            listed = {i for i, spec in enumerate(self.layers) if spec.eligible}
        else:
            listed = set(self.scef_set)
        declared = {i for i, spec in enumerate(self.layers) if spec.kind == "scef"}
        return tuple(sorted(listed | declared))

    @property
    def eligible_indices(self) -> tuple[int, ...]:
        return tuple(i for i, spec in enumerate(self.layers) if spec.eligible)

    def input_shape_of(self, idx: int) -> tuple[int, int, int]:
        return self.input_shape if idx == 0 else self.shapes[idx - 1]

    def resolved_layers(self) -> tuple[LayerSpec, ...]:
        """Layers with SCEF membership, ranks and frozen flags made explicit."""
        members = set(self.scef_indices)
        eligible = self.eligible_indices
        depth = {idx: d for d, idx in enumerate(eligible)}
        out = []
        for idx, spec in enumerate(self.layers):
            if idx not in members:
                out.append(replace(spec, kind="conv2d", rank=None, frozen=False) if spec.is_conv else spec)
                continue
            rank = spec.rank
            if rank is None:
                sched = RankSchedule(self.rank_decay, spec.K, 0, max(len(eligible) - 1, 0))
                rank = rank_at_depth(sched, depth[idx])
            frozen = spec.frozen or (self.freeze_full_rank and rank == spec.K)
            out.append(replace(spec, kind="scef", rank=rank, frozen=frozen))
        return tuple(out)

    def resolved(self) -> "NetworkConfig":
        """Equivalent config whose SCEF layers are all declared explicitly."""
        layers = self.resolved_layers()
        return replace(
            self,
            layers=layers,
            scef_set=tuple(i for i, s in enumerate(layers) if s.kind == "scef"),
        )

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        """``layer{idx}.{param}`` -> shape for every parameter of the network."""
        shapes = {}
        for idx, spec in enumerate(self.resolved_layers()):
            prefix = f"layer{idx}"
            if spec.kind == "conv2d":
                shapes[f"{prefix}.weight"] = (spec.c_out, spec.c_in, spec.h, spec.h)
            elif spec.kind == "scef":
                shapes[f"{prefix}.eigen_filters"] = (spec.c_in, spec.rank, spec.h, spec.h)
                shapes[f"{prefix}.coefficients"] = (spec.c_in, spec.c_out, spec.rank)
            elif spec.kind == "dense":
                shapes[f"{prefix}.weight"] = (spec.c_out, spec.c_in)
                shapes[f"{prefix}.bias"] = (spec.c_out,)
        return shapes

    # ---- serialisation ----

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        if not isinstance(data, dict):
            raise ConfigError("network config must be a JSON object")
        known = {f.name for f in fields(cls)} - {"shapes"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown network keys {sorted(unknown)}")
        for key in ("input_shape", "layers"):
            if key not in data:
                raise ConfigError(f"network config is missing {key!r}")
        try:
            layers = tuple(
                LayerSpec.from_dict(layer, idx) for idx, layer in enumerate(data["layers"])
            )
            kwargs = {k: v for k, v in data.items() if k != "layers"}
            return cls(layers=layers, **kwargs)
        except TypeError as e:
            raise ConfigError(f"malformed network config: {e}") from e

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "scef_set": self.scef_set if isinstance(self.scef_set, str) else list(self.scef_set),
            "rank_decay": self.rank_decay,
            "activation": self.activation,
            "freeze_full_rank": self.freeze_full_rank,
            "coeff_std": self.coeff_std,
            "layers": [spec.to_dict() for spec in self.layers],
        }

    def with_overrides(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


def resolve_ranks(config: NetworkConfig) -> dict[int, int]:
    """Rank of every SCEF layer by index: explicit rank, else the schedule, else ``K``."""
    layers = config.resolved_layers()
    return {idx: spec.rank for idx, spec in enumerate(layers) if spec.kind == "scef"}


def tinynet_config(in_channels: int = 1, image_size: int = 16, classes: int = 4,
                   scef: bool = True, rank_decay: str = "linear") -> NetworkConfig:
    """Three 3x3 conv blocks (16, 32, 64 channels, stride-2 downsampling
    between blocks), ReLU, global average pool and a dense classifier."""
    layers = (
        LayerSpec("conv2d", c_in=in_channels, c_out=16, h=3, stride=1),
        LayerSpec("conv2d", c_in=16, c_out=32, h=3, stride=2),
        LayerSpec("conv2d", c_in=32, c_out=64, h=3, stride=2),
        LayerSpec("pool", pool="global_avg"),
        LayerSpec("dense", c_in=64, c_out=classes),
    )
    return NetworkConfig(
        input_shape=(in_channels, image_size, image_size),
        layers=layers,
        scef_set="all" if scef else (),
        rank_decay=rank_decay if scef else "none",
        name="tinynet-scef" if scef else "tinynet-conv2d",
    )


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class Network:
    """A built layer stack with named parameters."""

    def __init__(self, config: NetworkConfig, layers: dict[int, Layer], stages: list[Layer]) -> None:
        self.config = config
        self.layers = layers
        self.stages = stages

    # ---- passes ----

    def forward(self, x) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        if out.ndim != 4 or out.shape[1:] != self.config.input_shape:
            raise DimensionError(
                f"network expects input (N, {', '.join(map(str, self.config.input_shape))}), got {out.shape}"
            )
        for stage in self.stages:
            out = stage.forward(out)
        return out

    def backward(self, grad) -> np.ndarray:
        for stage in reversed(self.stages):
            grad = stage.backward(grad)
        return grad

    # ---- parameters ----

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for idx, layer in self.layers.items():
            for name, value in layer.parameters().items():
                out[f"layer{idx}.{name}"] = value
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for idx, layer in self.layers.items():
            for name, value in layer.grads.items():
                out[f"layer{idx}.{name}"] = value
        return out

    def trainable(self) -> tuple[str, ...]:
        return tuple(
            f"layer{idx}.{name}"
            for idx, layer in self.layers.items()
            for name in layer.trainable_names()
        )

    def trainable_count(self) -> int:
        params = self.parameters()
        return int(sum(params[name].size for name in self.trainable()))

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        """Copy *values* into the live parameter arrays (names and shapes must match)."""
        params = self.parameters()
        if set(values) != set(params):
            missing = sorted(set(params) - set(values))
            extra = sorted(set(values) - set(params))
            raise DimensionError(f"parameter names differ (missing={missing}, unexpected={extra})")
        for name, target in params.items():
            source = np.asarray(values[name], dtype=np.float64)
            if source.shape != target.shape:
                raise DimensionError(f"{name}: shape {source.shape} != {target.shape}")
            target[...] = source

    # ---- views ----

    def scef_layers(self) -> list[tuple[int, ScefLayer]]:
        return [(idx, layer) for idx, layer in self.layers.items() if isinstance(layer, ScefLayer)]

    def conv_banks(self) -> list[tuple[int, FilterBank]]:
        """Dense filter bank of every convolution (SCEF layers composed)."""
        banks = []
        for idx, layer in self.layers.items():
            if isinstance(layer, ScefLayer):
                banks.append((idx, compose_filters(layer.params)))
            elif isinstance(layer, Conv2dLayer):
                banks.append((idx, layer.params.bank))
        return banks


def _make_layer(spec: LayerSpec, seed: int, coeff_std: float | None) -> Layer:
    if spec.kind == "conv2d":
        return Conv2dLayer(init_conv2d(spec.c_in, spec.c_out, spec.h, seed, spec.stride, spec.padding))
    if spec.kind == "scef":
        params = init_scef(spec.c_in, spec.c_out, spec.h, spec.rank, seed,
                           coeff_std=coeff_std, frozen=spec.frozen)
        return ScefLayer(params, spec.stride, spec.padding)
    if spec.kind == "pool":
        return GlobalAvgPoolLayer() if spec.pool == "global_avg" else MaxPoolLayer(spec.size)
    return DenseLayer.initialize(spec.c_in, spec.c_out, seed)


def build_network(config: NetworkConfig, seed: int) -> Network:
    """Resolve SCEF membership and ranks, then initialise every layer from *seed*."""
    resolved = config.resolved()
    layers: dict[int, Layer] = {}
    stages: list[Layer] = []
    for idx, spec in enumerate(resolved.layers):
        layer = _make_layer(spec, derive_seed(seed, idx), resolved.coeff_std)
        stages.append(layer)
        if spec.kind != "pool":
            layers[idx] = layer
        if spec.is_conv and resolved.activation == "relu":
            stages.append(ReluLayer())
    return Network(resolved, layers, stages)


__all__ = [
    "LAYER_KINDS",
    "LayerSpec",
    "NetworkConfig",
    "Network",
    "build_network",
    "resolve_ranks",
    "tinynet_config",
]
