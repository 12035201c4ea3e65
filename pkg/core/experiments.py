"""
Comparison Experiments
======================

Trains several variants of one base topology under the same seed, optimizer
and data, and tabulates validation accuracy, trainable parameters, FLOPs and
the worst orthonormality defect of the SCEF layers.

Variants:
- ``conv2d``        the plain CNN baseline
- ``scef``          every eligible layer as SCEF with trainable eigen-filters
- ``scef-frozen``   SCEF with frozen (randomly initialised) eigen-filters
- ``scef-no-phi1``  SCEF without the orthonormality penalty
- ``rank=R``        SCEF with the same rank ``min(R, K)`` in every layer
- ``c_out=N``       SCEF with every eligible convolution widened (or narrowed) to N filters
- ``decay=D``       SCEF with rank decay ``D`` (``none``, ``linear`` or ``log``)
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import structlog

from .complexity import network_summary
from .data import Dataset
from .errors import ParameterError, UsageError
from .layers import orthonormality_defect
from .network import LayerSpec, NetworkConfig, build_network
from .schedules import normalize_decay_kind
from .trainer import TrainConfig, train, write_metrics_csv

log = structlog.get_logger(__name__)

VARIANTS = ("conv2d", "scef", "scef-frozen", "scef-no-phi1")
PARAMETRIC_VARIANTS = ("rank=R", "c_out=N", "decay=D")


@dataclass(frozen=True)
class Variant:
    """A parsed variant name: one of :data:`VARIANTS` or a parametric SCEF run."""

    name: str
    kind: str = "scef"
    rank: int | None = None
    width: int | None = None
    decay: str | None = None


def _unknown(text: str) -> UsageError:
    return UsageError(f"unknown variant {text!r}; choose from {VARIANTS} or {PARAMETRIC_VARIANTS}")


def _positive(text: str, key: str) -> int:
    try:
        value = int(text.split("=", 1)[1])
    except ValueError as e:
        raise UsageError(f"bad {key} variant {text!r}") from e
    if value < 1:
        raise UsageError(f"{key} variant must be >= 1, got {value}")
    return value


def parse_variant(text) -> Variant:
    """``"scef"``, ``"rank=4"``, ``"c_out=32"`` or ``"decay=log"`` as a :class:`Variant`."""
    if isinstance(text, Variant):
        return text
    key = text.split("=", 1)[0] if "=" in text else None
    if key == "rank":
        return Variant(text, rank=_positive(text, key))
    if key == "c_out":
        return Variant(text, width=_positive(text, key))
    if key == "decay":
        try:
            return Variant(text, decay=normalize_decay_kind(text.split("=", 1)[1]))
        except ParameterError as e:
            raise UsageError(f"bad decay variant {text!r}: {e}") from e
    if text not in VARIANTS:
        raise _unknown(text)
    return Variant(text, kind=text)


def _plain(config: NetworkConfig) -> tuple:
    return tuple(
        replace(spec, kind="conv2d", rank=None, frozen=False) if spec.is_conv else spec
        for spec in config.layers
    )


def _widened(layers: tuple[LayerSpec, ...], width: int) -> tuple[LayerSpec, ...]:
    """Set every eligible convolution to *width* filters and rewire the layers it feeds."""
    out = []
    old_channels = new_channels = None
    for spec in layers:
        if spec.is_conv:
            c_in = spec.c_in if new_channels is None else new_channels
            c_out = width if spec.eligible else spec.c_out
            old_channels, new_channels = spec.c_out, c_out
            spec = replace(spec, c_in=c_in, c_out=c_out)
        elif spec.kind == "dense" and new_channels is not None:
            spec = replace(spec, c_in=spec.c_in // old_channels * new_channels)
            old_channels = new_channels = None
        out.append(spec)
    return tuple(out)


def variant_config(base: NetworkConfig, variant) -> NetworkConfig:
    """The topology a variant trains, derived from *base*."""
    variant = parse_variant(variant)
    layers = _plain(base)
    decay = base.rank_decay if base.rank_decay != "none" else "linear"
    if variant.rank is not None:
        layers = tuple(
            replace(spec, rank=min(variant.rank, spec.K)) if spec.eligible else spec for spec in layers
        )
        return replace(base, layers=layers, scef_set="all", rank_decay="none",
                       name=f"{base.name}-rank{variant.rank}")
    if variant.width is not None:
        layers = _widened(layers, variant.width)
        name = f"{base.name}-c_out{variant.width}"
    elif variant.decay is not None:
        decay = variant.decay
        name = f"{base.name}-decay-{decay}"
    elif variant.kind == "conv2d":
        return replace(base, layers=layers, scef_set=(), rank_decay="none", name=f"{base.name}-conv2d")
    else:
        if variant.kind == "scef-frozen":
            layers = tuple(replace(spec, frozen=True) if spec.eligible else spec for spec in layers)
        name = f"{base.name}-{variant.kind}"
    return replace(base, layers=layers, scef_set="all", rank_decay=decay, name=name)


def variant_train_config(cfg: TrainConfig, variant) -> TrainConfig:
    if parse_variant(variant).kind == "scef-no-phi1":
        return replace(cfg, reg=replace(cfg.reg, phi1_enabled=False))
    return cfg


@dataclass(frozen=True)
class ExperimentRow:
    variant: str
    val_acc: float
    train_acc: float
    final_total_loss: float
    trainable_params: int
    flops: int
    max_defect: float


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ExperimentRow, ...]
    seed: int
    epochs: int

    def row(self, variant: str) -> ExperimentRow:
        for row in self.rows:
            if row.variant == variant:
                return row
        raise KeyError(variant)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "seed": self.seed,
            "epochs": self.epochs,
            "variants": [row.__dict__.copy() for row in self.rows],
        }


def run_variant(base: NetworkConfig, cfg: TrainConfig, dataset: Dataset, variant: str,
                out_dir=None) -> ExperimentRow:
    variant = parse_variant(variant)
    name = variant.name
    net_cfg = variant_config(base, variant)
    train_cfg = variant_train_config(cfg, variant)
    net = build_network(net_cfg, train_cfg.seed)
    run_dir = Path(out_dir) / name if out_dir is not None else None
    result = train(net, train_cfg, dataset, checkpoint_dir=run_dir)
    if run_dir is not None:
        write_metrics_csv(run_dir / "metrics.csv", result.metrics)
    defects = [float(orthonormality_defect(layer.params).max()) for _, layer in net.scef_layers()]
    summary = network_summary(net.config)
    final = result.final
    row = ExperimentRow(
        variant=name,
        val_acc=final.val_acc,
        train_acc=final.train_acc,
        final_total_loss=final.total,
        trainable_params=summary.total_params,
        flops=summary.total_flops,
        max_defect=max(defects, default=0.0),
    )
    log.info("variant finished", variant=name, val_acc=row.val_acc, params=row.trainable_params)
    return row


def run_experiment(base: NetworkConfig, cfg: TrainConfig, dataset: Dataset,
                   variants=VARIANTS, out_dir=None) -> ExperimentResult:
    """Train every variant in order and collect the comparison table."""
    rows = tuple(run_variant(base, cfg, dataset, v, out_dir) for v in variants)
    return ExperimentResult(rows=rows, seed=cfg.seed, epochs=cfg.epochs)


__all__ = [
    "VARIANTS",
    "PARAMETRIC_VARIANTS",
    "Variant",
    "ExperimentRow",
    "ExperimentResult",
    "variant_config",
    "variant_train_config",
    "parse_variant",
    "run_variant",
    "run_experiment",
]
