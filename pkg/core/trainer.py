"""
Training Loop
=============

Minibatch SGD with momentum on ``task_loss + Phi1 + Phi2``.

Per epoch the trainer:
- shuffles the training set with a generator derived from the run seed
- accumulates task loss (sample-weighted), Phi1 / Phi2 (batch means) and
  training accuracy
- evaluates validation accuracy
- optionally records each SCEF-eligible layer's effective rank
- writes a checkpoint every ``checkpoint_every`` epochs and after the last

Frozen eigen-filters are never handed to the optimizer, so their bytes do
not change.  A non-finite loss raises :class:`DivergenceError`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np
import structlog

from .checkpoint import checkpoint_from_network, save_checkpoint
from .data import Dataset, load_cifar10, synthetic_bars
from .errors import ConfigError, DimensionError, DivergenceError, ParameterError
from .network import Network
from .objective import RegWeights, regularization, softmax_cross_entropy
from .optimizations import profiler
from .rank_analysis import analyze_network
from .schedules import DEFAULT_GAMMA, gamma_in_range
from .utilities import derive_seed

log = structlog.get_logger(__name__)

METRICS_HEADER = ("epoch", "task_loss", "phi1", "phi2", "total", "train_acc", "val_acc")
DATASET_KINDS = ("synthetic_bars", "cifar10")
EVAL_BATCH = 256


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "synthetic_bars"
    n: int = 4000
    size: int = 16
    classes: int = 4
    noise: float = 0.1
    directory: str | None = None
    subset_size: int = 2000
    val_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset kind must be one of {DATASET_KINDS}, got {self.kind!r}")
        if self.kind == "cifar10" and not self.directory:
            raise ConfigError("cifar10 dataset needs a 'directory'")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        return cls(**_known(cls, data, "dataset"))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    reg: RegWeights = field(default_factory=RegWeights)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    checkpoint_every: int = 1
    track_ranks: bool = False
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self) -> None:
        if self.learning_rate < 0.0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        for name in ("batch_size", "epochs", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not gamma_in_range(self.gamma):
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = _known(cls, data, "train")
        try:
            if "reg" in data:
                data["reg"] = RegWeights.from_dict(data["reg"])
            if "dataset" in data:
                data["dataset"] = DatasetSpec.from_dict(data["dataset"])
        except (TypeError, ParameterError) as e:
            raise ConfigError(str(e)) from e
        return cls(**data)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["reg"] = self.reg.to_dict()
        out["dataset"] = self.dataset.to_dict()
        return out

    def with_overrides(self, **changes) -> "TrainConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _known(cls, data: dict, section: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section} config must be a JSON object")
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown {section} keys {sorted(unknown)}")
    return dict(data)


def load_dataset(spec: DatasetSpec, seed: int) -> Dataset:
    if spec.kind == "cifar10":
        return load_cifar10(spec.directory, spec.subset_size, seed, spec.val_fraction)
    return synthetic_bars(spec.n, spec.size, spec.classes, seed, spec.noise, spec.val_fraction)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    task_loss: float
    phi1: float
    phi2: float
    total: float
    train_acc: float
    val_acc: float
    ranks: dict[str, int] | None = None

    def row(self) -> list:
        return [self.epoch, *(repr(float(getattr(self, k))) for k in METRICS_HEADER[1:])]

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.ranks is None:
            out.pop("ranks")
        return out


def write_metrics_csv(path, metrics: list[EpochMetrics]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow(m.row())
    return path


@dataclass
class TrainingResult:
    network: Network
    metrics: list[EpochMetrics]
    checkpoints: list[Path] = field(default_factory=list)

    @property
    def final(self) -> EpochMetrics | None:
        return self.metrics[-1] if self.metrics else None


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

class SgdMomentum:
    """``v <- mu v + g``; ``p <- p - lr v``, in place."""

    def __init__(self, learning_rate: float, momentum: float) -> None:
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], names) -> None:
        for name in names:
            grad = grads[name]
            v = self.velocity.get(name)
            if v is None:
                v = self.velocity[name] = np.zeros_like(grad)
            v *= self.momentum
            v += grad
            params[name] -= self.learning_rate * v


# ---------------------------------------------------------------------------
# Loop
# ---------------------------------------------------------------------------

def evaluate(net: Network, x: np.ndarray, y: np.ndarray, batch_size: int = EVAL_BATCH) -> float:
    """Classification accuracy; NaN for an empty set."""
    if x.shape[0] == 0:
        return float("nan")
    correct = 0
    for start in range(0, x.shape[0], batch_size):
        logits = net.forward(x[start:start + batch_size])
        correct += int(np.sum(np.argmax(logits, axis=1) == y[start:start + batch_size]))
    return correct / x.shape[0]


def _layer_ranks(net: Network, gamma: float) -> dict[str, int]:
    return analyze_network(net, gamma).layer_ranks


def train(net: Network, cfg: TrainConfig, dataset: Dataset, checkpoint_dir=None,
          on_epoch: Callable[[EpochMetrics], None] | None = None) -> TrainingResult:
    """Run ``cfg.epochs`` epochs of SGD on *net* in place."""
    if dataset.n_train == 0:
        raise ParameterError("training set is empty")
    if dataset.input_shape != net.config.input_shape:
        raise DimensionError(
            f"dataset images {dataset.input_shape} do not match network input {net.config.input_shape}"
        )
    shuffle_rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    optimizer = SgdMomentum(cfg.learning_rate, cfg.momentum)
    params = net.parameters()
    trainable = net.trainable()
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    profiler.reset()
    result = TrainingResult(network=net, metrics=[])
    log.info("training started", epochs=cfg.epochs, trainable_params=net.trainable_count(),
             n_train=dataset.n_train, n_val=dataset.n_val)

    for epoch in range(1, cfg.epochs + 1):
        with profiler.measure("epoch"):
            order = shuffle_rng.permutation(dataset.n_train)
            task_sum = phi1_sum = phi2_sum = 0.0
            correct = batches = 0
            for batch, start in enumerate(range(0, dataset.n_train, cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                logits = net.forward(dataset.x_train[idx])
                task, grad, hits = softmax_cross_entropy(logits, dataset.y_train[idx])
                net.backward(grad)
                scef = net.scef_layers()
                phi1, phi2, reg_grads = regularization([layer.params for _, layer in scef], cfg.reg)
                total = task + phi1 + phi2
                if not math.isfinite(total):
                    raise DivergenceError(epoch, batch, total)

                grads = net.gradients()
                for (idx_layer, _), extra in zip(scef, reg_grads):
                    for name, value in extra.items():
                        key = f"layer{idx_layer}.{name}"
                        grads[key] = grads[key] + value
                optimizer.step(params, grads, trainable)

                task_sum += task * len(idx)
                phi1_sum += phi1
                phi2_sum += phi2
                correct += hits
                batches += 1

            task_loss = task_sum / dataset.n_train
            phi1_mean, phi2_mean = phi1_sum / batches, phi2_sum / batches
            with profiler.measure("evaluate"):
                val_acc = evaluate(net, dataset.x_val, dataset.y_val)
            metrics = EpochMetrics(
                epoch=epoch,
                task_loss=task_loss,
                phi1=phi1_mean,
                phi2=phi2_mean,
                total=task_loss + phi1_mean + phi2_mean,
                train_acc=correct / dataset.n_train,
                val_acc=val_acc,
                ranks=_layer_ranks(net, cfg.gamma) if cfg.track_ranks else None,
            )
        result.metrics.append(metrics)
        log.info("epoch finished", epoch=epoch, task_loss=round(task_loss, 6),
                 train_acc=metrics.train_acc, val_acc=val_acc,
                 elapsed=round(profiler.total_times.get("epoch", 0.0), 3))
        if on_epoch is not None:
            on_epoch(metrics)
        if checkpoint_dir is not None and (epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs):
            path = checkpoint_dir / f"epoch_{epoch:03d}.ckpt"
            save_checkpoint(path, checkpoint_from_network(net, epoch, metrics.to_dict(), cfg.seed))
            result.checkpoints.append(path)
    log.info("training finished", epochs=cfg.epochs, timings=profiler.get_stats())
    return result


__all__ = [
    "METRICS_HEADER",
    "DatasetSpec",
    "TrainConfig",
    "EpochMetrics",
    "TrainingResult",
    "SgdMomentum",
    "load_dataset",
    "evaluate",
    "train",
    "write_metrics_csv",
]
