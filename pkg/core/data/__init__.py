"""
Dataset Ingestion
=================

Datasets are held in memory as float64 NCHW arrays with integer labels.

Sources:
- cifar10:   the standard CIFAR-10 binary batches, stratified subset,
             per-channel normalisation computed from the subset
- synthetic: oriented bars drawn with Pillow plus Gaussian noise
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog

from ..errors import ParameterError

log = structlog.get_logger(__name__)


@dataclass(eq=False)
class Dataset:
    """Train / validation split of one image classification task."""

    name: str
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    num_classes: int
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return tuple(self.x_train.shape[1:])

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    @property
    def n_val(self) -> int:
        return self.x_val.shape[0]

    @classmethod
    def split(cls, name: str, x: np.ndarray, y: np.ndarray, num_classes: int,
              val_fraction: float, seed: int, **extra) -> "Dataset":
        """Shuffle with *seed* and hold out ``round(n * val_fraction)`` samples."""
        if not 0.0 <= val_fraction < 1.0:
            raise ParameterError(f"val_fraction must lie in [0, 1), got {val_fraction}")
        n = x.shape[0]
        if n == 0:
            raise ParameterError("dataset is empty")
        order = np.random.default_rng(seed).permutation(n)
        n_val = min(int(round(n * val_fraction)), n - 1)
        val, train = np.sort(order[:n_val]), np.sort(order[n_val:])
        dataset = cls(name, x[train], y[train], x[val], y[val], num_classes, **extra)
        log.info("dataset ready", name=name, n_train=dataset.n_train, n_val=dataset.n_val)
        return dataset


from .cifar10 import load_cifar10, read_cifar10_batch  # noqa: E402
from .synthetic import synthetic_bars  # noqa: E402

__all__ = ["Dataset", "load_cifar10", "read_cifar10_batch", "synthetic_bars"]
