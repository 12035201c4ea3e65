"""
CIFAR-10 binary batches.

Each ``data_batch_*.bin`` file holds 10000 records of one label byte followed
by 3072 pixel bytes (3 x 32 x 32, channel-major, RGB).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import structlog

from ..errors import FormatError, ParameterError

log = structlog.get_logger(__name__)

RECORDS_PER_BATCH = 10000
RECORD_BYTES = 1 + 3 * 32 * 32
BATCH_BYTES = RECORDS_PER_BATCH * RECORD_BYTES
NUM_CLASSES = 10


def read_cifar10_batch(path) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``(images uint8 (N, 3, 32, 32), labels uint8 (N,))`` of one batch file."""
    path = Path(path)
    if not path.is_file():
        raise FormatError("no such batch file", str(path))
    size = path.stat().st_size
    if size != BATCH_BYTES:
        raise FormatError(f"expected 30,730,000 bytes per batch file, got {size:,}", str(path))
    raw = np.fromfile(path, dtype=np.uint8).reshape(RECORDS_PER_BATCH, RECORD_BYTES)
    labels = raw[:, 0].copy()
    if labels.max() >= NUM_CLASSES:
        raise FormatError(f"label byte {int(labels.max())} is not a CIFAR-10 class", str(path))
    images = raw[:, 1:].reshape(RECORDS_PER_BATCH, 3, 32, 32).copy()
    return images, labels


def _stratified(labels: np.ndarray, subset_size: int, rng: np.random.Generator) -> np.ndarray:
    per_class, extra = divmod(subset_size, NUM_CLASSES)
    chosen = []
    for c in range(NUM_CLASSES):
        want = per_class + (1 if c < extra else 0)
        pool = np.flatnonzero(labels == c)
        if pool.size < want:
            raise ParameterError(f"class {c} has {pool.size} images, {want} requested")
        chosen.append(rng.choice(pool, size=want, replace=False))
    return np.sort(np.concatenate(chosen))


def load_cifar10(directory, subset_size: int, seed: int = 0, val_fraction: float = 0.2):
    """Stratified, normalised CIFAR-10 subset as a :class:`~core.data.Dataset`."""
    from . import Dataset

    directory = Path(directory)
    files = sorted(directory.glob("data_batch_*.bin"))
    if not files:
        raise FormatError("no data_batch_*.bin files", str(directory))
    if subset_size < 1:
        raise ParameterError(f"subset_size must be >= 1, got {subset_size}")

    batches = [read_cifar10_batch(f) for f in files]
    images = np.concatenate([b[0] for b in batches])
    labels = np.concatenate([b[1] for b in batches])
    picked = _stratified(labels, subset_size, np.random.default_rng(seed))

    x = images[picked].astype(np.float64) / 255.0
    y = labels[picked].astype(np.int64)
    mean = x.mean(axis=(0, 2, 3))
    std = x.std(axis=(0, 2, 3))
    std = np.where(std > 0.0, std, 1.0)
    x = (x - mean[None, :, None, None]) / std[None, :, None, None]
    log.info("cifar10 subset loaded", files=len(files), subset=subset_size)
    return Dataset.split("cifar10", x, y, NUM_CLASSES, val_fraction, seed, mean=mean, std=std)
