"""
Synthetic oriented-bar images.

Class ``c`` of ``classes`` is a bar at angle ``c * 180 / classes`` degrees,
drawn on a black single-channel canvas at a random position near the centre.
Labels are balanced (``i % classes``, then shuffled).
"""

from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageDraw

from ..errors import ParameterError

BAR_HALF_LENGTH = 0.35
MIN_CLASSES, MAX_CLASSES = 2, 8


def draw_bar(size: int, angle: float, center: tuple[float, float]) -> np.ndarray:
    """One ``size x size`` bar image with values in ``[0, 1]``."""
    canvas = Image.new("L", (size, size), 0)
    half = BAR_HALF_LENGTH * size
    dx, dy = half * math.cos(angle), -half * math.sin(angle)
    cx, cy = center
    ImageDraw.Draw(canvas).line(
        [(cx - dx, cy - dy), (cx + dx, cy + dy)], fill=255, width=max(1, size // 8)
    )
    return np.asarray(canvas, dtype=np.float64) / 255.0


def synthetic_bars(n: int, size: int = 16, classes: int = 4, seed: int = 0,
                   noise: float = 0.1, val_fraction: float = 0.2):
    """Deterministic oriented-bar dataset (one channel, *size* x *size*)."""
    from . import Dataset

    if not MIN_CLASSES <= classes <= MAX_CLASSES:
        raise ParameterError(f"classes must lie in [{MIN_CLASSES}, {MAX_CLASSES}], got {classes}")
    if n < 1 or size < 4:
        raise ParameterError(f"need n >= 1 and size >= 4 (n={n}, size={size})")
    if noise < 0.0:
        raise ParameterError(f"noise must be >= 0, got {noise}")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes).astype(np.int64)
    jitter = size / 6.0
    offsets = rng.uniform(-jitter, jitter, size=(n, 2))
    images = np.empty((n, 1, size, size))
    for k in range(n):
        angle = math.pi * labels[k] / classes
        center = (size / 2.0 + offsets[k, 0], size / 2.0 + offsets[k, 1])
        images[k, 0] = draw_bar(size, angle, center)
    if noise > 0.0:
        images += noise * rng.standard_normal(images.shape)
    return Dataset.split("synthetic_bars", images, labels, classes, val_fraction, seed)
