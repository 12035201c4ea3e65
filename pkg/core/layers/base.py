"""
Layer Base Class
================

Provides the shared interface used by every stateful layer object in a
:class:`core.network.Network`.  Each concrete subclass sets a couple of
class-level attributes and implements ``forward`` / ``backward`` on top of the
pure functional kernels of its module.

The base class handles:
* Caching the forward input for the backward pass
* Storing the latest parameter gradients by name
* Enumerating parameters and the subset that is trainable
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


class LayerGrads(dict):
    """Gradients of one layer keyed by parameter name.

    Shapes always mirror the parameter container the gradients belong to.
    """

    def matches(self, params: dict[str, np.ndarray]) -> bool:
        """True when every entry has the same shape as its parameter."""
        return set(self) == set(params) and all(
            self[name].shape == np.shape(params[name]) for name in params
        )


class Layer:
    """Base class for network layers with a cached forward input."""

    # ---- subclass configuration (override in each subclass) ----
    kind: str = "layer"

    def __init__(self) -> None:
        self._input: np.ndarray | None = None
        self.grads: LayerGrads = LayerGrads()

    # ---- public API ----

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """Consume ``dL/d(output)``, fill :attr:`grads`, return ``dL/d(input)``."""
        raise NotImplementedError

    def parameters(self) -> dict[str, np.ndarray]:
        """Live references to this layer's parameter arrays."""
        return {}

    def trainable_names(self) -> tuple[str, ...]:
        """Names of parameters an optimizer may update."""
        return tuple(self.parameters())

    def output_shape(self, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
        """``(channels, H, W)`` produced from ``(channels, H, W)``."""
        return in_shape

    # ---- internals ----

    def _cached_input(self) -> np.ndarray:
        if self._input is None:
            raise DimensionError(f"{self.kind}: backward called before forward")
        return self._input
