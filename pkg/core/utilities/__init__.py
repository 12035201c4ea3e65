"""
SCEF Utilities Module
=====================

Small helpers shared across the ``core`` package: value clamping, seed
derivation for per-layer / per-trial generators, and the structlog setup used
by the command-line front end.
"""

from __future__ import annotations

import logging
import sys

import numpy as np
import structlog


def clamp(value, min_val, max_val):
    """Clamp a value between min and max"""
    return max(min_val, min(value, max_val))


def derive_seed(seed: int, *path: int) -> int:
    """Derive a child seed from *seed* and an index path.

    Uses :class:`numpy.random.SeedSequence` so that e.g. layer 3 of a network
    seeded with 7 always receives the same, well-mixed 32-bit seed.
    """
    state = np.random.SeedSequence([int(seed), *[int(p) for p in path]])
    return int(state.generate_state(1, dtype=np.uint32)[0])


_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def configure_logging(verbosity: int = 0, stream=None) -> None:
    """Route structlog events to *stream* (stderr by default).

    ``verbosity`` 0 shows warnings and errors, 1 adds info, 2+ adds debug.
    """
    level = _LEVELS.get(verbosity, logging.DEBUG)
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="%H:%M:%S"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=stream or sys.stderr),
        cache_logger_on_first_use=False,
    )


__all__ = ["clamp", "derive_seed", "configure_logging"]
