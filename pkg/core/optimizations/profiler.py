"""
Operation timing for training and analysis runs.

Timings are reported through the log only; they never
enter metrics files or checkpoints, which must stay byte-reproducible.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator


class PerformanceProfiler:
    """Accumulates wall-clock time per named operation."""

    def __init__(self) -> None:
        self.start_times: Dict[str, float] = {}
        self.execution_counts: Dict[str, int] = {}
        self.total_times: Dict[str, float] = {}
        self._lock = threading.RLock()

    def start_operation(self, operation: str) -> None:
        with self._lock:
            self.start_times[operation] = time.perf_counter()

    def end_operation(self, operation: str) -> float:
        """Stop timing *operation* and return the elapsed seconds (0 if never started)."""
        with self._lock:
            if operation not in self.start_times:
                return 0.0
            elapsed = time.perf_counter() - self.start_times.pop(operation)
            self.execution_counts[operation] = self.execution_counts.get(operation, 0) + 1
            self.total_times[operation] = self.total_times.get(operation, 0.0) + elapsed
            return elapsed

    @contextmanager
    def measure(self, operation: str) -> Iterator[None]:
        self.start_operation(operation)
        try:
            yield
        finally:
            self.end_operation(operation)

    def get_stats(self) -> Dict[str, Dict[str, Any]]:
        with self._lock:
            stats = {}
            for operation, total in self.total_times.items():
                count = self.execution_counts.get(operation, 0)
                stats[operation] = {
                    "count": count,
                    "total_time": total,
                    "average_time": total / count if count else 0.0,
                }
            return stats

    def reset(self) -> None:
        with self._lock:
            self.start_times.clear()
            self.execution_counts.clear()
            self.total_times.clear()


profiler = PerformanceProfiler()
