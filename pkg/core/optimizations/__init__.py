"""
Runtime instrumentation for SCEF runs.

- PerformanceProfiler: per-operation wall-clock accounting (epochs,
  evaluation passes, analysis sweeps)
- profiler: the process-wide instance used by the trainer
"""

from .profiler import PerformanceProfiler, profiler

__all__ = ["PerformanceProfiler", "profiler"]
