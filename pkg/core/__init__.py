"""
SCEF Core Module
================

Numerics and training for Separable Convolutional Eigen-Filter (SCEF)
layers, usable without the command-line front end in ``cli/``.

This package serves as the central hub for:
- tensor_core: convolutions, filter vectorisation, small Jacobi SVD, norms
- layers: Conv2D baseline, SCEF layers and the classifier blocks
- objective: task loss plus the orthonormality (Phi1) and coefficient
  sparsity (Phi2) penalties
- rank_analysis: effective ranks, trajectories and the perturbation-bound check
- complexity: parameter and FLOP accounting
- schedules: rank decay and default regularisation weights
- compressor: Conv2D to SCEF conversion by truncated SVD
- network / checkpoint / data / trainer / experiments: building, storing,
  feeding and training networks

Usage:
    from core.network import build_network, tinynet_config
    net = build_network(tinynet_config(), seed=0)
"""

__version__ = "1.0.0"

from . import errors, utilities
from .network import Network, NetworkConfig, build_network, tinynet_config

__all__ = ["Network", "NetworkConfig", "build_network", "tinynet_config", "errors", "utilities"]
