#!/usr/bin/env python3
"""
SCEF - Separable Convolutional Eigen-Filters

Command-line toolkit for analysing, counting, compressing and training
convolutional networks whose filters are expressed in per-channel
eigen-filter bases.

Architecture:
- cli/app.py          - cli_main (subcommand dispatch, exit codes)
- core/tensor_core.py - convolutions, Jacobi SVD, norms
- core/layers/        - Conv2D, SCEF and classifier layers
- core/network.py     - topology configs and the layer stack
- core/trainer.py     - SGD training with the Phi1 / Phi2 penalties

Subcommands: analyze, train, compress, complexity, verify-bound,
trajectory, experiment (``scef COMMAND --help`` for details).
"""

import sys


def main():
    """Main entry point - runs the scef command line."""
    from cli.app import cli_main
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
