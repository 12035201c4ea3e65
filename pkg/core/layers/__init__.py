"""
SCEF Layer Modules
==================

This package contains the layer families a network is assembled from.  Each
family exposes pure functional kernels (``*_forward`` / ``*_backward``) plus a
stateful :class:`Layer` subclass used by :class:`core.network.Network`.

Layer families:
- conv2d:     Conv2dParams, init_conv2d, Conv2dLayer - the dense baseline
- scef:       ScefParams, init_scef, ScefLayer - eigen-filter parameterization
- classifier: ReluLayer, MaxPoolLayer, GlobalAvgPoolLayer, DenseLayer

Each stateful layer follows a consistent interface:
- forward(x): compute the output and cache the input
- backward(upstream): fill ``grads`` and return the input gradient
- parameters() / trainable_names(): what an optimizer may update
"""

from .base import Layer, LayerGrads
from .conv2d import Conv2dLayer, Conv2dParams, conv2d_backward, conv2d_forward, init_conv2d
from .scef import (
    ScefLayer,
    ScefParams,
    compose_filters,
    init_scef,
    orthonormality_defect,
    project_onto_basis,
    scef_backward,
    scef_forward,
)
from .classifier import DenseLayer, GlobalAvgPoolLayer, MaxPoolLayer, ReluLayer

__all__ = [
    "Layer",
    "LayerGrads",
    "Conv2dLayer",
    "Conv2dParams",
    "conv2d_forward",
    "conv2d_backward",
    "init_conv2d",
    "ScefLayer",
    "ScefParams",
    "init_scef",
    "scef_forward",
    "scef_backward",
    "compose_filters",
    "project_onto_basis",
    "orthonormality_defect",
    "ReluLayer",
    "MaxPoolLayer",
    "GlobalAvgPoolLayer",
    "DenseLayer",
]
