"""
Shared fixtures for the SCEF test suite.

- seeded random generators
- a tiny network topology (8x8 inputs) and matching synthetic dataset
- a central finite-difference gradient checker (step 1e-5, 64-bit)
"""

import numpy as np
import pytest

from core.data import synthetic_bars
from core.network import NetworkConfig
from core.trainer import DatasetSpec, TrainConfig
from core.utilities import configure_logging

FD_STEP = 1e-5
FD_TOLERANCE = 1e-4
# gradients below this magnitude are compared absolutely
FD_FLOOR = 1e-4


def central_difference(loss, array, step=FD_STEP):
    """Numerical gradient of ``loss()`` w.r.t. *array*, perturbed in place."""
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        orig = array[idx]
        array[idx] = orig + step
        plus = loss()
        array[idx] = orig - step
        minus = loss()
        array[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), FD_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale))


@pytest.fixture(autouse=True)
def _quiet_logging():
    configure_logging(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gradient_check():
    """``check(loss, array, analytic)`` asserts FD agreement within 1e-4."""

    def check(loss, array, analytic, tol=FD_TOLERANCE):
        numeric = central_difference(loss, array)
        err = max_relative_error(analytic, numeric)
        assert err <= tol, f"max relative FD error {err:.3e} > {tol}"

    return check


def tiny_network_dict(scef_set="all", rank_decay="linear", classes=3, activation="relu"):
    return {
        "name": "tiny",
        "input_shape": [1, 8, 8],
        "scef_set": scef_set,
        "rank_decay": rank_decay,
        "activation": activation,
        "layers": [
            {"kind": "conv2d", "c_in": 1, "c_out": 4, "h": 3, "stride": 1},
            {"kind": "conv2d", "c_in": 4, "c_out": 6, "h": 3, "stride": 2},
            {"kind": "pool", "pool": "global_avg"},
            {"kind": "dense", "c_in": 6, "c_out": classes},
        ],
    }


@pytest.fixture
def tiny_config():
    """Two 3x3 conv layers, both SCEF with linear decay (ranks 9 and 1)."""
    return NetworkConfig.from_dict(tiny_network_dict())


@pytest.fixture
def tiny_conv_config():
    return NetworkConfig.from_dict(tiny_network_dict(scef_set=[], rank_decay="none"))


@pytest.fixture
def tiny_dataset():
    return synthetic_bars(n=24, size=8, classes=3, seed=0)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(
        learning_rate=0.05,
        epochs=2,
        batch_size=8,
        seed=0,
        dataset=DatasetSpec(n=24, size=8, classes=3),
    )
