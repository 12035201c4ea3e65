"""Tests for core.tensor_core: convolutions, vectorisation, Jacobi SVD, norms."""

import numpy as np
import pytest

from core.errors import DimensionError, NumericError, ParameterError
from core.tensor_core import (
    FilterBank,
    channel_matrix,
    conv2d,
    depthwise_backward_kernel,
    depthwise_conv,
    inf_norm,
    output_size,
    same_padding,
    singular_values,
    small_svd,
    spectral_norm,
    unvectorize_filter,
    vectorize_filter,
)

pytestmark = pytest.mark.unit


def loop_conv2d(x, w, stride=1, padding="valid"):
    """Brute-force nested-loop cross-correlation."""
    n, c_in, height, width = x.shape
    c_out, _, h, _ = w.shape
    if padding == "same":
        x = np.pad(x, ((0, 0), (0, 0), same_padding(height, h, stride), same_padding(width, h, stride)))
        out_h, out_w = height // stride, width // stride
    else:
        out_h, out_w = (height - h) // stride + 1, (width - h) // stride + 1
    out = np.zeros((n, c_out, out_h, out_w))
    for b in range(n):
        for j in range(c_out):
            for y in range(out_h):
                for z in range(out_w):
                    for i in range(c_in):
                        for p in range(h):
                            for q in range(h):
                                out[b, j, y, z] += x[b, i, y * stride + p, z * stride + q] * w[j, i, p, q]
    return out


class TestGeometry:
    def test_same_padding_symmetric(self):
        assert same_padding(5, 3, 1) == (1, 1)

    def test_same_padding_extra_pixel_goes_after(self):
        assert same_padding(4, 3, 2) == (0, 1)
        assert same_padding(8, 3, 2) == (0, 1)

    def test_output_sizes(self):
        assert output_size(5, 3, 1, "valid") == 3
        assert output_size(7, 3, 2, "same") == 3
        assert output_size(7, 3, 2, "valid") == 3

    def test_valid_collapse_is_dimension_error(self):
        with pytest.raises(DimensionError):
            output_size(2, 3, 1, "valid")

    def test_unknown_padding(self):
        with pytest.raises(ParameterError):
            output_size(5, 3, 1, "reflect")


class TestConv2d:
    def test_one_by_one_scaling(self):
        out = conv2d(np.ones((1, 1, 3, 3)), np.full((1, 1, 1, 1), 2.0))
        np.testing.assert_array_equal(out, np.full((1, 1, 3, 3), 2.0))

    def test_delta_image_returns_symmetric_filter(self):
        x = np.zeros((1, 1, 5, 5))
        x[0, 0, 2, 2] = 1.0
        w = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
        out = conv2d(x, w[None, None], padding="valid")
        np.testing.assert_array_equal(out[0, 0], w)

    def test_delta_image_is_rotated_filter_without_flip(self, rng):
        x = np.zeros((1, 1, 5, 5))
        x[0, 0, 2, 2] = 1.0
        w = rng.standard_normal((3, 3))
        out = conv2d(x, w[None, None], padding="valid")
        np.testing.assert_array_equal(out[0, 0], np.rot90(w, 2))

    @pytest.mark.parametrize("stride,padding", [(1, "valid"), (1, "same"), (2, "same"), (2, "valid")])
    def test_matches_loop_reference(self, rng, stride, padding):
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((4, 2, 3, 3))
        np.testing.assert_allclose(
            conv2d(x, w, stride, padding), loop_conv2d(x, w, stride, padding), rtol=1e-12, atol=1e-12
        )

    def test_matches_loop_reference_randomised(self, rng):
        for _ in range(10):
            c_in, c_out = rng.integers(1, 5, size=2)
            h = int(rng.choice([1, 3, 5]))
            size = int(rng.integers(h, 10))
            stride = int(rng.integers(1, 3))
            padding = str(rng.choice(["valid", "same"]))
            if padding == "same" and size // stride == 0:
                continue
            x = rng.standard_normal((2, c_in, size, size))
            w = rng.standard_normal((c_out, c_in, h, h))
            np.testing.assert_allclose(
                conv2d(x, w, stride, padding), loop_conv2d(x, w, stride, padding),
                rtol=1e-12, atol=1e-12,
            )

    def test_linearity(self, rng):
        x, y = rng.standard_normal((2, 1, 3, 7, 7))
        w = rng.standard_normal((2, 3, 3, 3))
        a, b = 1.7, -0.4
        np.testing.assert_allclose(
            conv2d(a * x + b * y, w, padding="same"),
            a * conv2d(x, w, padding="same") + b * conv2d(y, w, padding="same"),
            atol=1e-10,
        )

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            conv2d(rng.standard_normal((1, 3, 5, 5)), rng.standard_normal((2, 2, 3, 3)))

    def test_zero_size_input(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((0, 1, 5, 5)), np.ones((1, 1, 3, 3)))

    def test_even_filter_rejected(self):
        with pytest.raises(DimensionError):
            FilterBank(np.ones((1, 1, 2, 2)))


class TestDepthwise:
    def test_single_channel_single_filter_equals_conv2d(self, rng):
        x = rng.standard_normal((2, 1, 6, 6))
        f = rng.standard_normal((1, 1, 3, 3))
        np.testing.assert_allclose(depthwise_conv(x, f, 1, "same"), conv2d(x, f, 1, "same"), atol=1e-12)

    def test_centered_delta_is_identity(self, rng):
        x = rng.standard_normal((1, 2, 5, 5))
        f = np.zeros((2, 1, 3, 3))
        f[:, 0, 1, 1] = 1.0
        np.testing.assert_array_equal(depthwise_conv(x, f, 1, "same"), x)

    def test_channel_order_is_input_major(self, rng):
        x = rng.standard_normal((2, 3, 6, 6))
        f = rng.standard_normal((3, 4, 3, 3))
        out = depthwise_conv(x, f, 2, "same")
        for i in range(3):
            for k in range(4):
                expected = conv2d(x[:, i : i + 1], f[i, k][None, None], 2, "same")
                np.testing.assert_allclose(out[:, i * 4 + k : i * 4 + k + 1], expected, atol=1e-12)

    def test_filter_count_mismatch(self, rng):
        with pytest.raises(DimensionError):
            depthwise_conv(rng.standard_normal((1, 3, 5, 5)), rng.standard_normal((2, 1, 3, 3)))

    def test_backward_matches_finite_differences(self, rng, gradient_check):
        x = rng.standard_normal((1, 2, 5, 5))
        f = rng.standard_normal((2, 2, 3, 3))
        g = rng.standard_normal(depthwise_conv(x, f, 2, "same").shape)
        grad_x, grad_f = depthwise_backward_kernel(x, f, g, 2, "same")

        def loss():
            return float(np.sum(depthwise_conv(x, f, 2, "same") * g))

        gradient_check(loss, x, grad_x)
        gradient_check(loss, f, grad_f)


class TestVectorize:
    def test_column_major(self):
        np.testing.assert_array_equal(vectorize_filter([[1, 2], [3, 4]]), [1, 3, 2, 4])

    def test_zero(self):
        np.testing.assert_array_equal(vectorize_filter(np.zeros((3, 3))), np.zeros(9))

    def test_inner_product_is_frobenius(self, rng):
        a, b = rng.standard_normal((2, 3, 3))
        assert vectorize_filter(a) @ vectorize_filter(b) == pytest.approx(np.sum(a * b), abs=1e-12)

    def test_unvectorize_inverts(self, rng):
        w = rng.standard_normal((5, 5))
        np.testing.assert_array_equal(unvectorize_filter(vectorize_filter(w), 5), w)

    def test_rejects_non_matrix(self):
        with pytest.raises(DimensionError):
            vectorize_filter(np.zeros(9))

    def test_channel_matrix_columns(self, rng):
        bank = FilterBank(rng.standard_normal((4, 2, 3, 3)))
        m = channel_matrix(bank, 1)
        assert m.shape == (9, 4)
        for j in range(4):
            np.testing.assert_array_equal(m[:, j], vectorize_filter(bank.weights[j, 1]))

    def test_channel_matrix_range(self, rng):
        with pytest.raises(DimensionError):
            channel_matrix(rng.standard_normal((4, 2, 3, 3)), 2)


def assert_svd_invariants(m, svd):
    p = min(m.shape)
    assert svd.left.shape == (m.shape[0], p)
    assert svd.right.shape == (m.shape[1], p)
    np.testing.assert_allclose(svd.left.T @ svd.left, np.eye(p), atol=1e-10)
    np.testing.assert_allclose(svd.right.T @ svd.right, np.eye(p), atol=1e-10)
    assert np.all(np.diff(svd.singular) <= 0.0)
    assert np.all(svd.singular >= 0.0)
    norm = np.linalg.norm(m)
    if norm > 0.0:
        assert np.linalg.norm(svd.reconstruct() - m) / norm <= 1e-9


class TestSmallSvd:
    def test_diagonal(self):
        svd = small_svd(np.diag([3.0, 2.0]))
        np.testing.assert_allclose(svd.singular, [3.0, 2.0], atol=1e-15)

    def test_orthonormal_columns(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((9, 4)))
        np.testing.assert_allclose(small_svd(q).singular, np.ones(4), atol=1e-12)

    def test_wide_matrix_against_gram_eigenvalues(self, rng):
        m = rng.standard_normal((9, 16))
        expected = np.sqrt(np.sort(np.linalg.eigvalsh(m @ m.T))[::-1])
        np.testing.assert_allclose(small_svd(m).singular, expected, atol=1e-9)

    @pytest.mark.parametrize("k_rows", [1, 4, 9, 25])
    def test_invariants_random(self, rng, k_rows):
        for c_cols in range(1, 33, 3):
            m = rng.standard_normal((k_rows, c_cols))
            assert_svd_invariants(m, small_svd(m))

    def test_rank_deficient_keeps_orthonormal_factors(self, rng):
        m = np.outer(rng.standard_normal(9), rng.standard_normal(5))
        svd = small_svd(m)
        assert_svd_invariants(m, svd)
        np.testing.assert_allclose(svd.singular[1:], 0.0, atol=1e-12)

    def test_zero_matrix(self):
        svd = small_svd(np.zeros((9, 4)))
        np.testing.assert_array_equal(svd.singular, np.zeros(4))
        np.testing.assert_allclose(svd.left.T @ svd.left, np.eye(4), atol=1e-12)

    def test_sign_convention(self, rng):
        svd = small_svd(rng.standard_normal((9, 6)))
        for k in range(svd.p):
            column = svd.left[:, k]
            assert column[np.argmax(np.abs(column))] >= 0.0

    def test_deterministic_bytes(self, rng):
        m = rng.standard_normal((25, 7))
        a, b = small_svd(m), small_svd(m.copy())
        assert a.left.tobytes() == b.left.tobytes()
        assert a.singular.tobytes() == b.singular.tobytes()
        assert a.right.tobytes() == b.right.tobytes()

    def test_singular_values_agree(self, rng):
        m = rng.standard_normal((9, 12))
        np.testing.assert_allclose(singular_values(m), small_svd(m).singular, atol=1e-12)

    def test_non_finite(self):
        m = np.ones((3, 3))
        m[1, 1] = np.nan
        with pytest.raises(NumericError):
            small_svd(m)

    def test_tall_matrix_beyond_64_rows(self, rng):
        m = rng.standard_normal((80, 3))
        assert_svd_invariants(m, small_svd(m))
        np.testing.assert_allclose(singular_values(m), np.linalg.svd(m, compute_uv=False), atol=1e-9)

    def test_both_sides_too_long(self):
        with pytest.raises(ParameterError, match=r"min\(K, c\) <= 64"):
            small_svd(np.ones((65, 65)))


class TestNorms:
    def test_identity(self):
        assert spectral_norm(np.eye(6)) == pytest.approx(1.0, abs=1e-12)

    def test_unit_outer_product(self, rng):
        u = rng.standard_normal(7)
        v = rng.standard_normal(5)
        m = np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
        assert spectral_norm(m) == pytest.approx(1.0, abs=1e-12)

    def test_matches_svd(self, rng):
        m = rng.standard_normal((8, 8))
        assert spectral_norm(m) == small_svd(m).singular[0]

    def test_power_iteration_for_large_matrices(self, rng):
        q1, _ = np.linalg.qr(rng.standard_normal((70, 70)))
        q2, _ = np.linalg.qr(rng.standard_normal((70, 70)))
        sigma = np.linspace(1.0, 0.1, 70)
        sigma[0] = 5.0
        m = (q1 * sigma) @ q2.T
        assert spectral_norm(m) == pytest.approx(5.0, rel=1e-9)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 4))) == 0.0

    def test_inf_norm(self, rng):
        assert inf_norm(np.zeros((1, 2, 3, 3))) == 0.0
        t = np.zeros((1, 1, 4, 4))
        t[0, 0, 2, 1] = -5.0
        assert inf_norm(t) == 5.0
        r = rng.standard_normal((2, 3, 4, 4))
        assert inf_norm(r) == max(abs(v) for v in r.ravel())
