import numpy as np
import pytest

from cpgsr.errors import NumericalError, ShapeError
from cpgsr import tensor as T

from oracles import bilinear_up2_naive


def rand(shape, seed=0, scale=1.0):
    return np.random.default_rng(seed).normal(0, scale, size=shape).astype(np.float32)


class TestElementwise:
    def test_gelu_zero(self):
        assert T.gelu(T.Tensor(np.zeros((1, 1, 2, 2), np.float32))).data.max() == 0.0

    def test_gelu_matches_formula(self):
        x = rand((1, 2, 4, 4), seed=1)
        got = T.gelu(T.Tensor(x)).data
        inner = np.sqrt(2 / np.pi) * (x + 0.044715 * x**3)
        want = 0.5 * x * (1 + np.tanh(inner))
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_sigmoid_zero(self):
        assert T.sigmoid(T.Tensor(np.zeros(3, np.float32))).data[0] == 0.5

    def test_sigmoid_extremes_finite(self):
        out = T.sigmoid(T.Tensor(np.array([-200.0, 200.0], np.float32))).data
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-8)

    def test_l1_identical_is_zero(self):
        x = T.Tensor(rand((2, 3, 4, 4)))
        assert float(T.l1(x, x).data) == 0.0

    def test_l1_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.l1(T.Tensor(np.zeros((1, 1, 2, 2))), T.Tensor(np.zeros((1, 1, 3, 3))))

    def test_add_mul_backward(self):
        a = T.Tensor(rand((2, 2), seed=2), requires_grad=True)
        b = T.Tensor(rand((2, 2), seed=3), requires_grad=True)
        T.mean(T.mul(T.add(a, b), b)).backward()
        np.testing.assert_allclose(a.grad, b.data / 4.0, rtol=1e-6)
        np.testing.assert_allclose(b.grad, (a.data + 2 * b.data) / 4.0, rtol=1e-5)

    def test_broadcast_mul_backward(self):
        s = T.Tensor(rand((1, 3, 1, 1), seed=4), requires_grad=True)
        x = T.Tensor(rand((2, 3, 4, 4), seed=5), requires_grad=True)
        T.mean(T.mul(s, x)).backward()
        assert s.grad.shape == s.data.shape
        np.testing.assert_allclose(
            s.grad, x.data.sum(axis=(0, 2, 3), keepdims=True)[:1] / x.data.size, rtol=1e-5
        )

    def test_nonfinite_raises(self):
        big = T.Tensor(np.full((2, 2), 3e38, np.float32))
        with pytest.raises(NumericalError):
            T.add(big, big)


class TestReshapeOps:
    def test_pixel_shuffle_r1_identity(self):
        x = rand((1, 4, 3, 3))
        np.testing.assert_array_equal(T.pixel_shuffle(T.Tensor(x), 1).data, x)

    def test_pixel_shuffle_index_formula(self):
        x = np.array([1.0, 2.0, 3.0, 4.0], np.float32).reshape(1, 4, 1, 1)
        out = T.pixel_shuffle(T.Tensor(x), 2).data
        np.testing.assert_array_equal(out[0, 0], [[1.0, 2.0], [3.0, 4.0]])

    def test_shuffle_roundtrip(self):
        x = rand((2, 8, 4, 6), seed=6)
        back = T.pixel_unshuffle(T.pixel_shuffle(T.Tensor(x), 2), 2).data
        np.testing.assert_array_equal(back, x)

    def test_shuffle_rejects_bad_channels(self):
        with pytest.raises(ShapeError):
            T.pixel_shuffle(T.Tensor(rand((1, 3, 2, 2))), 2)

    def test_avg_pool_constant(self):
        x = np.full((1, 2, 4, 4), 5.0, np.float32)
        out = T.avg_pool2(T.Tensor(x)).data
        assert out.shape == (1, 2, 2, 2)
        np.testing.assert_array_equal(out, np.full((1, 2, 2, 2), 5.0, np.float32))

    def test_avg_pool_direct_mean(self):
        x = np.array([[1.0, 3.0], [5.0, 7.0]], np.float32).reshape(1, 1, 2, 2)
        assert T.avg_pool2(T.Tensor(x)).data.item() == 4.0

    def test_avg_pool_checkerboard(self):
        x = np.indices((4, 4)).sum(axis=0) % 2
        out = T.avg_pool2(T.Tensor(x.reshape(1, 1, 4, 4).astype(np.float32))).data
        np.testing.assert_array_equal(out, np.full((1, 1, 2, 2), 0.5, np.float32))

    def test_avg_pool_rejects_odd(self):
        with pytest.raises(ShapeError):
            T.avg_pool2(T.Tensor(rand((1, 1, 3, 4))))

    def test_concat_backward_splits(self):
        a = T.Tensor(rand((1, 2, 2, 2), seed=7), requires_grad=True)
        b = T.Tensor(rand((1, 3, 2, 2), seed=8), requires_grad=True)
        out = T.concat([a, b], axis=1)
        assert out.shape == (1, 5, 2, 2)
        T.mean(out).backward()
        assert a.grad.shape == a.data.shape and b.grad.shape == b.data.shape
        np.testing.assert_allclose(a.grad, 1.0 / out.size)


class TestBilinearUp:
    def test_matches_definition(self):
        plane = rand((5, 7), seed=9)
        got = T.bilinear_up2(T.Tensor(plane.reshape(1, 1, 5, 7))).data[0, 0]
        np.testing.assert_allclose(got, bilinear_up2_naive(plane), atol=1e-6)

    def test_constant_preserved(self):
        x = np.full((1, 3, 4, 4), 0.7, np.float32)
        np.testing.assert_allclose(
            T.bilinear_up2(T.Tensor(x)).data, np.full((1, 3, 8, 8), 0.7), atol=1e-7
        )

    def test_adjoint_consistency(self):
        # <Ax, y> == <x, A^T y> for random x, y
        rng = np.random.default_rng(10)
        x = rng.normal(size=(1, 1, 6, 5)).astype(np.float32)
        y = rng.normal(size=(1, 1, 12, 10)).astype(np.float32)
        ax = T._up2_axis(T._up2_axis(x, 2), 3)
        aty = T._up2_axis_adjoint(T._up2_axis_adjoint(y, 3), 2)
        assert abs((ax * y).sum() - (x * aty).sum()) < 1e-3


class TestBackwardEngine:
    def test_grad_accumulates_over_reuse(self):
        x = T.Tensor(np.array([2.0], np.float32), requires_grad=True)
        y = T.add(T.mul(x, x), x)  # x^2 + x -> dy/dx = 2x + 1 = 5
        y.backward()
        np.testing.assert_allclose(x.grad, [5.0])

    def test_backward_requires_scalar(self):
        x = T.Tensor(rand((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            T.add(x, x).backward()

    def test_deep_chain_no_recursion_error(self):
        x = T.Tensor(np.ones(1, np.float32), requires_grad=True)
        y = x
        for _ in range(3000):
            y = T.add(y, x)
        T.mean(y).backward()
        np.testing.assert_allclose(x.grad, [3001.0])

    def test_float64_passthrough(self):
        x = T.Tensor(np.ones((1, 1, 2, 2), np.float64))
        assert T.gelu(x).dtype == np.float64

    def test_determinism_bitwise(self):
        x = rand((2, 3, 8, 8), seed=11)
        a = T.gelu(T.Tensor(x)).data
        b = T.gelu(T.Tensor(x)).data
        np.testing.assert_array_equal(a, b)
