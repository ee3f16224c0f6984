import numpy as np
import pytest

from cpgsr.errors import ShapeError
from cpgsr.fft import fft2_32, fft32, ifft2_32_unnormalized

from oracles import dft2_naive, dft2_quadruple_loop


def test_zero_block():
    assert not fft2_32(np.zeros((32, 32))).any()


def test_constant_block_dc_only():
    spec = fft2_32(np.full((32, 32), 3.0))
    assert spec[0, 0] == pytest.approx(1024 * 3.0)
    spec[0, 0] = 0
    assert np.abs(spec).max() < 1e-9


def test_matches_naive_dft():
    rng = np.random.default_rng(0)
    block = rng.normal(size=(32, 32))
    got = fft2_32(block)
    want = dft2_naive(block)
    assert np.abs(got - want).max() / np.abs(want).max() < 1e-6


def test_quadruple_loop_spot_check():
    rng = np.random.default_rng(1)
    block = rng.normal(size=(32, 32))
    want = dft2_quadruple_loop(block)
    got = fft2_32(block)
    assert np.abs(got - want).max() / np.abs(want).max() < 1e-6


def test_parseval():
    rng = np.random.default_rng(2)
    block = rng.normal(size=(4, 32, 32))
    spec = fft2_32(block)
    lhs = (np.abs(spec) ** 2).sum(axis=(1, 2))
    rhs = 1024.0 * (block**2).sum(axis=(1, 2))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6)


def test_linearity():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(32, 32))
    y = rng.normal(size=(32, 32))
    lhs = fft2_32(2.5 * x - 1.25 * y)
    rhs = 2.5 * fft2_32(x) - 1.25 * fft2_32(y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_inverse_roundtrip():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(32, 32))
    back = ifft2_32_unnormalized(fft2_32(x)) / 1024.0
    np.testing.assert_allclose(back.real, x, atol=1e-12)
    assert np.abs(back.imag).max() < 1e-12


def test_dtype_following():
    x32 = np.zeros((32, 32), np.float32)
    x64 = np.zeros((32, 32), np.float64)
    assert fft2_32(x32).dtype == np.complex64
    assert fft2_32(x64).dtype == np.complex128


def test_wrong_size_rejected():
    with pytest.raises(ShapeError):
        fft2_32(np.zeros((16, 16)))
    with pytest.raises(ShapeError):
        fft32(np.zeros(16))


def test_batched_equals_single():
    rng = np.random.default_rng(5)
    blocks = rng.normal(size=(3, 32, 32))
    batched = fft2_32(blocks)
    for i in range(3):
        np.testing.assert_array_equal(batched[i], fft2_32(blocks[i]))
