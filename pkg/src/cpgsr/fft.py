"""Iterative radix-2 FFT, fixed at length 32 (the coding-unit tile size).

Forward, unnormalized: X[u] = sum_x x[x] * exp(-2*pi*i*u*x/32).
float32/complex64 inputs are transformed in complex64, float64/complex128
in complex128, so training stays in single precision while oracle-grade
checks can run in double.
"""

import numpy as np

from .errors import ShapeError

N = 32

_BITREV = np.array([int(f"{i:05b}"[::-1], 2) for i in range(N)])


def _twiddle_tables(cdtype):
    tables = []
    m = 2
    while m <= N:
        k = np.arange(m // 2)
        tables.append(np.exp(-2j * np.pi * k / m).astype(cdtype))
        m *= 2
    return tables


_TW64 = _twiddle_tables(np.complex64)
_TW128 = _twiddle_tables(np.complex128)


def _cdtype(dtype):
    if dtype in (np.float64, np.complex128):
        return np.complex128
    return np.complex64


def fft32(x: np.ndarray) -> np.ndarray:
    """Length-32 FFT along the last axis of an arbitrarily-batched array."""
    if x.shape[-1] != N:
        raise ShapeError(f"fft32 requires last dim {N}, got {x.shape[-1]}")
    cdtype = _cdtype(x.dtype)
    tables = _TW128 if cdtype == np.complex128 else _TW64
    y = x[..., _BITREV].astype(cdtype)
    lead = y.shape[:-1]
    m = 2
    for tw in tables:
        half = m // 2
        y = y.reshape(lead + (N // m, m))
        a = y[..., :half]
        b = y[..., half:] * tw
        y = np.concatenate([a + b, a - b], axis=-1).reshape(lead + (N,))
        m *= 2
    return y


def ifft32_unnormalized(z: np.ndarray) -> np.ndarray:
    """Unnormalized inverse (conjugate transform): sum z[u] * exp(+2*pi*i*u*x/32)."""
    return np.conj(fft32(np.conj(z)))


def fft2_32(block: np.ndarray) -> np.ndarray:
    """2D FFT of (..., 32, 32) tiles; unnormalized in both axes.

    Parseval with this convention: sum |X|^2 == 1024 * sum |x|^2.
    """
    if block.ndim < 2 or block.shape[-2:] != (N, N):
        raise ShapeError(f"fft2_32 requires trailing dims (32, 32), got {block.shape}")
    z = fft32(block)
    z = fft32(z.swapaxes(-1, -2)).swapaxes(-1, -2)
    return z


def ifft2_32_unnormalized(z: np.ndarray) -> np.ndarray:
    """Unnormalized 2D inverse; fft2 followed by this scales by 1024."""
    return np.conj(fft2_32(np.conj(z)))
