"""PSNR and SSIM on 8-bit-scaled planes."""

import numpy as np

from .errors import ShapeError

PSNR_CAP_DB = 100.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_L = 255.0


def psnr_plane(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """10*log10(peak^2 / MSE), capped at 100 dB (identical planes hit the cap)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"psnr_plane shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ShapeError("psnr_plane: empty plane")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(peak * peak / mse)))


def _gaussian_taps(n=_SSIM_WINDOW, sigma=_SSIM_SIGMA):
    x = np.arange(n) - (n - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


_TAPS = _gaussian_taps()


def _filter_valid(plane, taps=_TAPS):
    """Separable valid-mode correlation with the Gaussian window."""
    n = taps.size
    h, w = plane.shape
    rows = np.zeros((h, w - n + 1), dtype=np.float64)
    for j, t in enumerate(taps):
        rows += t * plane[:, j : j + w - n + 1]
    out = np.zeros((h - n + 1, w - n + 1), dtype=np.float64)
    for i, t in enumerate(taps):
        out += t * rows[i : i + h - n + 1, :]
    return out


def _ssim_stats(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < _SSIM_WINDOW:
        raise ShapeError(f"ssim needs planes of at least {_SSIM_WINDOW}x{_SSIM_WINDOW}")
    mu_a = _filter_valid(a)
    mu_b = _filter_valid(b)
    var_a = np.maximum(_filter_valid(a * a) - mu_a * mu_a, 0.0)
    var_b = np.maximum(_filter_valid(b * b) - mu_b * mu_b, 0.0)
    cov = _filter_valid(a * b) - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def ssim_y(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM with the standard 11x11 sigma=1.5 Gaussian window, L=255."""
    mu_a, mu_b, var_a, var_b, cov = _ssim_stats(a, b)
    c1 = (_SSIM_K1 * _SSIM_L) ** 2
    c2 = (_SSIM_K2 * _SSIM_L) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim_components(a: np.ndarray, b: np.ndarray):
    """Mean (luminance, contrast, structure) factors of SSIM."""
    mu_a, mu_b, var_a, var_b, cov = _ssim_stats(a, b)
    c1 = (_SSIM_K1 * _SSIM_L) ** 2
    c2 = (_SSIM_K2 * _SSIM_L) ** 2
    c3 = c2 / 2.0
    sd_a = np.sqrt(var_a)
    sd_b = np.sqrt(var_b)
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    con = (2.0 * sd_a * sd_b + c2) / (var_a + var_b + c2)
    struct = (cov + c3) / (sd_a * sd_b + c3)
    return float(lum.mean()), float(con.mean()), float(struct.mean())
