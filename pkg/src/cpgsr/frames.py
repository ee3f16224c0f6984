"""Frame types, BT.709 color conversion, and Catmull-Rom resampling.

Conventions: FrameRGB carries (3, h, w) floats in [0, 1]; FrameYUV420 carries
8-bit-scaled float planes in [0, 255] with 2x2-subsampled chroma. Conversions
between the two happen only at module borders (codec, metrics, file I/O).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class FrameRGB:
    data: np.ndarray  # (3, h, w) float32 in [0, 1]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise ShapeError(f"FrameRGB expects (3, h, w), got {self.data.shape}")

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


@dataclass
class FrameYUV420:
    y: np.ndarray  # (h, w) float32 in [0, 255]
    u: np.ndarray  # (h/2, w/2)
    v: np.ndarray  # (h/2, w/2)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float32)
        self.u = np.asarray(self.u, dtype=np.float32)
        self.v = np.asarray(self.v, dtype=np.float32)
        h, w = self.y.shape
        if h % 2 or w % 2:
            raise ShapeError(f"YUV420 luma dims must be even, got {(h, w)}")
        if self.u.shape != (h // 2, w // 2) or self.v.shape != (h // 2, w // 2):
            raise ShapeError("chroma planes must be half the luma resolution")

    @property
    def height(self):
        return self.y.shape[0]

    @property
    def width(self):
        return self.y.shape[1]


# BT.709 full-range luma coefficients
_KR, _KG, _KB = 0.2126, 0.7152, 0.0722


def rgb_to_yuv420(frame: FrameRGB) -> FrameYUV420:
    """Full-range BT.709 conversion with 2x2 box-averaged chroma."""
    r, g, b = frame.data * np.float32(255.0)
    y = _KR * r + _KG * g + _KB * b
    u = (b - y) / (2.0 * (1.0 - _KB)) + 128.0
    v = (r - y) / (2.0 * (1.0 - _KR)) + 128.0
    return FrameYUV420(y=y, u=_box2(u), v=_box2(v))


def yuv420_to_rgb(frame: FrameYUV420) -> FrameRGB:
    """Inverse conversion; chroma is nearest-upsampled."""
    y = frame.y
    u = _nearest2(frame.u) - 128.0
    v = _nearest2(frame.v) - 128.0
    r = y + 2.0 * (1.0 - _KR) * v
    b = y + 2.0 * (1.0 - _KB) * u
    g = (y - _KR * r - _KB * b) / _KG
    rgb = np.stack([r, g, b]) / 255.0
    return FrameRGB(np.clip(rgb, 0.0, 1.0))


def _box2(plane):
    h, w = plane.shape
    if h % 2 or w % 2:
        raise ShapeError(f"plane dims must be even for 2x2 averaging, got {(h, w)}")
    return plane.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _nearest2(plane):
    return np.repeat(np.repeat(plane, 2, axis=0), 2, axis=1)


def _cubic(t, a=-0.5):
    t = abs(float(t))
    if t <= 1.0:
        return (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    if t < 2.0:
        return a * (t**3 - 5.0 * t**2 + 8.0 * t - 4.0)
    return 0.0


# Halving filter: the Catmull-Rom kernel stretched by the scale factor
# (anti-aliased), sampled at tap distances 0.5..3.5 from the half-pixel
# output center. Phases 0.25/0.75 of the unstretched kernel.
DOWN2_TAPS = np.array(
    [_cubic((j - 3.5) / 2.0) / 2.0 for j in range(8)], dtype=np.float32
)

# Doubling filters: plain interpolation at phases 0.25 / 0.75.
UP2_EVEN_TAPS = np.array([_cubic(1.75), _cubic(0.75), _cubic(0.25), _cubic(1.25)], dtype=np.float32)
UP2_ODD_TAPS = np.array([_cubic(1.25), _cubic(0.25), _cubic(0.75), _cubic(1.75)], dtype=np.float32)


def _down2_axis(d, axis):
    d = np.moveaxis(d, axis, -1)
    n = d.shape[-1]
    if n % 2:
        raise ShapeError(f"cannot halve odd length {n}")
    padded = np.pad(d, [(0, 0)] * (d.ndim - 1) + [(3, 4)], mode="edge")
    out = np.zeros(d.shape[:-1] + (n // 2,), dtype=d.dtype)
    for j, w in enumerate(DOWN2_TAPS):
        out += w * padded[..., j : j + n : 2]
    return np.moveaxis(out, -1, axis)


def _up2_axis(d, axis):
    d = np.moveaxis(d, axis, -1)
    n = d.shape[-1]
    padded = np.pad(d, [(0, 0)] * (d.ndim - 1) + [(2, 2)], mode="edge")
    even = np.zeros_like(d)
    odd = np.zeros_like(d)
    for j in range(4):
        even += UP2_EVEN_TAPS[j] * padded[..., j : j + n]
        odd += UP2_ODD_TAPS[j] * padded[..., j + 1 : j + 1 + n]
    out = np.empty(d.shape[:-1] + (2 * n,), dtype=d.dtype)
    out[..., 0::2] = even
    out[..., 1::2] = odd
    return np.moveaxis(out, -1, axis)


def bicubic_downsample2(hr: FrameRGB) -> FrameRGB:
    """Anti-aliased Catmull-Rom 2x downsampling with edge replication."""
    if hr.height % 2 or hr.width % 2:
        raise ShapeError(f"even dims required, got {(hr.height, hr.width)}")
    return FrameRGB(_down2_axis(_down2_axis(hr.data, 1), 2))


def bicubic_upsample2(lr: FrameRGB) -> FrameRGB:
    """Catmull-Rom 2x upsampling (the non-learned comparison baseline)."""
    return FrameRGB(np.clip(_up2_axis(_up2_axis(lr.data, 1), 2), 0.0, 1.0))


def downsample2_plane(plane: np.ndarray) -> np.ndarray:
    """Anti-aliased 2x halving of a single (h, w) plane."""
    return _down2_axis(_down2_axis(plane, 0), 1)


def upsample2_plane(plane: np.ndarray) -> np.ndarray:
    return _up2_axis(_up2_axis(plane, 0), 1)
