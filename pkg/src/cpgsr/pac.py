"""Pixel-adaptive convolution guided by the coding-unit partition map.

Each 3x3 tap is scaled by F(Pa_i, Pa_j) = max(0, 1 - 16*(Pa_j - Pa_i)^2),
where Pa is the per-pixel partition value (log2 of the covering CU side,
divided by 6). A constant map gives F == 1 everywhere, which reduces the op
to plain conv2d bit-for-bit. F is side information: no gradient flows into
the partition map.
"""

from dataclasses import dataclass

import numpy as np

from .conv import ConvParams, _backward_data, _im2col, masked_conv2d
from .errors import ShapeError
from .tensor import Tensor

THRESHOLD = 16.0

# partition values emitted by the codec simulator: log2(side)/6
PA_LEVELS = {side: np.log2(side) / 6.0 for side in (4, 8, 16, 32, 64)}


@dataclass
class PartitionMap:
    """(n, 1, h, w) plane of partition values in [0, 1]."""

    plane: np.ndarray

    def __post_init__(self):
        self.plane = np.asarray(self.plane, dtype=np.float32)
        if self.plane.ndim != 4 or self.plane.shape[1] != 1:
            raise ShapeError(f"partition map must be (n, 1, h, w), got {self.plane.shape}")

    def pooled2(self) -> "PartitionMap":
        """2x2 mean-pooled map for the next network depth."""
        n, c, h, w = self.plane.shape
        if h % 2 or w % 2:
            raise ShapeError(f"cannot pool partition map with odd dims {(h, w)}")
        return PartitionMap(self.plane.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5)))


def partition_kernel(pa_i: float, pa_j: float) -> float:
    """Tap weight between two partition values (double-precision scalar form)."""
    d = float(pa_j) - float(pa_i)
    return max(0.0, 1.0 - THRESHOLD * d * d)


def partition_tap_field(part: np.ndarray) -> np.ndarray:
    """Per-pixel 3x3 tap weights (n, 1, 3, 3, h, w) from an (n, 1, h, w) map.

    The map is edge-replicated at the border; out-of-bounds image taps are
    zero-padded in the convolution itself, so the border values of F are
    never multiplied against real data.
    """
    if part.ndim != 4 or part.shape[1] != 1:
        raise ShapeError(f"partition map must be (n, 1, h, w), got {part.shape}")
    padded = np.pad(part, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="edge")
    n, _, h, w = part.shape
    neigh = _im2col(padded, 3, 1, h, w)
    delta = neigh - part[:, :, None, None, :, :]
    f = 1.0 - THRESHOLD * delta * delta
    return np.maximum(f, 0.0).astype(part.dtype, copy=False)


def pac_forward(v: Tensor, part: PartitionMap, p: ConvParams) -> Tensor:
    """Partition-guided convolution; requires k=3, stride 1, same padding."""
    if p.kernel != 3 or p.stride != 1 or p.padding != 1:
        raise ShapeError("pac_forward requires a 3x3 stride-1 same-padding kernel")
    plane = part.plane
    if plane.shape[0] != v.shape[0] or plane.shape[2:] != v.shape[2:]:
        raise ShapeError(
            f"partition map {plane.shape} does not align with features {v.shape}"
        )
    return masked_conv2d(v, p, partition_tap_field(plane.astype(v.data.dtype, copy=False)))


def pac_backward(v: Tensor, part: PartitionMap, p: ConvParams, grad_out: np.ndarray):
    """Analytic gradients (grad_v, grad_w, grad_b) with the tap field held fixed."""
    g = np.asarray(grad_out, dtype=v.data.dtype)
    if g.shape != v.shape[:1] + (p.c_out,) + v.shape[2:]:
        raise ShapeError(f"grad_out shape {g.shape} does not match pac output")
    mask = partition_tap_field(part.plane.astype(v.data.dtype, copy=False))
    return _backward_data(g, v.data, p.weight.data, p.stride, p.padding, mask, True, True)
