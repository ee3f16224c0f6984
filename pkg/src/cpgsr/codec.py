"""Synthetic intra-only codec: quadtree partition, DC prediction, DCT + uniform
quantization. Stands in for a real encoder/decoder pair and emits the four
coding priors the SR network consumes (QP plane, prediction, residual,
partition map).

The quantization step follows the step-doubles-every-6-QP convention:
Q = 2^((qp - 4) / 6). The partition split threshold is QP-coupled the same
way, so higher QP yields coarser partitions.

Everything is deterministic: same frame + config -> identical output.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .frames import FrameYUV420
from .pac import PartitionMap

Rect = Tuple[int, int, int]  # (top, left, side)


@dataclass
class CodecConfig:
    qp: int
    max_cu: int = 64
    min_cu: int = 4
    split_threshold_base: float = 25.0

    def __post_init__(self):
        if not 0 <= self.qp <= 63:
            raise ConfigError(f"qp must be in [0, 63], got {self.qp}")
        for name in ("max_cu", "min_cu"):
            v = getattr(self, name)
            if v < 1 or v & (v - 1):
                raise ConfigError(f"{name} must be a power of two, got {v}")
        if self.min_cu > self.max_cu:
            raise ConfigError("min_cu may not exceed max_cu")

    @property
    def qstep(self) -> float:
        return 2.0 ** ((self.qp - 4) / 6.0)

    @property
    def split_threshold(self) -> float:
        return self.split_threshold_base * 2.0 ** ((self.qp - 32) / 6.0)


@dataclass
class CodingPriors:
    """Per-frame side information, spatially aligned with the LR frame."""

    qp_plane: np.ndarray  # (1, 1, h, w), constant qp/63
    prediction: np.ndarray  # (1, 1, h, w), luma scale [0, 255]
    residual: np.ndarray  # (1, 1, h, w), decoded minus prediction
    partition_map: PartitionMap
    cu_rects: List[Rect] = field(default_factory=list)  # padded-grid coordinates


@lru_cache(maxsize=None)
def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix."""
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * k + 1) * j / (2 * n))
    c[0] *= np.sqrt(1.0 / n)
    c[1:] *= np.sqrt(2.0 / n)
    return c


def dct2(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT-II of a square block (float64)."""
    c = _dct_matrix(block.shape[0])
    return c @ np.asarray(block, dtype=np.float64) @ c.T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    c = _dct_matrix(coeffs.shape[0])
    return c.T @ np.asarray(coeffs, dtype=np.float64) @ c


def _pad_to_grid(plane: np.ndarray, grid: int) -> np.ndarray:
    h, w = plane.shape
    ph = (-h) % grid
    pw = (-w) % grid
    if ph == 0 and pw == 0:
        return plane
    return np.pad(plane, ((0, ph), (0, pw)), mode="edge")


def quadtree_partition(luma: np.ndarray, cfg: CodecConfig):
    """Recursive variance-driven split of the (padded) luma plane.

    Returns (rects, pa_plane) where rects tile the padded plane exactly once
    and pa_plane holds log2(side)/6 per pixel at padded resolution.
    """
    if luma.ndim != 2:
        raise ShapeError(f"luma plane must be 2D, got {luma.shape}")
    padded = _pad_to_grid(np.asarray(luma, dtype=np.float32), cfg.max_cu)
    ph, pw = padded.shape
    if ph % cfg.min_cu or pw % cfg.min_cu:
        raise ShapeError(f"padded dims {(ph, pw)} not multiples of min_cu={cfg.min_cu}")
    thr = cfg.split_threshold
    rects: List[Rect] = []

    def split(y, x, side):
        block = padded[y : y + side, x : x + side]
        if side > cfg.min_cu and float(np.var(block, dtype=np.float64)) > thr:
            half = side // 2
            for dy in (0, half):
                for dx in (0, half):
                    split(y + dy, x + dx, half)
        else:
            rects.append((y, x, side))

    for ty in range(0, ph, cfg.max_cu):
        for tx in range(0, pw, cfg.max_cu):
            split(ty, tx, cfg.max_cu)

    pa = np.empty((ph, pw), dtype=np.float32)
    for y, x, side in rects:
        pa[y : y + side, x : x + side] = np.float32(np.log2(side) / 6.0)
    return rects, pa


def _code_plane(plane: np.ndarray, rects, qstep: float):
    """DC-predict, transform, quantize and reconstruct one plane.

    Returns (decoded, prediction, residual) float32 planes satisfying
    decoded == prediction + residual bit-exactly: the reconstructed residual
    is range-clipped so that adding it back lands in [0, 255], and 'decoded'
    is defined as exactly that float32 sum.
    """
    h, w = plane.shape
    pred_plane = np.empty((h, w), dtype=np.float32)
    resid_plane = np.empty((h, w), dtype=np.float32)
    data64 = np.asarray(plane, dtype=np.float64)
    for y, x, side in rects:
        cu = data64[y : y + side, x : x + side]
        dc = cu.mean()
        coeffs = dct2(cu - dc)
        rec = idct2(np.round(coeffs / qstep) * qstep)
        pred32 = np.float32(dc)
        rec32 = rec.astype(np.float32)
        lo = -pred32
        hi = np.float32(255.0) - pred32
        pred_plane[y : y + side, x : x + side] = pred32
        resid_plane[y : y + side, x : x + side] = np.minimum(np.maximum(rec32, lo), hi)
    decoded = pred_plane + resid_plane
    return decoded, pred_plane, resid_plane


def encode_decode(frame: FrameYUV420, cfg: CodecConfig):
    """Run the simulator on one frame.

    Returns (decoded FrameYUV420, CodingPriors). The priors come from the
    luma path; chroma reuses the luma partition at half scale.
    """
    h, w = frame.y.shape
    rects, pa_padded = quadtree_partition(frame.y, cfg)
    y_padded = _pad_to_grid(frame.y, cfg.max_cu)
    dec_y, pred_y, resid_y = _code_plane(y_padded, rects, cfg.qstep)

    chroma_rects = [(y // 2, x // 2, side // 2) for (y, x, side) in rects]
    dec_u, _, _ = _code_plane(_pad_to_grid(frame.u, cfg.max_cu // 2), chroma_rects, cfg.qstep)
    dec_v, _, _ = _code_plane(_pad_to_grid(frame.v, cfg.max_cu // 2), chroma_rects, cfg.qstep)

    decoded = FrameYUV420(
        y=dec_y[:h, :w],
        u=dec_u[: h // 2, : w // 2],
        v=dec_v[: h // 2, : w // 2],
    )
    priors = CodingPriors(
        qp_plane=np.full((1, 1, h, w), cfg.qp / 63.0, dtype=np.float32),
        prediction=pred_y[:h, :w].reshape(1, 1, h, w),
        residual=resid_y[:h, :w].reshape(1, 1, h, w),
        partition_map=PartitionMap(pa_padded[:h, :w].reshape(1, 1, h, w)),
        cu_rects=rects,
    )
    return decoded, priors
