"""Synthetic dataset: procedural game-like frames, the simulate pipeline
(HR -> bicubic LR -> codec -> priors -> files), dihedral augmentation, and
in-memory sample loading for the trainer.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

from .codec import CodecConfig, CodingPriors, encode_decode
from .errors import ShapeError
from .fileio import (
    load_manifest,
    read_f32_plane,
    read_ppm,
    read_yuv,
    save_manifest,
    write_f32_plane,
    write_ppm,
    write_yuv,
)
from .frames import FrameRGB, bicubic_downsample2, rgb_to_yuv420, yuv420_to_rgb
from .pac import PartitionMap

GLYPH_ROWS, GLYPH_COLS = 7, 5


def synth_frames(seed: int, count: int, size) -> List[FrameRGB]:
    """Deterministic procedural frames with game-content edge statistics:
    flat fills, hard-edged sprites, glyph rasters, gradients, checkerboards."""
    h, w = size
    if h % 64 or w % 64:
        raise ShapeError(f"frame dims must be multiples of 64, got {size}")
    rng = np.random.default_rng(seed)
    return [_one_frame(rng, h, w) for _ in range(count)]


def _one_frame(rng, h, w) -> FrameRGB:
    canvas = np.empty((h, w, 3), np.float32)
    # smooth background gradient
    gx = rng.uniform(-0.4, 0.4, size=3)
    gy = rng.uniform(-0.4, 0.4, size=3)
    base = rng.uniform(0.2, 0.8, size=3)
    ys = np.linspace(0, 1, h)[:, None, None]
    xs = np.linspace(0, 1, w)[None, :, None]
    canvas[:] = np.clip(base + gx * xs + gy * ys, 0.0, 1.0)

    # checkerboard patch: dense strong edges that still survive 2x
    # downsampling (cell >= 4, so the LR pattern stays above Nyquist)
    ch = int(h * rng.uniform(0.45, 0.6)) // 8 * 8
    cw = int(w * rng.uniform(0.5, 0.65)) // 8 * 8
    cy = int(rng.integers(0, h - ch + 1))
    cx = int(rng.integers(0, w - cw + 1))
    cell = int(rng.choice([4, 4, 8]))
    c0 = rng.uniform(0.0, 0.3, size=3)
    c1 = rng.uniform(0.7, 1.0, size=3)
    yy, xx = np.mgrid[0:ch, 0:cw]
    checker = ((yy // cell + xx // cell) % 2).astype(np.float32)[..., None]
    canvas[cy : cy + ch, cx : cx + cw] = c0 * (1 - checker) + c1 * checker

    # hard-edged sprites: filled rectangles and discs with darker rims
    for _ in range(int(rng.integers(6, 12))):
        color = rng.uniform(0, 1, size=3)
        sh = int(rng.integers(h // 16, h // 4))
        sw = int(rng.integers(w // 16, w // 4))
        sy = int(rng.integers(0, h - sh))
        sx = int(rng.integers(0, w - sw))
        if rng.random() < 0.5:
            canvas[sy : sy + sh, sx : sx + sw] = color
            canvas[sy : sy + sh, sx] = color * 0.3
            canvas[sy, sx : sx + sw] = color * 0.3
        else:
            r = min(sh, sw) // 2
            ky, kx = np.mgrid[-r:r, -r:r]
            disc = ky * ky + kx * kx <= r * r
            region = canvas[sy : sy + 2 * r, sx : sx + 2 * r]
            region[disc] = color

    # striped region: 4px period survives the 2x downsample
    sh = int(h * rng.uniform(0.15, 0.25))
    sw = int(w * rng.uniform(0.3, 0.5))
    sy = int(rng.integers(0, h - sh))
    sx = int(rng.integers(0, w - sw))
    s0 = rng.uniform(0.0, 0.3, size=3)
    s1 = rng.uniform(0.7, 1.0, size=3)
    axis = int(rng.integers(2))
    idx = np.mgrid[0:sh, 0:sw][axis]
    stripes = ((idx // 2) % 2).astype(np.float32)[..., None]
    canvas[sy : sy + sh, sx : sx + sw] = s0 * (1 - stripes) + s1 * stripes

    # text-like bands of random 5x7 glyphs, rendered at 2x
    for _ in range(int(rng.integers(2, 4))):
        band_y = int(rng.integers(0, h - 2 * GLYPH_ROWS))
        fg = rng.uniform(0.8, 1.0, size=3)
        bg = rng.uniform(0.0, 0.2, size=3)
        x = int(rng.integers(0, w // 4))
        while x + 2 * GLYPH_COLS + 2 < w * 7 // 8:
            glyph = rng.random((GLYPH_ROWS, GLYPH_COLS)) < 0.45
            big = np.repeat(np.repeat(glyph, 2, axis=0), 2, axis=1)[..., None]
            patch = np.where(big, fg, bg).astype(np.float32)
            canvas[band_y : band_y + 2 * GLYPH_ROWS, x : x + 2 * GLYPH_COLS] = patch
            x += 2 * GLYPH_COLS + 2

    return FrameRGB(np.ascontiguousarray(canvas.transpose(2, 0, 1)))


def strong_edge_fraction(frame: FrameRGB, threshold_levels: float = 32.0) -> float:
    """Fraction of pixels whose luma forward-difference exceeds the threshold."""
    y = rgb_to_yuv420(frame).y
    dx = np.abs(np.diff(y, axis=1))
    dy = np.abs(np.diff(y, axis=0))
    strong = np.zeros(y.shape, bool)
    strong[:, :-1] |= dx > threshold_levels
    strong[:-1, :] |= dy > threshold_levels
    return float(strong.mean())


# ---------------------------------------------------------------------------
# Dihedral augmentation
# ---------------------------------------------------------------------------


def apply_dihedral(planes: np.ndarray, code: int) -> np.ndarray:
    """One of the 8 square symmetries on the trailing two axes.

    code 0..3: rotate by 90*code degrees; 4..7: horizontal flip, then rotate.
    """
    if not 0 <= code < 8:
        raise ValueError(f"dihedral code must be in [0, 8), got {code}")
    h, w = planes.shape[-2:]
    if code % 4 in (1, 3) and h != w:
        raise ShapeError("90/270 degree rotations require square patches")
    out = planes
    if code >= 4:
        out = out[..., ::-1]
    out = np.rot90(out, code % 4, axes=(-2, -1))
    return np.ascontiguousarray(out)


def augment(patch_lr: np.ndarray, patch_hr: np.ndarray, priors: Dict[str, np.ndarray], rng):
    """Apply one random dihedral transform consistently to LR, HR and priors."""
    code = int(rng.integers(0, 8))
    lr = apply_dihedral(patch_lr, code)
    hr = apply_dihedral(patch_hr, code)
    out_priors = {k: apply_dihedral(v, code) for k, v in priors.items()}
    return lr, hr, out_priors


# ---------------------------------------------------------------------------
# Simulate pipeline and sample loading
# ---------------------------------------------------------------------------

PRIOR_KEYS = ("prediction", "residual", "qp_plane", "partition")


def build_dataset(out_dir, seed: int, count: int, hr_size, qp: int) -> Path:
    """HR frames -> bicubic LR -> codec sim -> priors; everything on disk.

    Returns the manifest path. Two runs with identical arguments produce
    byte-identical trees.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = synth_frames(seed, count, hr_size)
    cfg = CodecConfig(qp=qp)
    samples = []
    for i, hr in enumerate(frames):
        fdir = out_dir / "frames" / f"frame_{i:03d}"
        fdir.mkdir(parents=True, exist_ok=True)
        lr = bicubic_downsample2(hr)
        decoded, priors = encode_decode(rgb_to_yuv420(lr), cfg)
        write_ppm(fdir / "hr.ppm", hr)
        write_ppm(fdir / "lr_bicubic.ppm", lr)
        write_yuv(fdir / "decoded.yuv", [decoded])
        plane_map = {
            "prediction": priors.prediction,
            "residual": priors.residual,
            "qp_plane": priors.qp_plane,
            "partition": priors.partition_map.plane,
        }
        for key in PRIOR_KEYS:
            write_f32_plane(fdir / f"{key}.f32", plane_map[key])
        sidecar = {
            "qp": qp,
            "lr_size": [lr.width, lr.height],
            "planes": {k: list(plane_map[k].shape) for k in PRIOR_KEYS},
            "cu_rects": [list(r) for r in priors.cu_rects],
        }
        (fdir / "priors.json").write_text(json.dumps(sidecar, indent=2) + "\n")
        rel = f"frames/frame_{i:03d}"
        samples.append(
            {
                "index": i,
                "hr": f"{rel}/hr.ppm",
                "lr_bicubic": f"{rel}/lr_bicubic.ppm",
                "decoded": f"{rel}/decoded.yuv",
                "priors": {k: f"{rel}/{k}.f32" for k in PRIOR_KEYS},
                "sidecar": f"{rel}/priors.json",
                "qp": qp,
                "hr_size": [hr.width, hr.height],
                "lr_size": [lr.width, lr.height],
            }
        )
    manifest = {
        "seed": seed,
        "qp": qp,
        "hr_size": list(hr_size[::-1]),
        "samples": samples,
    }
    path = out_dir / "manifest.json"
    save_manifest(path, manifest)
    return path


@dataclass
class Sample:
    """One training example, fully in memory."""

    index: int
    hr_rgb: np.ndarray  # (3, H, W) in [0, 1]
    lr_rgb: np.ndarray  # (3, h, w) in [0, 1], decoded
    prediction: np.ndarray  # (1, h, w), luma scale
    residual: np.ndarray
    qp_plane: np.ndarray
    partition: np.ndarray
    qp: int


def load_samples(manifest) -> List[Sample]:
    if not isinstance(manifest, dict):
        manifest = load_manifest(manifest)
    base = Path(manifest["_base_dir"])
    out = []
    for s in manifest["samples"]:
        w, h = s["lr_size"]
        decoded = read_yuv(base / s["decoded"], w, h)[0]
        out.append(
            Sample(
                index=s["index"],
                hr_rgb=read_ppm(base / s["hr"]).data,
                lr_rgb=yuv420_to_rgb(decoded).data,
                prediction=read_f32_plane(base / s["priors"]["prediction"], (1, h, w)),
                residual=read_f32_plane(base / s["priors"]["residual"], (1, h, w)),
                qp_plane=read_f32_plane(base / s["priors"]["qp_plane"], (1, h, w)),
                partition=read_f32_plane(base / s["priors"]["partition"], (1, h, w)),
                qp=s["qp"],
            )
        )
    return out


def sample_priors(sample: Sample) -> CodingPriors:
    return CodingPriors(
        qp_plane=sample.qp_plane[None],
        prediction=sample.prediction[None],
        residual=sample.residual[None],
        partition_map=PartitionMap(sample.partition[None]),
    )


def crop_patch(sample: Sample, x: int, y: int, patch: int, rng=None):
    """Aligned LR/HR/prior crops; optional random dihedral augmentation."""
    lr = sample.lr_rgb[:, y : y + patch, x : x + patch]
    hr = sample.hr_rgb[:, 2 * y : 2 * (y + patch), 2 * x : 2 * (x + patch)]
    priors = {
        "prediction": sample.prediction[:, y : y + patch, x : x + patch],
        "residual": sample.residual[:, y : y + patch, x : x + patch],
        "qp_plane": sample.qp_plane[:, y : y + patch, x : x + patch],
        "partition": sample.partition[:, y : y + patch, x : x + patch],
    }
    if rng is not None:
        lr, hr, priors = augment(lr, hr, priors, rng)
    return lr, hr, priors


def collate(batch) -> tuple:
    """Stack (lr, hr, priors) triples into batch arrays + CodingPriors."""
    lrs = np.stack([b[0] for b in batch])
    hrs = np.stack([b[1] for b in batch])
    priors = CodingPriors(
        qp_plane=np.stack([b[2]["qp_plane"] for b in batch]),
        prediction=np.stack([b[2]["prediction"] for b in batch]),
        residual=np.stack([b[2]["residual"] for b in batch]),
        partition_map=PartitionMap(np.stack([b[2]["partition"] for b in batch])),
    )
    return lrs, hrs, priors
