"""File formats: PPM/PGM images, raw YUV420p, raw float planes, the named-tensor
checkpoint container, and the JSON dataset manifest.

All round trips are lossless; the checkpoint container re-serializes
byte-identically after parsing.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    TruncatedFileError,
)
from .frames import FrameRGB, FrameYUV420

CHECKPOINT_MAGIC = b"CPGS"
CHECKPOINT_VERSION = 1
_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def _to_u8(plane):
    return np.clip(np.rint(plane), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PPM / PGM
# ---------------------------------------------------------------------------


def write_ppm(path, frame: FrameRGB):
    """Binary P6, 8-bit; input is (3, h, w) in [0, 1]."""
    h, w = frame.data.shape[1:]
    pixels = _to_u8(frame.data * 255.0).transpose(1, 2, 0)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(pixels.tobytes())


def read_ppm(path) -> FrameRGB:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P6":
            raise BadMagicError(f"{path}: expected P6, got {magic!r}")
        w, h = _read_header_dims(f, path)
        payload = f.read(w * h * 3)
    if len(payload) != w * h * 3:
        raise TruncatedFileError(f"{path}: expected {w * h * 3} bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, np.uint8).reshape(h, w, 3)
    return FrameRGB(pixels.transpose(2, 0, 1).astype(np.float32) / 255.0)


def write_pgm(path, plane: np.ndarray):
    """Binary P5, 8-bit; input is (h, w) in [0, 255]."""
    h, w = plane.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(_to_u8(plane).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise BadMagicError(f"{path}: expected P5, got {magic!r}")
        w, h = _read_header_dims(f, path)
        payload = f.read(w * h)
    if len(payload) != w * h:
        raise TruncatedFileError(f"{path}: expected {w * h} bytes, got {len(payload)}")
    return np.frombuffer(payload, np.uint8).reshape(h, w).astype(np.float32)


def _read_header_dims(f, path):
    dims = f.readline().split()
    maxval = f.readline().strip()
    if len(dims) != 2 or maxval != b"255":
        raise DimensionMismatchError(f"{path}: malformed header")
    return int(dims[0]), int(dims[1])


# ---------------------------------------------------------------------------
# Raw YUV420p (8-bit planar) and raw float planes
# ---------------------------------------------------------------------------


def frame_to_yuv_bytes(frame: FrameYUV420) -> bytes:
    return b"".join(_to_u8(p).tobytes() for p in (frame.y, frame.u, frame.v))


def write_yuv(path, frames):
    """Concatenated YUV420p frames, w*h*3/2 bytes each."""
    with open(path, "wb") as f:
        for frame in frames:
            f.write(frame_to_yuv_bytes(frame))


def read_yuv(path, width, height) -> list:
    """Read every frame in the file; size must divide evenly."""
    frame_bytes = width * height * 3 // 2
    data = Path(path).read_bytes()
    if len(data) == 0 or len(data) % frame_bytes:
        raise TruncatedFileError(
            f"{path}: size {len(data)} is not a multiple of frame size {frame_bytes}"
        )
    frames = []
    ys = width * height
    cs = ys // 4
    ch, cw = height // 2, width // 2
    for off in range(0, len(data), frame_bytes):
        chunk = data[off : off + frame_bytes]
        y = np.frombuffer(chunk[:ys], np.uint8).reshape(height, width)
        u = np.frombuffer(chunk[ys : ys + cs], np.uint8).reshape(ch, cw)
        v = np.frombuffer(chunk[ys + cs :], np.uint8).reshape(ch, cw)
        frames.append(
            FrameYUV420(y.astype(np.float32), u.astype(np.float32), v.astype(np.float32))
        )
    return frames


def write_f32_plane(path, arr: np.ndarray):
    np.ascontiguousarray(arr, dtype="<f4").tofile(path)


def read_f32_plane(path, shape) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4")
    want = int(np.prod(shape))
    if arr.size != want:
        raise DimensionMismatchError(f"{path}: has {arr.size} floats, expected {want}")
    return arr.reshape(shape)


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------


def save_checkpoint(path, tensors: dict):
    """Write named arrays: magic, version, count, then per-entry records."""
    Path(path).write_bytes(serialize_checkpoint(tensors))


def serialize_checkpoint(tensors: dict) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype not in _TAG_FOR_DTYPE:
            arr = arr.astype(np.float32)
        tag = _TAG_FOR_DTYPE[arr.dtype]
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", tag, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())
    return b"".join(parts)


def load_checkpoint(path) -> dict:
    return parse_checkpoint(Path(path).read_bytes())


def parse_checkpoint(blob: bytes) -> dict:
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"bad checkpoint magic {blob[:4]!r}")
    view = memoryview(blob)
    off = 4

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise TruncatedFileError(f"checkpoint truncated at byte {off}")
        chunk = view[off : off + n]
        off += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != CHECKPOINT_VERSION:
        raise DimensionMismatchError(f"unsupported checkpoint version {version}")
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        tag, rank = struct.unpack("<BB", take(2))
        if tag not in _DTYPE_TAGS:
            raise DimensionMismatchError(f"unknown dtype tag {tag}")
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        dtype = _DTYPE_TAGS[tag]
        payload = take(int(np.prod(shape, dtype=np.int64)) * dtype.itemsize)
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if off != len(blob):
        raise DimensionMismatchError(f"{len(blob) - off} trailing bytes in checkpoint")
    return tensors


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------


def save_manifest(path, manifest: dict):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    manifest["_base_dir"] = str(Path(path).parent)
    return manifest


def validate_manifest(manifest: dict):
    """Check that every referenced file exists and dims are consistent."""
    base = Path(manifest.get("_base_dir", "."))
    for sample in manifest["samples"]:
        w, h = sample["lr_size"]
        for key in ("hr", "decoded", "sidecar"):
            if not (base / sample[key]).exists():
                raise FileNotFoundError(base / sample[key])
        for key, rel in sample["priors"].items():
            path = base / rel
            if not path.exists():
                raise FileNotFoundError(path)
            n_floats = path.stat().st_size // 4
            if n_floats != w * h:
                raise DimensionMismatchError(
                    f"{path}: {n_floats} floats, expected {w * h} for plane {key}"
                )
        if (2 * w, 2 * h) != tuple(sample["hr_size"]):
            raise DimensionMismatchError(
                f"sample {sample['index']}: hr_size {sample['hr_size']} != 2x lr_size"
            )
