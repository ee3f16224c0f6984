import numpy as np
import pytest

from cpgsr.codec import (
    CodecConfig,
    _code_plane,
    dct2,
    encode_decode,
    idct2,
    quadtree_partition,
)
from cpgsr.errors import ConfigError
from cpgsr.frames import FrameYUV420
from cpgsr.metrics import psnr_plane


def make_frame(rng, h=128, w=128, kind="mixed"):
    if kind == "constant":
        y = np.full((h, w), 87.25, np.float32)
    elif kind == "noise":
        y = rng.uniform(0, 255, size=(h, w)).astype(np.float32)
    else:
        y = np.zeros((h, w), np.float32)
        y[:, : w // 2] = 120.0
        y[:, w // 2 :] = rng.uniform(0, 255, size=(h, w // 2))
    u = np.full((h // 2, w // 2), 128.0, np.float32)
    v = np.full((h // 2, w // 2), 128.0, np.float32)
    return FrameYUV420(y=y, u=u, v=v)


class TestConfig:
    def test_qp_range_checked(self):
        with pytest.raises(ConfigError):
            CodecConfig(qp=64)
        with pytest.raises(ConfigError):
            CodecConfig(qp=-1)

    def test_power_of_two_checked(self):
        with pytest.raises(ConfigError):
            CodecConfig(qp=30, max_cu=48)

    def test_qstep_doubles_every_six(self):
        assert CodecConfig(qp=16).qstep == pytest.approx(2 * CodecConfig(qp=10).qstep)


class TestDct:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for side in (4, 8, 16, 32, 64):
            block = rng.uniform(-128, 128, size=(side, side))
            back = idct2(dct2(block))
            rel = np.abs(back - block).max() / max(np.abs(block).max(), 1e-12)
            assert rel <= 1e-6

    def test_orthonormal_energy(self):
        rng = np.random.default_rng(1)
        block = rng.normal(size=(8, 8))
        np.testing.assert_allclose((dct2(block) ** 2).sum(), (block**2).sum(), rtol=1e-12)


class TestQuadtree:
    def test_constant_frame_never_splits(self):
        cfg = CodecConfig(qp=32)
        rects, pa = quadtree_partition(np.full((128, 128), 64.0, np.float32), cfg)
        assert all(side == 64 for _, _, side in rects)
        assert np.all(pa == 1.0)

    def test_noise_frame_fully_splits(self):
        rng = np.random.default_rng(2)
        cfg = CodecConfig(qp=32)
        luma = rng.uniform(0, 255, size=(64, 64)).astype(np.float32)
        rects, pa = quadtree_partition(luma, cfg)
        assert all(side == 4 for _, _, side in rects)
        np.testing.assert_allclose(pa, np.log2(4) / 6, atol=1e-7)

    def test_half_flat_half_noisy_structure(self):
        rng = np.random.default_rng(3)
        luma = np.full((128, 128), 100.0, np.float32)
        luma[:, 64:] = rng.uniform(0, 255, size=(128, 64)).astype(np.float32)
        rects, pa = quadtree_partition(luma, CodecConfig(qp=32))
        flat_sides = {s for (y, x, s) in rects if x + s <= 64}
        noisy_sides = {s for (y, x, s) in rects if x >= 64}
        assert max(flat_sides) > max(noisy_sides)
        # map is piecewise constant on every emitted rect
        for y, x, s in rects:
            block = pa[y : y + s, x : x + s]
            assert block.min() == block.max()

    def test_rects_tile_exactly_once(self):
        rng = np.random.default_rng(4)
        luma = rng.uniform(0, 255, size=(96, 160)).astype(np.float32)
        rects, pa = quadtree_partition(luma, CodecConfig(qp=40))
        cover = np.zeros(pa.shape, np.int32)
        for y, x, s in rects:
            cover[y : y + s, x : x + s] += 1
        assert cover.min() == 1 and cover.max() == 1

    def test_higher_qp_coarser(self):
        rng = np.random.default_rng(5)
        luma = (rng.uniform(0, 255, size=(128, 128)) * 0.25 + 100).astype(np.float32)
        n_low = len(quadtree_partition(luma, CodecConfig(qp=20))[0])
        n_high = len(quadtree_partition(luma, CodecConfig(qp=50))[0])
        assert n_high <= n_low


class TestEncodeDecode:
    def test_constant_frame_exact(self):
        frame = make_frame(None, kind="constant")
        for qp in (0, 22, 45, 63):
            decoded, priors = encode_decode(frame, CodecConfig(qp=qp))
            np.testing.assert_array_equal(decoded.y, frame.y)
            assert not priors.residual.any()

    def test_prediction_plus_residual_is_decoded_bitexact(self):
        rng = np.random.default_rng(6)
        for kind in ("mixed", "noise"):
            frame = make_frame(rng, kind=kind)
            decoded, priors = encode_decode(frame, CodecConfig(qp=37))
            recomposed = priors.prediction[0, 0] + priors.residual[0, 0]
            np.testing.assert_array_equal(recomposed, decoded.y)

    def test_decoded_range(self):
        rng = np.random.default_rng(7)
        frame = make_frame(rng, kind="noise")
        decoded, _ = encode_decode(frame, CodecConfig(qp=55))
        assert decoded.y.min() >= 0.0 and decoded.y.max() <= 255.0

    def test_qp0_near_lossless(self):
        rng = np.random.default_rng(8)
        frame = make_frame(rng, kind="mixed")
        decoded, _ = encode_decode(frame, CodecConfig(qp=0))
        assert psnr_plane(decoded.y, frame.y) >= 50.0

    def test_psnr_monotone_in_qp(self):
        rng = np.random.default_rng(9)
        frame = make_frame(rng, kind="mixed")
        values = []
        for qp in (10, 22, 32, 42, 52):
            decoded, _ = encode_decode(frame, CodecConfig(qp=qp))
            values.append(psnr_plane(decoded.y, frame.y))
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_quantization_error_bound(self):
        rng = np.random.default_rng(10)
        cfg = CodecConfig(qp=37)
        block = rng.uniform(0, 255, size=(16, 16))
        coeffs = dct2(block - block.mean())
        deq = np.round(coeffs / cfg.qstep) * cfg.qstep
        assert np.abs(coeffs - deq).max() <= cfg.qstep / 2 + 1e-9

    def test_priors_aligned_and_deterministic(self):
        rng = np.random.default_rng(11)
        frame = make_frame(rng, h=96, w=160, kind="mixed")
        d1, p1 = encode_decode(frame, CodecConfig(qp=30))
        d2, p2 = encode_decode(frame, CodecConfig(qp=30))
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(p1.partition_map.plane, p2.partition_map.plane)
        assert p1.prediction.shape == (1, 1, 96, 160)
        assert p1.qp_plane.shape == (1, 1, 96, 160)
        assert np.all(p1.qp_plane == np.float32(30 / 63))

    def test_partition_levels_are_the_documented_set(self):
        rng = np.random.default_rng(12)
        frame = make_frame(rng, kind="mixed")
        _, priors = encode_decode(frame, CodecConfig(qp=37))
        levels = np.unique(priors.partition_map.plane)
        allowed = {np.float32(np.log2(s) / 6) for s in (4, 8, 16, 32, 64)}
        assert set(levels.tolist()) <= {float(a) for a in allowed}


class TestClipExactness:
    def test_adversarial_prediction_values(self):
        # residual clipping must keep pred + resid inside [0, 255] after
        # float32 rounding, for predictions across the whole range
        rng = np.random.default_rng(13)
        pred = np.concatenate(
            [
                rng.uniform(0, 255, 30000),
                rng.uniform(0, 1e-5, 10000),
                255.0 - rng.uniform(0, 1e-5, 10000),
            ]
        ).astype(np.float32)
        rec = rng.uniform(-600, 600, pred.size).astype(np.float32)
        lo = -pred
        hi = np.float32(255.0) - pred
        resid = np.minimum(np.maximum(rec, lo), hi)
        decoded = pred + resid
        assert decoded.min() >= 0.0 and decoded.max() <= 255.0
        np.testing.assert_array_equal(pred + resid, decoded)

    def test_code_plane_output_contract(self):
        rng = np.random.default_rng(14)
        plane = rng.uniform(0, 255, size=(64, 64)).astype(np.float32)
        rects = [(0, 0, 64)]
        decoded, pred, resid = _code_plane(plane, rects, qstep=45.0)
        np.testing.assert_array_equal(pred + resid, decoded)
        assert decoded.min() >= 0.0 and decoded.max() <= 255.0
