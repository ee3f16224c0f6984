import numpy as np
import pytest

from cpgsr.errors import ShapeError
from cpgsr.frames import (
    DOWN2_TAPS,
    FrameRGB,
    FrameYUV420,
    UP2_EVEN_TAPS,
    UP2_ODD_TAPS,
    _cubic,
    bicubic_downsample2,
    bicubic_upsample2,
    downsample2_plane,
    rgb_to_yuv420,
    yuv420_to_rgb,
)
from cpgsr.metrics import psnr_plane


class TestColor:
    def test_gray_has_neutral_chroma(self):
        rgb = FrameRGB(np.full((3, 8, 8), 0.42, np.float32))
        yuv = rgb_to_yuv420(rgb)
        np.testing.assert_allclose(yuv.u, 128.0, atol=1e-4)
        np.testing.assert_allclose(yuv.v, 128.0, atol=1e-4)

    def test_white_luma(self):
        yuv = rgb_to_yuv420(FrameRGB(np.ones((3, 4, 4), np.float32)))
        np.testing.assert_allclose(yuv.y, 255.0, atol=1e-4)

    def test_roundtrip_smooth_image(self):
        rng = np.random.default_rng(0)
        # chroma-smooth content: a coarse random image blown up bilinearly
        coarse = rng.uniform(0.1, 0.9, size=(3, 8, 8)).astype(np.float32)
        img = np.repeat(np.repeat(coarse, 8, axis=1), 8, axis=2)
        back = yuv420_to_rgb(rgb_to_yuv420(FrameRGB(img)))
        y0 = rgb_to_yuv420(FrameRGB(img)).y
        y1 = rgb_to_yuv420(back).y
        assert psnr_plane(y0, y1) >= 50.0

    def test_odd_dims_rejected(self):
        with pytest.raises(ShapeError):
            rgb_to_yuv420(FrameRGB(np.zeros((3, 5, 8), np.float32)))

    def test_yuv_shape_validation(self):
        with pytest.raises(ShapeError):
            FrameYUV420(
                y=np.zeros((8, 8)), u=np.zeros((3, 4)), v=np.zeros((4, 4))
            )


class TestDownsample:
    def test_constant_preserved(self):
        img = FrameRGB(np.full((3, 16, 16), 0.3, np.float32))
        out = bicubic_downsample2(img)
        assert out.data.shape == (3, 8, 8)
        np.testing.assert_allclose(out.data, 0.3, atol=1e-6)

    def test_linear_ramp_reproduced(self):
        h, w = 16, 32
        ramp = np.broadcast_to(np.arange(w, dtype=np.float32) / w, (h, w))
        img = FrameRGB(np.stack([ramp] * 3))
        out = bicubic_downsample2(img).data[0]
        # interior of the halved ramp must remain linear with doubled step
        interior = out[4, 2:-2]
        steps = np.diff(interior)
        np.testing.assert_allclose(steps, 2.0 / w, atol=1e-5)
        # and values sit at the half-pixel-mapped source coordinate 2*o + 0.5
        want = (2 * np.arange(2, w // 2 - 2) + 0.5) / w
        np.testing.assert_allclose(interior, want, atol=1e-5)

    def test_delta_footprint_matches_stretched_kernel(self):
        # response to a delta reads out the anti-aliased kernel taps:
        # cubic(0.25), cubic(0.75), cubic(1.25), cubic(1.75), all halved
        plane = np.zeros((2, 32), np.float32)
        plane[:, 16] = 1.0
        out = downsample2_plane(plane)[0]
        taps = {
            6: _cubic(1.75) / 2,
            7: _cubic(0.75) / 2,
            8: _cubic(0.25) / 2,
            9: _cubic(1.25) / 2,
        }
        for idx, want in taps.items():
            assert out[idx] == pytest.approx(want, abs=1e-6)
        assert abs(out[:5]).max() == 0.0
        assert abs(out[11:]).max() == 0.0

    def test_taps_sum_to_one(self):
        assert DOWN2_TAPS.sum() == pytest.approx(1.0, abs=1e-6)
        assert UP2_EVEN_TAPS.sum() == pytest.approx(1.0, abs=1e-6)
        assert UP2_ODD_TAPS.sum() == pytest.approx(1.0, abs=1e-6)

    def test_odd_dims_rejected(self):
        with pytest.raises(ShapeError):
            bicubic_downsample2(FrameRGB(np.zeros((3, 6, 7), np.float32)))


class TestUpsample:
    def test_shapes_and_constant(self):
        img = FrameRGB(np.full((3, 8, 8), 0.6, np.float32))
        out = bicubic_upsample2(img)
        assert out.data.shape == (3, 16, 16)
        np.testing.assert_allclose(out.data, 0.6, atol=1e-6)

    def test_linear_ramp_interpolated(self):
        w = 16
        ramp = np.broadcast_to(np.arange(w, dtype=np.float32) / w, (8, w)).copy()
        img = FrameRGB(np.stack([ramp] * 3))
        out = bicubic_upsample2(img).data[0]
        interior = out[8, 4:-4]
        np.testing.assert_allclose(np.diff(interior), 0.5 / w, atol=1e-5)
