import numpy as np
import pytest

from cpgsr.errors import ShapeError
from cpgsr.metrics import psnr_plane, ssim_components, ssim_y


class TestPsnr:
    def test_identical_hits_cap(self):
        a = np.random.default_rng(0).uniform(0, 255, size=(16, 16))
        assert psnr_plane(a, a) == 100.0

    def test_uniform_one_level_error(self):
        a = np.full((32, 32), 100.0)
        assert psnr_plane(a, a + 1.0) == pytest.approx(10 * np.log10(65025), abs=1e-9)

    def test_checker_error_16(self):
        # every pixel off by +-16 in a checker pattern -> MSE = 256
        a = np.zeros((16, 16))
        b = np.where((np.indices(a.shape).sum(axis=0) % 2) == 0, 16.0, -16.0)
        assert psnr_plane(a, a + b) == pytest.approx(10 * np.log10(65025 / 256), abs=1e-9)

    def test_monotone_in_noise_amplitude(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 255, size=(64, 64))
        noise = rng.normal(size=a.shape)
        values = [psnr_plane(a, a + amp * noise) for amp in (1, 2, 4, 8, 16)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            psnr_plane(np.zeros((0, 4)), np.zeros((0, 4)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            psnr_plane(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_identical_is_one(self):
        a = np.random.default_rng(2).uniform(0, 255, size=(32, 32))
        assert ssim_y(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_constant_offset_components(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(50, 200, size=(32, 32))
        lum, con, struct = ssim_components(a, a + 20.0)
        assert lum < 1.0
        assert struct == pytest.approx(1.0, abs=1e-9)
        assert con == pytest.approx(1.0, abs=1e-9)

    def test_inverted_structure_negative(self):
        rng = np.random.default_rng(4)
        a = 127.5 + 80.0 * rng.standard_normal((48, 48)).clip(-1.5, 1.5)
        _, _, struct = ssim_components(a, 255.0 - a)
        assert struct < -0.9

    def test_small_plane_rejected(self):
        with pytest.raises(ShapeError):
            ssim_y(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_noise_reduces_ssim(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(0, 255, size=(64, 64))
        s1 = ssim_y(a, a + 5 * rng.standard_normal(a.shape))
        s2 = ssim_y(a, a + 25 * rng.standard_normal(a.shape))
        assert 1.0 > s1 > s2
