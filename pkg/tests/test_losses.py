import numpy as np
import pytest

from cpgsr.errors import ShapeError
from cpgsr.gradcheck import gradcheck
from cpgsr.losses import LossWeights, pffl, pffl_weights, total_loss
from cpgsr.tensor import Tensor, l1


def tone(freq_y, freq_x, amp, h=32, w=32):
    """Real cosine tile; quarter/Nyquist frequencies make the FFT exact."""
    yy, xx = np.mgrid[0:h, 0:w]
    return (amp * np.cos(2 * np.pi * (freq_y * yy + freq_x * xx) / 32)).astype(np.float32)


class TestPffl:
    def test_identical_inputs_zero_loss_zero_grad(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, size=(2, 3, 64, 64)).astype(np.float32)
        sr = Tensor(x, requires_grad=True)
        hr = Tensor(x.copy())
        loss = pffl(sr, hr)
        assert float(loss.data) == 0.0
        loss.backward()
        assert not sr.grad.any()

    def test_single_bin_analytic(self):
        # perturbation at the quarter frequency (8, 0): exact FFT arithmetic.
        # the ortho spectrum of A*cos(2*pi*8y/32) has two bins of magnitude
        # (1024/2) * A / 32 = 16*A; after per-tile max normalization both
        # weights are 1, so loss = 2 * (16 A)^2 / sqrt(H*W)
        amp = 0.25
        sr = np.zeros((1, 3, 32, 32), np.float32)
        hr = sr.copy()
        hr[0, 0] += tone(8, 0, amp)
        value = float(pffl(Tensor(sr), Tensor(hr)).data)
        want = 2.0 * (16.0 * amp) ** 2 / np.sqrt(32.0 * 32.0)
        assert abs(value - want) / want <= 1e-6

    def test_amplitude_scaling_law(self):
        # with exponent 1 the spectral weight scales with the error magnitude,
        # so the probe's contribution scales as amplitude^3. A fixed dominant
        # tone pins the per-tile normalization so the law is visible.
        base = np.zeros((1, 3, 32, 32), np.float32)
        fixed = tone(0, 16, 0.5)

        def loss_at(amp):
            hr = base.copy()
            hr[0, 0] += fixed + tone(8, 0, amp)
            return float(pffl(Tensor(base), Tensor(hr)).data)

        c0 = loss_at(0.0)
        d1 = loss_at(2**-6) - c0
        d2 = loss_at(2**-5) - c0
        assert d1 > 0
        assert abs(d2 / d1 - 8.0) <= 1e-4

    def test_weights_locked_no_grad_through_weight(self):
        rng = np.random.default_rng(1)
        sr = Tensor(rng.uniform(0, 1, size=(1, 3, 32, 32)).astype(np.float64), requires_grad=True)
        hr = Tensor(rng.uniform(0, 1, size=(1, 3, 32, 32)).astype(np.float64))
        frozen = pffl_weights(sr.data, hr.data)

        def f(s):
            return pffl(s, hr, weights=frozen)

        report = gradcheck(f, [sr], tol=1e-3, max_entries=40)
        assert report.passed, f"max rel err {report.max_rel_error}"

    def test_nonnegative_and_symmetric_weights(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(0, 1, size=(1, 3, 32, 32)).astype(np.float32)
        b = rng.uniform(0, 1, size=(1, 3, 32, 32)).astype(np.float32)
        w_ab = pffl_weights(a, b)
        w_ba = pffl_weights(b, a)
        np.testing.assert_allclose(w_ab, w_ba, atol=1e-6)
        assert w_ab.min() >= 0.0 and w_ab.max() <= 1.0
        assert float(pffl(Tensor(a), Tensor(b)).data) >= 0.0
        assert float(pffl(Tensor(a), Tensor(b)).data) == pytest.approx(
            float(pffl(Tensor(b), Tensor(a)).data), rel=1e-6
        )

    def test_dims_must_tile(self):
        with pytest.raises(ShapeError):
            pffl(Tensor(np.zeros((1, 3, 48, 64), np.float32)), Tensor(np.zeros((1, 3, 48, 64), np.float32)))

    def test_batch_mean(self):
        rng = np.random.default_rng(3)
        a1 = rng.uniform(0, 1, size=(1, 3, 32, 32)).astype(np.float32)
        b1 = rng.uniform(0, 1, size=(1, 3, 32, 32)).astype(np.float32)
        single = float(pffl(Tensor(a1), Tensor(b1)).data)
        doubled = float(
            pffl(
                Tensor(np.concatenate([a1, a1])), Tensor(np.concatenate([b1, b1]))
            ).data
        )
        assert doubled == pytest.approx(single, rel=1e-6)


class TestTotalLoss:
    def test_identical_zero(self):
        x = Tensor(np.random.default_rng(4).uniform(size=(1, 3, 32, 32)).astype(np.float32))
        assert float(total_loss(x, x).data) == 0.0

    def test_beta_zero_is_pure_l1(self):
        rng = np.random.default_rng(5)
        a = Tensor(rng.uniform(size=(1, 3, 32, 32)).astype(np.float32))
        b = Tensor(rng.uniform(size=(1, 3, 32, 32)).astype(np.float32))
        lw = LossWeights(alpha=0.9, beta=0.0)
        got = float(total_loss(a, b, lw).data)
        assert got == pytest.approx(0.9 * float(l1(a, b).data), rel=1e-7)

    def test_decomposes_exactly(self):
        # double-precision replay: the recombination bound is absolute
        rng = np.random.default_rng(6)
        a = Tensor(rng.uniform(size=(2, 3, 64, 64)))
        b = Tensor(rng.uniform(size=(2, 3, 64, 64)))
        total = float(total_loss(a, b).data)
        parts = 0.9 * float(l1(a, b).data) + 0.1 * float(pffl(a, b).data)
        assert abs(total - parts) <= 1e-7

    def test_decomposes_in_training_regime(self):
        # float32 path at realistic (small) reconstruction errors
        rng = np.random.default_rng(7)
        a = rng.uniform(size=(2, 3, 64, 64)).astype(np.float32)
        b = (a + rng.normal(0, 0.02, size=a.shape)).astype(np.float32)
        ta, tb = Tensor(a), Tensor(b)
        total = float(total_loss(ta, tb).data)
        parts = 0.9 * float(l1(ta, tb).data) + 0.1 * float(pffl(ta, tb).data)
        assert abs(total - parts) <= 1e-5 * max(1.0, abs(total))

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(alpha=-0.1)
