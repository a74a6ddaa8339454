import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SR, buffer, direct_convolution
from diffdsp.autodiff import Value, finite_diff_check
from diffdsp.filters import (
    FrameFilterBank,
    ImpulseResponse,
    NoiseParams,
    filtered_noise,
    fir_from_magnitudes,
    ltv_fir,
    ltv_fir_apply,
    reverb_apply,
)
from diffdsp.signal import stft_magnitude


def band_power(audio, lo, hi, fft_size=1024):
    spec = stft_magnitude(audio, fft_size).magnitudes ** 2
    freqs = np.arange(spec.shape[1]) * SR / fft_size
    return spec[:, (freqs >= lo) & (freqs < hi)].sum()


class TestDesign:
    def test_unit_magnitudes_give_delayed_impulse(self):
        kernel = fir_from_magnitudes(np.ones(65))
        expected = np.zeros(257)
        expected[128] = 1.0
        assert np.max(np.abs(kernel - expected)) < 1e-12

    def test_zero_magnitudes(self):
        assert not fir_from_magnitudes(np.zeros(65)).any()

    def test_linear_phase(self, rng):
        kernel = fir_from_magnitudes(rng.uniform(0, 2, 65))
        assert np.max(np.abs(kernel - kernel[::-1])) < 1e-9
        zero_phase = np.roll(kernel, -128)
        assert np.max(np.abs(np.fft.fft(zero_phase).imag)) < 1e-9

    def test_batch_matches_single(self, rng):
        mags = rng.uniform(0, 1, (5, 65))
        batch = fir_from_magnitudes(mags)
        assert np.allclose(batch[3], fir_from_magnitudes(mags[3]), atol=1e-15)

    def test_rejects_negative_and_even(self):
        with pytest.raises(ValueError):
            fir_from_magnitudes(-np.ones(65))
        with pytest.raises(ValueError):
            fir_from_magnitudes(np.ones(65), window_size=256)

    def test_unit_filter_keeps_white_noise_flat(self, rng):
        noise = rng.uniform(-1, 1, 64 * 250)
        bank = FrameFilterBank(np.tile(fir_from_magnitudes(np.ones(65)), (250, 1)), 64)
        out = ltv_fir_apply(buffer(noise), bank)
        ratio = stft_magnitude(out, 512).magnitudes[1:] / stft_magnitude(buffer(noise), 512).magnitudes[:-1]
        # output is the input delayed by 128 samples = one STFT hop at size 512
        assert np.allclose(ratio, 1.0, atol=1e-9)

    def test_single_passband(self, rng):
        mags = np.full(65, 1e-7)
        mags[20] = 1.0
        bank = FrameFilterBank(np.tile(fir_from_magnitudes(mags), (250, 1)), 64)
        out = ltv_fir_apply(buffer(rng.uniform(-1, 1, 64 * 250)), bank)
        center = 20 * 125.0
        inside = band_power(out, center - 125, center + 125)
        assert inside / band_power(out, 0, SR / 2 + 1) > 0.9


class TestLTV:
    def test_constant_bank_is_direct_convolution(self, rng):
        x = rng.normal(size=512)
        h = rng.normal(size=57)
        out = ltv_fir(x, np.tile(h, (8, 1)))
        assert np.max(np.abs(out - direct_convolution(x, h))) < 1e-9

    def test_varying_bank_is_framewise_direct_sum(self, rng):
        x = rng.normal(size=6 * 16)
        kernels = rng.normal(size=(6, 9))
        expected = np.zeros(x.size)
        for n in range(x.size):
            for m in range(x.size):
                lag = n - m
                if 0 <= lag < 9:
                    expected[n] += kernels[m // 16, lag] * x[m]
        assert np.max(np.abs(ltv_fir(x, kernels) - expected)) < 1e-9

    def test_identity_kernel_delays(self, rng):
        x = rng.normal(size=1024)
        delta = np.zeros(257)
        delta[128] = 1.0
        out = ltv_fir_apply(buffer(x), FrameFilterBank(np.tile(delta, (4, 1)), 256)).samples
        assert np.allclose(out[128:], x[:-128], atol=1e-12) and np.allclose(out[:128], 0, atol=1e-12)

    def test_zero_kernels(self, rng):
        out = ltv_fir(rng.normal(size=256), np.zeros((4, 33)))
        assert np.max(np.abs(out)) < 1e-15

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ltv_fir_apply(buffer(np.ones(1000)), FrameFilterBank(np.ones((4, 5)), 256))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 1000))
    def test_linear(self, a, b, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=(2, 320))
        bank = rng.normal(size=(5, 21))
        lhs = ltv_fir(a * x + b * y, bank)
        rhs = a * ltv_fir(x, bank) + b * ltv_fir(y, bank)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


class TestNoise:
    def test_floor_is_near_silent(self):
        out = filtered_noise(NoiseParams(np.full((50, 65), -50.0)), 3200, seed=1)
        assert np.sqrt(np.mean(out.samples**2)) < 1e-5

    def test_flat_magnitudes_flat_spectrum(self):
        out = filtered_noise(NoiseParams(np.full((500, 65), 50.0)), 32000, seed=2)
        bands = [band_power(out, lo, lo + 500) for lo in range(0, 8000, 500)]
        db = 10 * np.log10(np.array(bands) / np.mean(bands))
        assert np.ptp(db) < 3.0

    def test_deterministic(self):
        params = NoiseParams(np.random.default_rng(0).normal(size=(10, 65)))
        a = filtered_noise(params, 640, seed=5).samples
        b = filtered_noise(params, 640, seed=5).samples
        c = filtered_noise(params, 640, seed=6).samples
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_sample_count_checked(self):
        with pytest.raises(ValueError):
            filtered_noise(NoiseParams(np.zeros((10, 65))), 641)


class TestReverb:
    def test_unit_impulse_is_identity(self, rng):
        dry = rng.normal(size=2000)
        out = reverb_apply(buffer(dry), ImpulseResponse.identity(64000)).samples
        assert np.max(np.abs(out - dry)) < 1e-9

    def test_impulse_input_returns_taps(self, rng):
        ir = rng.normal(size=3000)
        dry = np.zeros(1000)
        dry[0] = 1.0
        assert np.max(np.abs(reverb_apply(buffer(dry), ImpulseResponse(ir)).samples - ir[:1000])) < 1e-9

    def test_direct_convolution(self, rng):
        dry, ir = rng.normal(size=1024), rng.normal(size=257)
        out = reverb_apply(buffer(dry), ImpulseResponse(ir)).samples
        assert np.max(np.abs(out - direct_convolution(dry, ir))) < 1e-9

    def test_ir_gradient(self, rng):
        dry = rng.normal(size=400)
        ir = Value(rng.normal(size=120), requires_grad=True)
        w = rng.normal(size=400)
        from diffdsp.filters import fft_convolve

        assert finite_diff_check(lambda p: (fft_convolve(dry, p[0]) * w).sum(), [ir], n_samples=None) < 1e-3

    def test_identity_init_jitter(self):
        ir = ImpulseResponse.identity(1000, noise_std=1e-4, seed=3)
        assert ir.taps[0] == pytest.approx(1.0, abs=1e-3)
        assert 5e-5 < np.std(ir.taps[1:]) < 2e-4

    def test_rejects_bad_taps(self):
        with pytest.raises(ValueError):
            ImpulseResponse(np.array([]))
        with pytest.raises(ValueError):
            ImpulseResponse(np.array([1.0, np.inf]))
