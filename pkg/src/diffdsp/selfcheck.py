"""Gradient and oracle-equivalence checks runnable from the command line."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Value, finite_diff_check
from .filters import fft_convolve, fir_from_magnitudes, ltv_fir, noise_synth
from .losses import multiscale_spectral_loss
from .signal import bilinear_upsample, dft, hamming, hamming_envelope, stft_mag
from .synth import harmonic_synth, scaled_sigmoid

GRAD_TOL = 1e-3
ORACLE_TOL = 1e-9


def _rng():
    return np.random.default_rng(1234)


def _weighted(weights):
    return lambda out: (out * weights).sum()


def check_sigmoid_grad() -> float:
    rng = _rng()
    x = Value(rng.normal(0, 2, 50), requires_grad=True)
    w = rng.normal(size=50)
    return finite_diff_check(lambda p: _weighted(w)(scaled_sigmoid(p[0])), [x], n_samples=None)


def check_elementwise_grads() -> float:
    rng = _rng()
    a = Value(rng.uniform(0.5, 2.0, 20), requires_grad=True)
    b = Value(rng.uniform(0.5, 2.0, 20), requires_grad=True)

    def f(p):
        x, y = p
        z = ad.sin(x) * y + ad.log(x) / y - ad.cumsum(x * x) * 0.01
        return (ad.vabs(z) + ad.exp(-y)).sum()

    return finite_diff_check(f, [a, b], n_samples=None)


def check_stft_grad() -> float:
    rng = _rng()
    x = Value(rng.normal(size=600), requires_grad=True)
    w = rng.normal(size=stft_mag(x.data, 128, 32).shape)
    return finite_diff_check(lambda p: _weighted(w)(stft_mag(p[0], 128, 32)), [x], n_samples=40)


def check_envelope_grads() -> float:
    rng = _rng()
    frames = Value(rng.normal(size=(8, 3)), requires_grad=True)
    w = rng.normal(size=(8 * 16, 3))

    def f(p):
        return _weighted(w)(hamming_envelope(p[0], 16)) + _weighted(w)(bilinear_upsample(p[0], 16))

    return finite_diff_check(f, [frames], n_samples=None)


def check_harmonic_grad() -> float:
    rng = _rng()
    f0 = Value(np.linspace(213.0, 377.0, 12), requires_grad=True)
    amp = Value(rng.normal(size=12), requires_grad=True)
    harm = Value(rng.normal(size=(12, 30)), requires_grad=True)
    w = rng.normal(size=12 * 64)
    return finite_diff_check(lambda p: _weighted(w)(harmonic_synth(*p)), [f0, amp, harm], n_samples=25)


def check_filter_grads() -> float:
    rng = _rng()
    mags = Value(rng.normal(size=(6, 65)), requires_grad=True)
    x = Value(rng.normal(size=6 * 64), requires_grad=True)
    w = rng.normal(size=6 * 64)

    def f(p):
        kernels = fir_from_magnitudes(scaled_sigmoid(p[0]))
        return _weighted(w)(ltv_fir(p[1], kernels)) + _weighted(w)(noise_synth(p[0], 6 * 64, seed=3))

    return finite_diff_check(f, [mags, x], n_samples=30)


def check_reverb_grad() -> float:
    rng = _rng()
    x = Value(rng.normal(size=300), requires_grad=True)
    ir = Value(rng.normal(size=90), requires_grad=True)
    w = rng.normal(size=300)
    return finite_diff_check(lambda p: _weighted(w)(fft_convolve(p[0], p[1])), [x, ir], n_samples=30)


def check_loss_grad() -> float:
    rng = _rng()
    n = np.arange(1024)
    x0 = 0.7 * np.sin(2 * np.pi * 330 * n / 16000) + 0.1 * rng.normal(size=1024)
    # a half-gain target keeps every |S - T| and log-ratio away from its kink,
    # so the central difference measures a true derivative
    target = 0.5 * x0
    x = Value(x0.copy(), requires_grad=True)
    return finite_diff_check(lambda p: multiscale_spectral_loss(p[0], target), [x], n_samples=40)


def check_dft_oracle() -> float:
    rng = _rng()
    worst = 0.0
    for n in (8, 12, 64, 256):
        x = rng.normal(size=n)
        k = np.arange(n)
        naive = np.exp(-2j * np.pi * np.outer(k, k) / n) @ x
        worst = max(worst, float(np.max(np.abs(dft(x) - naive)) / max(1.0, np.max(np.abs(naive)))))
    return worst


def check_convolution_oracles() -> float:
    rng = _rng()
    x = rng.normal(size=1024)
    ir = rng.normal(size=257)
    direct = np.convolve(x, ir)[:1024]
    worst = float(np.max(np.abs(fft_convolve(x, ir) - direct)))
    bank = np.tile(ir, (4, 1))
    worst = max(worst, float(np.max(np.abs(ltv_fir(x, bank) - direct))))
    return worst


def check_envelope_oracle() -> float:
    rng = _rng()
    track = rng.normal(size=7)
    hop = 8
    window = hamming(2 * hop)
    direct = np.zeros(7 * hop)
    for l, value in enumerate(track):
        for m in range(2 * hop):
            n = l * hop - hop + m
            if 0 <= n < direct.size:
                direct[n] += value * window[m]
    return float(np.max(np.abs(hamming_envelope(track, hop) - direct)))


def check_oscillator_oracle() -> float:
    frames = 40
    harm = np.full((frames, 101), -50.0)
    harm[:, 0] = 50.0
    out = harmonic_synth(np.full(frames, 440.0), np.full(frames, 50.0), harm)
    n = np.arange(frames * 64)
    expected = (2.0 + 1e-7) * np.sin(2 * np.pi * 440.0 * n / 16000)
    # weight of harmonics 2..K at the activation floor
    return float(np.max(np.abs(out - expected)[64:-64]))


CHECKS: list[tuple[str, Callable[[], float], float]] = [
    ("grad: scaled sigmoid", check_sigmoid_grad, GRAD_TOL),
    ("grad: elementwise primitives", check_elementwise_grads, GRAD_TOL),
    ("grad: STFT magnitude", check_stft_grad, GRAD_TOL),
    ("grad: envelopes", check_envelope_grads, GRAD_TOL),
    ("grad: harmonic oscillator", check_harmonic_grad, GRAD_TOL),
    ("grad: LTV-FIR / filtered noise", check_filter_grads, GRAD_TOL),
    ("grad: FFT reverb", check_reverb_grad, GRAD_TOL),
    ("grad: multi-scale loss", check_loss_grad, GRAD_TOL),
    ("oracle: DFT vs direct sum", check_dft_oracle, 1e-12),
    ("oracle: convolutions vs direct", check_convolution_oracles, ORACLE_TOL),
    ("oracle: envelope vs direct OLA", check_envelope_oracle, ORACLE_TOL),
    ("oracle: oscillator vs sinusoid", check_oscillator_oracle, 1e-5),
]


def run(stream=print) -> bool:
    """Run every check, print one row each, return True iff all pass."""
    ok = True
    stream(f"{'check':36s} {'error':>12s} {'tol':>8s}  result")
    for name, fn, tol in CHECKS:
        start = time.perf_counter()
        try:
            err = fn()
            passed = bool(np.isfinite(err) and err < tol)
        except Exception as exc:  # a crashing check is a failing check
            err, passed = float("nan"), False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        elapsed = time.perf_counter() - start
        stream(f"{name:36s} {err:12.3e} {tol:8.0e}  {'PASS' if passed else 'FAIL'} ({elapsed:.2f}s)")
    return ok
