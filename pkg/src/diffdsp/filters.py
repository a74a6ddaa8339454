"""Time-varying FIR filtering, filtered noise and long-IR reverb.

Kernels come from the frequency sampling method: a zero-phase transfer
function sampled on ``n_bins`` DFT bins is inverse-transformed, centered,
Hann-windowed and returned in causal form with a delay of
``(window_size - 1) // 2`` samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Value, as_value, unwrap
from .signal import AudioBuffer, DEFAULT_SAMPLE_RATE, hann
from .synth import scaled_sigmoid

N_NOISE_BANDS = 65
FILTER_WINDOW = 257
REVERB_SAMPLES = 64_000  # 4 s at 16 kHz


@dataclass
class FrameFilterBank:
    impulse_responses: np.ndarray  # [frames, taps]
    frame_hop: int = 256

    def __post_init__(self):
        self.impulse_responses = np.atleast_2d(np.asarray(self.impulse_responses, dtype=np.float64))

    @property
    def n_frames(self) -> int:
        return self.impulse_responses.shape[0]


@dataclass
class ImpulseResponse:
    taps: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64).reshape(-1)
        if self.taps.size < 1:
            raise ValueError("impulse response needs at least one tap")
        if not np.all(np.isfinite(self.taps)):
            raise ValueError("impulse response has non-finite taps")

    def __len__(self) -> int:
        return self.taps.size

    @classmethod
    def identity(cls, length: int = REVERB_SAMPLES, noise_std: float = 0.0, seed: int = 0) -> "ImpulseResponse":
        """Unit impulse, optionally with small Gaussian jitter on every tap."""
        taps = np.zeros(length)
        if noise_std > 0:
            taps += np.random.default_rng(seed).normal(0.0, noise_std, length)
        taps[0] += 1.0
        return cls(taps)


@dataclass
class NoiseParams:
    magnitudes_raw: np.ndarray  # [frames, bands], pre-activation
    hop: int = 64

    def __post_init__(self):
        self.magnitudes_raw = np.asarray(self.magnitudes_raw, dtype=np.float64)
        if self.magnitudes_raw.ndim != 2:
            raise ValueError("magnitudes_raw must be [frames, bands]")


# filter design --------------------------------------------------------------


@lru_cache(maxsize=16)
def _design_matrix(n_bins: int, window_size: int) -> np.ndarray:
    """Linear map from zero-phase magnitudes [n_bins] to a causal kernel [window_size]."""
    ir_size = 2 * (n_bins - 1)
    basis = np.fft.irfft(np.eye(n_bins), n=ir_size, axis=-1)  # [n_bins, ir_size], zero-phase
    center = (window_size - 1) // 2
    kernel = np.zeros((n_bins, window_size))
    nyq = ir_size // 2
    for lag in range(-center, center + 1):
        if abs(lag) < nyq:
            kernel[:, center + lag] = basis[:, lag % ir_size]
        elif abs(lag) == nyq:
            # the sample at +-N/2 is shared by both sides of a zero-phase IR
            kernel[:, center + lag] = 0.5 * basis[:, nyq]
    kernel *= hann(window_size)
    kernel.setflags(write=False)
    return kernel


def fir_from_magnitudes(magnitudes, window_size: int = FILTER_WINDOW):
    """Linear-phase causal FIR kernel(s) from sampled magnitude responses.

    ``magnitudes`` has shape [..., n_bins]; the result has shape
    [..., window_size]. Differentiable (the map is linear).
    """
    if window_size % 2 == 0:
        raise ValueError("window_size must be odd")
    mv = as_value(magnitudes)
    if not isinstance(magnitudes, Value) and np.any(mv.data < 0):
        raise ValueError("magnitudes must be non-negative")
    matrix = _design_matrix(mv.shape[-1], window_size)
    return unwrap(mv @ matrix, magnitudes)


# frame-wise convolution -----------------------------------------------------


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def ltv_fir(x, kernels):
    """Filter ``x`` with one kernel per frame, overlap-adding the full tails.

    ``x`` has length ``frames * hop`` where ``frames = len(kernels)``; the
    output is truncated to the input length. Differentiable in both inputs.
    """
    xv, kv = as_value(x), as_value(kernels)
    n_frames, taps = kv.shape
    n = xv.shape[0]
    if n % n_frames:
        raise ValueError(f"audio length {n} is not a multiple of {n_frames} frames")
    hop = n // n_frames
    span = hop + taps - 1
    nfft = _next_pow2(span)
    frames = xv.data.reshape(n_frames, hop)
    X = np.fft.rfft(frames, nfft, axis=-1)
    H = np.fft.rfft(kv.data, nfft, axis=-1)
    y = np.fft.irfft(X * H, nfft, axis=-1)[:, :span]
    idx = (np.arange(n_frames) * hop)[:, None] + np.arange(span)
    full = np.bincount(idx.ravel(), weights=y.ravel(), minlength=n + taps - 1)
    out = full[:n]

    def vjp(g):
        g_ext = np.concatenate([g, np.zeros(taps - 1)])
        G = np.fft.rfft(g_ext[idx], nfft, axis=-1)
        gx = gk = None
        if xv.requires_grad:
            gx = np.fft.irfft(G * np.conj(H), nfft, axis=-1)[:, :hop].reshape(-1)
        if kv.requires_grad:
            gk = np.fft.irfft(G * np.conj(X), nfft, axis=-1)[:, :taps]
        return gx, gk

    return unwrap(Value.from_op(out, (xv, kv), vjp), x, kernels)


def ltv_fir_apply(audio: AudioBuffer, bank: FrameFilterBank) -> AudioBuffer:
    expected = bank.n_frames * bank.frame_hop
    if len(audio) != expected:
        raise ValueError(f"audio has {len(audio)} samples, bank expects {expected}")
    return AudioBuffer(ltv_fir(audio.samples, bank.impulse_responses), audio.sample_rate)


# filtered noise -------------------------------------------------------------


def uniform_noise(n_samples: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, n_samples)


def noise_synth(magnitudes_raw, n_samples: int, seed: int = 0, window_size: int = FILTER_WINDOW):
    """Uniform noise shaped by per-frame filters from activated magnitudes."""
    kernels = fir_from_magnitudes(scaled_sigmoid(magnitudes_raw), window_size)
    return ltv_fir(uniform_noise(n_samples, seed), kernels)


def filtered_noise(params: NoiseParams, n_samples: int, seed: int = 0, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    expected = params.magnitudes_raw.shape[0] * params.hop
    if n_samples != expected:
        raise ValueError(f"n_samples={n_samples} does not match {expected}")
    return AudioBuffer(noise_synth(params.magnitudes_raw, n_samples, seed), sample_rate)


# reverb ---------------------------------------------------------------------


def fft_convolve(x, ir):
    """Linear convolution via zero-padded FFT, truncated to ``len(x)``."""
    xv, hv = as_value(x), as_value(ir)
    n, m = xv.shape[0], hv.shape[0]
    nfft = _next_pow2(n + m - 1)
    X = np.fft.rfft(xv.data, nfft)
    H = np.fft.rfft(hv.data, nfft)
    out = np.fft.irfft(X * H, nfft)[:n]

    def vjp(g):
        G = np.fft.rfft(g, nfft)
        gx = np.fft.irfft(G * np.conj(H), nfft)[:n] if xv.requires_grad else None
        gh = np.fft.irfft(G * np.conj(X), nfft)[:m] if hv.requires_grad else None
        return gx, gh

    return unwrap(Value.from_op(out, (xv, hv), vjp), x, ir)


def reverb_apply(dry: AudioBuffer, ir: ImpulseResponse) -> AudioBuffer:
    return AudioBuffer(fft_convolve(dry.samples, ir.taps), dry.sample_rate)
