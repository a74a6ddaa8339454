"""Harmonic additive synthesizer and its parameter nonlinearities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Value, as_value, unwrap
from .signal import CONTROL_HOP, DEFAULT_SAMPLE_RATE, AudioBuffer, bilinear_upsample, hamming_envelope

N_HARMONICS = 101
SIGMOID_EXPONENT = math.log(10.0)
SIGMOID_SCALE = 2.0
SIGMOID_FLOOR = 1e-7


@dataclass
class HarmonicParams:
    """Frame-rate controls of the harmonic oscillator bank.

    ``f0`` is in Hz, shape [L]; ``amplitude_raw`` [L] and ``harmonic_raw``
    [L, K] are pre-activation values.
    """

    f0: np.ndarray
    amplitude_raw: np.ndarray
    harmonic_raw: np.ndarray
    hop: int = CONTROL_HOP

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.amplitude_raw = np.asarray(self.amplitude_raw, dtype=np.float64)
        self.harmonic_raw = np.asarray(self.harmonic_raw, dtype=np.float64)
        if self.harmonic_raw.ndim != 2:
            raise ValueError("harmonic_raw must be [frames, harmonics]")
        n = self.f0.shape[0]
        if self.amplitude_raw.shape != (n,) or self.harmonic_raw.shape[0] != n:
            raise ValueError("f0, amplitude_raw and harmonic_raw must have the same frame count")
        if np.any(self.f0 <= 0):
            raise ValueError("f0 must be positive in every frame")

    @property
    def n_frames(self) -> int:
        return self.f0.shape[0]

    @property
    def n_harmonics(self) -> int:
        return self.harmonic_raw.shape[1]


def _sigmoid_parts(x: np.ndarray):
    s = 0.5 * (1.0 + np.tanh(0.5 * x))
    powered = s**SIGMOID_EXPONENT
    return s, powered


def _scaled_sigmoid_grad(s: np.ndarray, powered: np.ndarray) -> np.ndarray:
    return SIGMOID_SCALE * SIGMOID_EXPONENT * powered * (1.0 - s)


def scaled_sigmoid(x):
    """``2 * sigmoid(x) ** ln(10) + 1e-7``, a positive activation with a steeper slope."""
    xv = as_value(x)
    s, powered = _sigmoid_parts(xv.data)
    out = SIGMOID_SCALE * powered + SIGMOID_FLOOR
    return unwrap(Value.from_op(out, (xv,), lambda g: (g * _scaled_sigmoid_grad(s, powered),)), x)


def normalize_harmonics(harmonic_raw):
    """Activated harmonic weights normalized to sum to one over the last axis."""
    act = as_value(scaled_sigmoid(as_value(harmonic_raw)))
    return unwrap(act / act.sum(axis=-1, keepdims=True), harmonic_raw)


def nyquist_mask(f0, n_harmonics: int, sample_rate: int) -> np.ndarray:
    """1.0 where ``k * f0 <= sample_rate / 2`` (k = 1..K), else 0.0."""
    k = np.arange(1, n_harmonics + 1)
    return (np.multiply.outer(np.asarray(f0, dtype=np.float64), k) <= sample_rate / 2).astype(np.float64)


def antialias_mask(c, f0, sample_rate: int = DEFAULT_SAMPLE_RATE):
    """Zero harmonics above Nyquist and renormalize the survivors.

    Returns ``(masked, silent)`` where ``silent`` flags frames in which no
    harmonic survives (those frames are all-zero).
    """
    cv = as_value(c)
    mask = nyquist_mask(f0, cv.shape[-1], sample_rate)
    masked = cv * mask
    total = masked.data.sum(axis=-1, keepdims=True)
    silent = total[..., 0] <= 0
    safe = as_value(masked.sum(axis=-1, keepdims=True)) + silent[..., None].astype(np.float64)
    return unwrap(masked / safe, c), silent


def harmonic_synth(f0, amplitude_raw, harmonic_raw, sample_rate: int = DEFAULT_SAMPLE_RATE, hop: int = CONTROL_HOP):
    """Render the harmonic bank from frame-rate controls.

    f0 is linearly interpolated to the sample rate; amplitude and harmonic
    distribution are activated per frame and smoothed with normalized
    Hamming overlap-add envelopes. Phases start at zero and accumulate
    ``2*pi*k*f0(m)/sr`` over samples m < n. Any argument may be a Value.
    """
    f0v, ampv, harmv = as_value(f0), as_value(amplitude_raw), as_value(harmonic_raw)
    n_frames = f0v.shape[0]
    n_harmonics = harmv.shape[-1]

    mask = nyquist_mask(f0v.data, n_harmonics, sample_rate)
    alive = np.nonzero(mask.any(axis=0))[0]
    k_eff = int(alive[-1]) + 1 if alive.size else 0
    amplitude = scaled_sigmoid(ampv)

    norm = hamming_envelope(np.ones(n_frames), hop)
    amp_env = hamming_envelope(amplitude, hop) * (1.0 / norm)
    if k_eff == 0:
        return unwrap(amp_env * 0.0, f0, amplitude_raw, harmonic_raw)

    # normalizing over surviving harmonics only equals normalize -> mask ->
    # renormalize, but keeps masked raws out of the forward pass entirely
    mask = mask[:, :k_eff]
    weights = scaled_sigmoid(harmv[:, :k_eff]) * mask
    total = weights.sum(axis=1, keepdims=True) + (mask.sum(axis=1, keepdims=True) == 0)
    c = weights / total
    c_env = hamming_envelope(c, hop) * (1.0 / norm)[:, None]
    f0_up = bilinear_upsample(f0v, hop)
    phase = (ad.cumsum(f0_up) - f0_up) * (2.0 * np.pi / sample_rate)
    harmonics = np.arange(1, k_eff + 1, dtype=np.float64)
    waves = ad.sin(phase.reshape(-1, 1) * harmonics)
    out = (waves * c_env).sum(axis=1) * amp_env
    return unwrap(out, f0, amplitude_raw, harmonic_raw)


def harmonic_oscillator(params: HarmonicParams, sample_rate: int = DEFAULT_SAMPLE_RATE, n_samples: int | None = None) -> AudioBuffer:
    expected = params.n_frames * params.hop
    if n_samples is not None and n_samples != expected:
        raise ValueError(f"n_samples={n_samples} but {params.n_frames} frames x hop {params.hop} = {expected}")
    audio = harmonic_synth(params.f0, params.amplitude_raw, params.harmonic_raw, sample_rate, params.hop)
    return AudioBuffer(audio, sample_rate)
