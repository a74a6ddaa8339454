"""Differentiable audio synthesis in numpy.

Harmonic-plus-noise synthesizer, time-varying FIR filtering, FFT reverb,
a multi-scale spectral loss and a small reverse-mode autodiff engine to
fit synthesizer controls to recordings.
"""

from .autodiff import Value, backward, finite_diff_check
from .filters import ImpulseResponse, NoiseParams, filtered_noise, fir_from_magnitudes, ltv_fir_apply, reverb_apply
from .fitting import FitConfig, FitResult, NumericalError, SynthParams, acoustic_transfer, dereverb, fit, pitch_shift, render
from .losses import SpectralLossConfig, compare, loudness, multiscale_spectral_loss, track_f0
from .optim import AdamState, adam_step
from .signal import AudioBuffer, ControlSeries, Spectrogram, stft_magnitude
from .synth import HarmonicParams, harmonic_oscillator

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AudioBuffer",
    "ControlSeries",
    "FitConfig",
    "FitResult",
    "HarmonicParams",
    "ImpulseResponse",
    "NoiseParams",
    "NumericalError",
    "Spectrogram",
    "SpectralLossConfig",
    "SynthParams",
    "Value",
    "acoustic_transfer",
    "adam_step",
    "backward",
    "compare",
    "dereverb",
    "filtered_noise",
    "finite_diff_check",
    "fir_from_magnitudes",
    "fit",
    "harmonic_oscillator",
    "loudness",
    "ltv_fir_apply",
    "multiscale_spectral_loss",
    "pitch_shift",
    "render",
    "reverb_apply",
    "stft_magnitude",
    "track_f0",
]
