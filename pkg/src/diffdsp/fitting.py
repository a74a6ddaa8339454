"""Analysis-by-synthesis: fit synthesizer controls to a clip, then edit them.

A fitted :class:`SynthParams` can be re-rendered, rendered without its
reverb (dereverberation), have its reverb applied to other audio
(acoustic transfer), or be transposed.
"""

from __future__ import annotations

import copy
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .autodiff import Value, backward
from .filters import (
    FILTER_WINDOW,
    N_NOISE_BANDS,
    REVERB_SAMPLES,
    ImpulseResponse,
    NoiseParams,
    fft_convolve,
    noise_synth,
    reverb_apply,
)
from .losses import SpectralLossConfig, f0_l1_midi, loudness, loudness_l1, multiscale_spectral_loss, track_f0, F0Track
from .optim import AdamState, adam_step
from .signal import CONTROL_HOP, DEFAULT_SAMPLE_RATE, AudioBuffer
from .synth import N_HARMONICS, HarmonicParams, harmonic_synth

log = logging.getLogger(__name__)

FLOOR_RAW = -30.0  # activation sits at its 1e-7 floor
IR_INIT_STD = 1e-4


class NumericalError(RuntimeError):
    """The optimization produced a non-finite loss or parameter."""


@dataclass
class SynthParams:
    harmonic: HarmonicParams
    noise: NoiseParams
    reverb_ir: ImpulseResponse | None = None
    sample_rate: int = DEFAULT_SAMPLE_RATE
    n_samples: int | None = None
    noise_seed: int = 0

    def __post_init__(self):
        expected = self.harmonic.n_frames * self.harmonic.hop
        if self.n_samples is None:
            self.n_samples = expected
        if self.n_samples != expected:
            raise ValueError(
                f"n_samples={self.n_samples} but f0 has {self.harmonic.n_frames} frames of hop {self.harmonic.hop}"
            )
        if self.noise.magnitudes_raw.shape[0] != self.harmonic.n_frames:
            raise ValueError("noise_raw frame count differs from f0 frame count")
        if self.noise.hop != self.harmonic.hop:
            raise ValueError("noise and harmonic controls use different hops")

    @property
    def n_frames(self) -> int:
        return self.harmonic.n_frames

    def copy(self) -> "SynthParams":
        return copy.deepcopy(self)


@dataclass
class FitConfig:
    steps: int = 20_000
    learning_rate: float = 1e-3
    decay_rate: float = 0.98
    decay_interval: int = 10_000
    freeze_f0: bool = True
    fit_reverb: bool = False
    reverb_samples: int = REVERB_SAMPLES
    n_harmonics: int = N_HARMONICS
    n_noise_bands: int = N_NOISE_BANDS
    seed: int = 0
    loss: SpectralLossConfig = field(default_factory=SpectralLossConfig)

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.reverb_samples < 1:
            raise ValueError("reverb_samples must be >= 1")


class HistoryRow(NamedTuple):
    step: int
    loss: float
    effective_lr: float


class FitResult(NamedTuple):
    params: SynthParams
    history: list[HistoryRow]


# rendering ------------------------------------------------------------------


def synthesize(f0, amplitude_raw, harmonic_raw, noise_raw, reverb_ir=None, *, sample_rate=DEFAULT_SAMPLE_RATE, hop=CONTROL_HOP, noise_seed=0):
    """Harmonic + filtered noise (+ reverb). Any control may be a Value."""
    n_samples = np.shape(f0.data if isinstance(f0, Value) else f0)[0] * hop
    dry = harmonic_synth(f0, amplitude_raw, harmonic_raw, sample_rate, hop)
    dry = dry + noise_synth(noise_raw, n_samples, noise_seed, FILTER_WINDOW)
    if reverb_ir is None:
        return dry
    return fft_convolve(dry, reverb_ir)


def render(params: SynthParams, use_reverb: bool = True) -> AudioBuffer:
    ir = params.reverb_ir.taps if (use_reverb and params.reverb_ir is not None) else None
    out = synthesize(
        params.harmonic.f0,
        params.harmonic.amplitude_raw,
        params.harmonic.harmonic_raw,
        params.noise.magnitudes_raw,
        ir,
        sample_rate=params.sample_rate,
        hop=params.harmonic.hop,
        noise_seed=params.noise_seed,
    )
    return AudioBuffer(out, params.sample_rate)


def dereverb(params: SynthParams) -> AudioBuffer:
    """Render with the reverb stage bypassed."""
    if params.reverb_ir is None:
        raise ValueError("parameters carry no reverb impulse response")
    return render(params, use_reverb=False)


def acoustic_transfer(dry: AudioBuffer, ir: ImpulseResponse) -> AudioBuffer:
    return reverb_apply(dry, ir)


def pitch_shift(params: SynthParams, semitones: float) -> SynthParams:
    """Scale every f0 frame by ``2 ** (semitones / 12)``; nothing else changes."""
    shifted = params.harmonic.f0 * 2.0 ** (semitones / 12.0)
    nyquist = params.sample_rate / 2
    if np.any(shifted <= 0) or np.any(shifted >= nyquist):
        raise ValueError(f"shift by {semitones} semitones moves f0 outside (0, {nyquist}) Hz")
    out = params.copy()
    out.harmonic.f0 = shifted
    return out


# initialization -------------------------------------------------------------


def _fill_unvoiced(track: F0Track, threshold: float = 0.85) -> np.ndarray:
    voiced = np.nonzero(track.confidence >= threshold)[0]
    if voiced.size == 0:
        return track.f0.copy()
    frames = np.arange(len(track))
    return np.interp(frames, voiced, track.f0[voiced])


def initial_params(target: AudioBuffer, cfg: FitConfig) -> SynthParams:
    """Tracker f0, raw controls at 0 (mid-activation), near-identity reverb."""
    n_frames = len(target) // CONTROL_HOP
    f0 = _fill_unvoiced(track_f0(target))[:n_frames]
    f0 = np.clip(f0, 1.0, target.sample_rate / 2 - 1.0)
    harmonic = HarmonicParams(f0, np.zeros(n_frames), np.zeros((n_frames, cfg.n_harmonics)))
    noise = NoiseParams(np.zeros((n_frames, cfg.n_noise_bands)))
    ir = None
    if cfg.fit_reverb:
        ir = ImpulseResponse.identity(cfg.reverb_samples, noise_std=IR_INIT_STD, seed=cfg.seed)
    return SynthParams(harmonic, noise, ir, target.sample_rate, n_frames * CONTROL_HOP, noise_seed=cfg.seed)


def floor_params(n_samples: int, cfg: FitConfig, sample_rate: int = DEFAULT_SAMPLE_RATE) -> SynthParams:
    n_frames = n_samples // CONTROL_HOP
    harmonic = HarmonicParams(
        np.full(n_frames, 440.0),
        np.full(n_frames, FLOOR_RAW),
        np.zeros((n_frames, cfg.n_harmonics)),
    )
    noise = NoiseParams(np.full((n_frames, cfg.n_noise_bands), FLOOR_RAW))
    ir = ImpulseResponse.identity(cfg.reverb_samples) if cfg.fit_reverb else None
    return SynthParams(harmonic, noise, ir, sample_rate, n_samples, noise_seed=cfg.seed)


def pad_to_hop(audio: AudioBuffer, hop: int = CONTROL_HOP) -> AudioBuffer:
    remainder = len(audio) % hop
    if remainder == 0:
        return audio
    padded = np.concatenate([audio.samples, np.zeros(hop - remainder)])
    return AudioBuffer(padded, audio.sample_rate)


# fitting --------------------------------------------------------------------


_FIELDS = ("f0", "amplitude_raw", "harmonic_raw", "noise_raw", "reverb_ir")


def _unpack(params: SynthParams) -> dict[str, np.ndarray]:
    out = {
        "f0": params.harmonic.f0,
        "amplitude_raw": params.harmonic.amplitude_raw,
        "harmonic_raw": params.harmonic.harmonic_raw,
        "noise_raw": params.noise.magnitudes_raw,
    }
    if params.reverb_ir is not None:
        out["reverb_ir"] = params.reverb_ir.taps
    return out


def _pack(template: SynthParams, arrays: dict[str, np.ndarray]) -> SynthParams:
    out = template.copy()
    out.harmonic.f0 = arrays["f0"].copy()
    out.harmonic.amplitude_raw = arrays["amplitude_raw"].copy()
    out.harmonic.harmonic_raw = arrays["harmonic_raw"].copy()
    out.noise.magnitudes_raw = arrays["noise_raw"].copy()
    if "reverb_ir" in arrays:
        out.reverb_ir = ImpulseResponse(arrays["reverb_ir"].copy())
    return out


def params_loss(params: SynthParams, target: AudioBuffer, loss_cfg: SpectralLossConfig | None = None) -> float:
    return float(multiscale_spectral_loss(render(params).samples, target.samples, loss_cfg).data)


def fit(
    target: AudioBuffer,
    cfg: FitConfig | None = None,
    init: SynthParams | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> FitResult:
    """Fit SynthParams to ``target`` with ADAM on the multi-scale spectral loss.

    Returns the best parameters seen (by loss) and a history of
    (step, loss, effective_lr) rows, one per optimizer step.
    """
    cfg = cfg or FitConfig()
    target = pad_to_hop(target)
    if not np.any(target.samples):
        warnings.warn("target is silent; returning floor parameters", RuntimeWarning, stacklevel=2)
        return FitResult(floor_params(len(target), cfg, target.sample_rate), [])

    params = init.copy() if init is not None else initial_params(target, cfg)
    if params.n_samples != len(target):
        raise ValueError(f"initial params cover {params.n_samples} samples, target has {len(target)}")
    arrays = _unpack(params)
    trainable = [k for k in _FIELDS if k in arrays]
    if cfg.freeze_f0:
        trainable.remove("f0")
    if not cfg.fit_reverb and "reverb_ir" in trainable:
        trainable.remove("reverb_ir")

    state = AdamState(cfg.learning_rate, cfg.decay_rate, cfg.decay_interval)
    history: list[HistoryRow] = []
    best_loss = math.inf
    best = {k: v.copy() for k, v in arrays.items()}
    target_samples = target.samples

    def evaluate(with_grad: bool):
        leaves = {k: Value(v, requires_grad=with_grad and k in trainable) for k, v in arrays.items()}
        audio = synthesize(
            leaves["f0"],
            leaves["amplitude_raw"],
            leaves["harmonic_raw"],
            leaves["noise_raw"],
            leaves.get("reverb_ir"),
            sample_rate=params.sample_rate,
            hop=params.harmonic.hop,
            noise_seed=params.noise_seed,
        )
        return leaves, multiscale_spectral_loss(audio, target_samples, cfg.loss)

    for step in range(cfg.steps):
        leaves, loss = evaluate(with_grad=True)
        value = float(loss.data)
        if not math.isfinite(value):
            raise NumericalError(f"loss became {value} at step {step}")
        backward(loss)
        history.append(HistoryRow(step, value, state.effective_lr()))
        if value < best_loss:
            best_loss = value
            best = {k: v.copy() for k, v in arrays.items()}
        if callback is not None:
            callback(step, value)
        updated = adam_step(state, [arrays[k] for k in trainable], [leaves[k].grad for k in trainable])
        for k, v in zip(trainable, updated):
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"{k} became non-finite at step {step}")
            arrays[k] = v

    if cfg.steps > 0:
        _, loss = evaluate(with_grad=False)
        final = float(loss.data)
        if math.isfinite(final) and final < best_loss:
            best = {k: v.copy() for k, v in arrays.items()}
        log.info("fit finished: best loss %.6g after %d steps", min(best_loss, final), cfg.steps)

    return FitResult(_pack(params, best), history)


# interpolation metrics ------------------------------------------------------


def interpolation_metrics(params_a: SynthParams, params_b: SynthParams, task: str) -> dict[str, float]:
    """Loudness/F0 L1 after swapping one control group from ``b`` into ``a``.

    ``task`` is ``reconstruction`` (a unchanged), ``loudness`` (amplitude
    track from b, loudness scored against render(b)) or ``f0`` (f0 from b,
    F0 scored against b's f0 track). The other metric is always scored
    against a.
    """
    if params_a.n_samples != params_b.n_samples:
        raise ValueError("parameter files cover different lengths")
    mixed = params_a.copy()
    if task == "loudness":
        mixed.harmonic.amplitude_raw = params_b.harmonic.amplitude_raw.copy()
    elif task == "f0":
        mixed.harmonic.f0 = params_b.harmonic.f0.copy()
    elif task != "reconstruction":
        raise ValueError(f"unknown interpolation task {task!r}")

    audio = render(mixed)
    loud_ref = loudness(render(params_b) if task == "loudness" else render(params_a))
    f0_ref_hz = params_b.harmonic.f0 if task == "f0" else params_a.harmonic.f0
    ref_track = F0Track(f0_ref_hz, np.ones_like(f0_ref_hz))
    est = track_f0(audio)
    return {
        "loudness_l1": loudness_l1(loud_ref, loudness(audio)),
        "f0_l1": f0_l1_midi(ref_track, F0Track(est.f0[: len(ref_track)], est.confidence[: len(ref_track)])),
    }
