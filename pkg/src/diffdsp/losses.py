"""Multi-scale spectral loss, loudness, pitch tracking and evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Value, as_value
from .signal import CONTROL_HOP, AudioBuffer, hann, stft_mag

LOUDNESS_FFT = 2048
LOUDNESS_FLOOR_DB = -120.0
F0_CONFIDENCE_THRESHOLD = 0.85
F0_MIN_HZ = 50.0
F0_MAX_HZ = 2000.0
YIN_WINDOW = 512
YIN_THRESHOLD = 0.1


@dataclass(frozen=True)
class SpectralLossConfig:
    fft_sizes: tuple[int, ...] = (2048, 1024, 512, 256, 128, 64)
    overlap: float = 0.75
    alpha: float = 1.0
    log_epsilon: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "fft_sizes", tuple(int(s) for s in self.fft_sizes))
        for size in self.fft_sizes:
            if size < 2 or size & (size - 1):
                raise ValueError(f"FFT size {size} is not a power of two >= 2")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError("overlap must lie in [0, 1)")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    def hop(self, fft_size: int) -> int:
        return max(1, int(round(fft_size * (1.0 - self.overlap))))


@dataclass
class SpectralLossReport:
    linear: dict[int, float] = field(default_factory=dict)
    log: dict[int, float] = field(default_factory=dict)

    @property
    def per_scale(self) -> dict[int, float]:
        return {k: self.linear[k] + self.log[k] for k in self.linear}

    @property
    def total(self) -> float:
        return float(sum(self.per_scale.values()))


def _samples(x):
    if isinstance(x, AudioBuffer):
        return x.samples
    return x


def _check_pair(a, b) -> None:
    if isinstance(a, AudioBuffer) and isinstance(b, AudioBuffer) and a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rates differ: {a.sample_rate} vs {b.sample_rate}")
    la, lb = len(_samples(a)), len(_samples(b))
    if la != lb:
        raise ValueError(f"signal lengths differ: {la} vs {lb}")


def _scale_terms(a, b, cfg: SpectralLossConfig, fft_size: int):
    hop = cfg.hop(fft_size)
    sa = as_value(stft_mag(a, fft_size, hop))
    sb = as_value(stft_mag(b, fft_size, hop))
    linear = ad.vabs(sa - sb).mean()
    log_term = ad.vabs(ad.log(sa + cfg.log_epsilon) - ad.log(sb + cfg.log_epsilon)).mean()
    return linear, log_term


def multiscale_spectral_loss(a, b, cfg: SpectralLossConfig | None = None) -> Value:
    """Sum over FFT sizes of mean L1 distances between linear and log STFT magnitudes.

    ``a`` and ``b`` may be AudioBuffers, arrays or Values; the result is
    always a scalar Value, differentiable w.r.t. whichever inputs are traced.
    """
    cfg = cfg or SpectralLossConfig()
    _check_pair(a, b)
    a, b = _samples(a), _samples(b)
    total = Value(0.0)
    for size in cfg.fft_sizes:
        linear, log_term = _scale_terms(a, b, cfg, size)
        total = total + linear + cfg.alpha * log_term
    return total


def spectral_loss_report(a, b, cfg: SpectralLossConfig | None = None) -> SpectralLossReport:
    cfg = cfg or SpectralLossConfig()
    _check_pair(a, b)
    a = np.asarray(_samples(a) if not isinstance(_samples(a), Value) else _samples(a).data)
    b = np.asarray(_samples(b) if not isinstance(_samples(b), Value) else _samples(b).data)
    report = SpectralLossReport()
    for size in cfg.fft_sizes:
        linear, log_term = _scale_terms(a, b, cfg, size)
        report.linear[size] = float(linear.data)
        report.log[size] = cfg.alpha * float(log_term.data)
    return report


# loudness -------------------------------------------------------------------


def a_weighting_db(freqs) -> np.ndarray:
    """IEC 61672 A-weighting gain in dB (0 dB at 1 kHz)."""
    f2 = np.asarray(freqs, dtype=np.float64) ** 2
    num = 12194.0**2 * f2**2
    den = (f2 + 20.6**2) * np.sqrt((f2 + 107.7**2) * (f2 + 737.9**2)) * (f2 + 12194.0**2)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(num / den) + 2.0


def _centered_frames(x: np.ndarray, frame_size: int, hop: int, pad: int | None = None) -> np.ndarray:
    n_frames = -(-x.size // hop)
    pad = frame_size // 2 if pad is None else pad
    padded = np.concatenate([np.zeros(pad), x, np.zeros(frame_size)])
    idx = (np.arange(n_frames) * hop)[:, None] + np.arange(frame_size)
    return padded[idx]


def loudness(
    audio: AudioBuffer,
    hop: int = CONTROL_HOP,
    fft_size: int = LOUDNESS_FFT,
    mean: float | None = None,
    std: float | None = None,
) -> np.ndarray:
    """A-weighted log power per control frame, in dB.

    Frames are centered at ``l * hop``. Values are floored at -120 dB and,
    if dataset ``mean``/``std`` are given, standardized afterwards.
    """
    x = audio.samples
    window = hann(fft_size)
    spec = np.fft.rfft(_centered_frames(x, fft_size, hop) * window, axis=-1)
    freqs = np.fft.rfftfreq(fft_size, 1.0 / audio.sample_rate)
    weights = 10.0 ** (a_weighting_db(freqs) / 10.0)
    # one-sided scaling so a full-scale white signal reads its windowed mean square
    power = (np.abs(spec) ** 2 * weights).sum(axis=-1) * 2.0 / (fft_size * np.sum(window**2))
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power)
    db = np.maximum(db, LOUDNESS_FLOOR_DB)
    if mean is not None:
        db = db - mean
    if std is not None:
        db = db / std
    return db


# pitch tracking -------------------------------------------------------------


@dataclass
class F0Track:
    f0: np.ndarray
    confidence: np.ndarray
    hop: int = CONTROL_HOP

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.confidence = np.asarray(self.confidence, dtype=np.float64)
        if self.f0.shape != self.confidence.shape:
            raise ValueError("f0 and confidence must have equal length")

    def __len__(self) -> int:
        return self.f0.size


def track_f0(
    audio: AudioBuffer,
    hop: int = CONTROL_HOP,
    fmin: float = F0_MIN_HZ,
    fmax: float = F0_MAX_HZ,
    window: int = YIN_WINDOW,
) -> F0Track:
    """YIN pitch tracker on frames centered at ``l * hop``.

    The chosen lag is the first dip within ``YIN_THRESHOLD`` of the
    frame's global minimum, refined by a parabola. An absolute threshold
    lets a lag-2T dip win on noisy frames and reports an octave too low.
    Confidence is one minus the cumulative-mean-normalized difference at
    the chosen lag, clipped to [0, 1]. Never raises on silence or noise;
    those frames just get low confidence.
    """
    sr = audio.sample_rate
    tau_min = max(2, int(math.ceil(sr / fmax)))
    tau_max = int(math.floor(sr / fmin))
    frame_len = window + tau_max
    # integration window x[0:window] is centered on the frame position
    frames = _centered_frames(audio.samples, frame_len, hop, pad=window // 2)

    nfft = 1 << (frame_len - 1).bit_length()
    head = np.fft.rfft(frames[:, :window], nfft, axis=-1)
    full = np.fft.rfft(frames, nfft, axis=-1)
    corr = np.fft.irfft(np.conj(head) * full, nfft, axis=-1)[:, : tau_max + 1]
    sq = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames**2, axis=1)], axis=1)
    taus = np.arange(tau_max + 1)
    energy0 = sq[:, window][:, None]
    energy_tau = sq[:, taus + window] - sq[:, taus]
    diff = np.maximum(energy0 + energy_tau - 2.0 * corr, 0.0)
    diff[:, 0] = 0.0

    running = np.cumsum(diff[:, 1:], axis=1)
    cmnd = np.ones_like(diff)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = diff[:, 1:] * taus[1:] / running
    cmnd[:, 1:] = np.where(running > 0, ratio, 1.0)

    f0 = np.empty(frames.shape[0])
    conf = np.empty(frames.shape[0])
    for i in range(frames.shape[0]):
        curve = cmnd[i]
        search = curve[tau_min : tau_max + 1]
        below = np.nonzero(search < search.min() + YIN_THRESHOLD)[0]
        if below.size:
            tau = tau_min + below[0]
            while tau + 1 <= tau_max and curve[tau + 1] < curve[tau]:
                tau += 1
        else:
            tau = tau_min + int(np.argmin(search))
        conf[i] = curve[tau]
        shift = 0.0
        if tau_min <= tau < tau_max and tau > 1:
            d0, d1, d2 = diff[i, tau - 1], diff[i, tau], diff[i, tau + 1]
            denom = d0 - 2.0 * d1 + d2
            if denom > 0:
                shift = float(np.clip(0.5 * (d0 - d2) / denom, -1.0, 1.0))
        f0[i] = sr / (tau + shift)
    return F0Track(f0, np.clip(1.0 - conf, 0.0, 1.0), hop)


# metrics --------------------------------------------------------------------


def hz_to_midi(f) -> np.ndarray:
    return 69.0 + 12.0 * np.log2(np.asarray(f, dtype=np.float64) / 440.0)


def f0_l1_midi(ref: F0Track, est: F0Track, threshold: float = F0_CONFIDENCE_THRESHOLD) -> float:
    """Mean absolute MIDI-scale distance over frames where ``ref`` is confident.

    Returns NaN when no frame passes the threshold.
    """
    if len(ref) != len(est):
        raise ValueError(f"track lengths differ: {len(ref)} vs {len(est)}")
    voiced = ref.confidence >= threshold
    if not voiced.any():
        return math.nan
    return float(np.mean(np.abs(hz_to_midi(ref.f0[voiced]) - hz_to_midi(est.f0[voiced]))))


def f0_outliers(track: F0Track, threshold: float = F0_CONFIDENCE_THRESHOLD) -> float:
    return float(np.mean(track.confidence < threshold))


def loudness_l1(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"loudness tracks differ in length: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def compare(reference: AudioBuffer, estimate: AudioBuffer, threshold: float = F0_CONFIDENCE_THRESHOLD) -> dict[str, float]:
    """Loudness L1, F0 L1 and F0 outlier rate of ``estimate`` against ``reference``."""
    if len(reference) != len(estimate):
        raise ValueError(f"audio lengths differ: {len(reference)} vs {len(estimate)}")
    ref_track = track_f0(reference)
    est_track = track_f0(estimate)
    return {
        "loudness_l1": loudness_l1(loudness(reference), loudness(estimate)),
        "f0_l1": f0_l1_midi(ref_track, est_track, threshold),
        "f0_outliers": f0_outliers(est_track, threshold),
    }
