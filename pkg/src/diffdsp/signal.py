"""Signal containers, windows, DFT/STFT and frame-to-sample upsampling.

Everything here works on plain numpy arrays. The ``*_op`` style helpers
(:func:`stft_mag`, :func:`bilinear_upsample`, :func:`hamming_envelope`)
additionally accept :class:`~diffdsp.autodiff.Value` inputs and then return
a traced Value so gradients flow through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Value, as_value, unwrap

DEFAULT_SAMPLE_RATE = 16_000
CONTROL_HOP = 64  # 4 ms at 16 kHz


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"audio must be mono (1-D), got shape {samples.shape}")
        if samples.size == 0:
            raise ValueError("audio must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio contains NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ControlSeries:
    """Frame-rate parameter track; one scalar or one fixed-width vector per frame."""

    frames: np.ndarray
    hop_samples: int = CONTROL_HOP

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim not in (1, 2):
            raise ValueError("frames must be 1-D (scalar track) or 2-D (vector track)")
        if frames.shape[0] == 0:
            raise ValueError("control series is empty")
        if self.hop_samples <= 0:
            raise ValueError("hop_samples must be positive")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def n_samples(self) -> int:
        return len(self) * self.hop_samples

    def frame_rate(self, sample_rate: int = DEFAULT_SAMPLE_RATE) -> float:
        return sample_rate / self.hop_samples


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # [frame, bin]
    fft_size: int
    hop: int

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


# windows --------------------------------------------------------------------


def hann(size: int) -> np.ndarray:
    """Symmetric Hann window."""
    if size == 1:
        return np.ones(1)
    n = np.arange(size)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / (size - 1))


def hamming(size: int) -> np.ndarray:
    """Symmetric Hamming window."""
    if size == 1:
        return np.ones(1)
    n = np.arange(size)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (size - 1))


# DFT ------------------------------------------------------------------------


def _naive_dft(x: np.ndarray, sign: float) -> np.ndarray:
    n = x.shape[-1]
    k = np.arange(n)
    basis = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    return x @ basis.T


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_radix2(x: np.ndarray, sign: float) -> np.ndarray:
    """Iterative decimation-in-time FFT along the last axis (length 2**m)."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    a = x[..., _bit_reversal(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        a = a.reshape(*lead, n // size, size)
        even = a[..., :half]
        odd = a[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return a.reshape(*lead, n)


def _transform(x, sign: float) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("DFT of an empty sequence is undefined")
    n = x.shape[-1]
    if n & (n - 1) == 0:
        return _fft_radix2(x, sign)
    return _naive_dft(x.astype(np.complex128), sign)


def dft(frame) -> np.ndarray:
    """Unnormalized forward DFT along the last axis.

    Radix-2 FFT for power-of-two lengths, direct summation otherwise.
    """
    return _transform(frame, -1.0)


def idft(spectrum) -> np.ndarray:
    """Inverse of :func:`dft` (includes the 1/N factor)."""
    spectrum = np.asarray(spectrum)
    return _transform(spectrum, 1.0) / spectrum.shape[-1]


# STFT -----------------------------------------------------------------------


def frame_starts(n_samples: int, fft_size: int, hop: int) -> np.ndarray:
    """Start indices of non-centered frames; short signals get one padded frame."""
    if n_samples <= fft_size:
        return np.zeros(1, dtype=np.int64)
    return np.arange(0, (n_samples - fft_size) // hop + 1) * hop


def stft_mag(x, fft_size: int, hop: int):
    """Hann-windowed STFT magnitude, shape [frames, fft_size // 2 + 1].

    Differentiable when ``x`` is a Value. At bins with exactly zero
    magnitude the derivative is taken as 0.
    """
    xv = as_value(x)
    signal = xv.data
    n = signal.size
    padded_len = max(n, fft_size)
    if padded_len != n:
        signal = np.concatenate([signal, np.zeros(padded_len - n)])
    starts = frame_starts(padded_len, fft_size, hop)
    idx = starts[:, None] + np.arange(fft_size)
    window = hann(fft_size)
    spec = np.fft.rfft(signal[idx] * window, axis=-1)
    mag = np.abs(spec)

    def vjp(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(mag > 0, spec / np.where(mag > 0, mag, 1.0), 0.0)
        y = g * unit
        y[:, 1 : fft_size // 2] *= 0.5
        frames_grad = fft_size * np.fft.irfft(y, n=fft_size, axis=-1) * window
        grad = np.bincount(idx.ravel(), weights=frames_grad.ravel(), minlength=padded_len)
        return (grad[:n],)

    return unwrap(Value.from_op(mag, (xv,), vjp), x)


def stft_magnitude(audio: AudioBuffer, fft_size: int, overlap_fraction: float = 0.75) -> Spectrogram:
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must lie in [0, 1)")
    hop = max(1, int(round(fft_size * (1.0 - overlap_fraction))))
    return Spectrogram(stft_mag(audio.samples, fft_size, hop), fft_size, hop)


# frame-rate -> sample-rate --------------------------------------------------


def bilinear_upsample(frames, hop: int):
    """Linear interpolation between frame centers at ``l * hop``.

    Values are held constant after the last center. Works on [L] or [L, K]
    tracks and on Values.
    """
    fv = as_value(frames)
    n_frames = fv.shape[0]
    n = n_frames * hop
    pos = np.arange(n)
    i0 = pos // hop
    i1 = np.minimum(i0 + 1, n_frames - 1)
    frac = (pos % hop) / hop
    frac = np.where(i0 == n_frames - 1, 0.0, frac)
    shape = (n,) + (1,) * (fv.ndim - 1)
    w0 = (1.0 - frac).reshape(shape)
    w1 = frac.reshape(shape)
    out = fv.data[i0] * w0 + fv.data[i1] * w1

    def vjp(g):
        grad = np.zeros_like(fv.data)
        np.add.at(grad, i0, g * w0)
        np.add.at(grad, i1, g * w1)
        return (grad,)

    return unwrap(Value.from_op(out, (fv,), vjp), frames)


def upsample_bilinear(track: ControlSeries, n_samples: int) -> np.ndarray:
    if n_samples != track.n_samples:
        raise ValueError(
            f"n_samples={n_samples} does not match {len(track)} frames x hop {track.hop_samples}"
        )
    return bilinear_upsample(track.frames, track.hop_samples)


def hamming_envelope(frames, hop: int):
    """Overlap-add of Hamming windows (size 2*hop) centered at ``l * hop``.

    Sample ``j*hop + r`` receives ``frames[j] * w[hop + r] + frames[j+1] * w[r]``.
    """
    fv = as_value(frames)
    window = hamming(2 * hop)
    w_lo, w_hi = window[:hop], window[hop:]
    n_frames = fv.shape[0]
    extra = (1,) * (fv.ndim - 1)
    w_lo_b = w_lo.reshape((1, hop) + extra)
    w_hi_b = w_hi.reshape((1, hop) + extra)
    data = fv.data
    nxt = np.concatenate([data[1:], np.zeros_like(data[:1])], axis=0)
    blocks = data[:, None] * w_hi_b + nxt[:, None] * w_lo_b
    out = blocks.reshape((n_frames * hop,) + data.shape[1:])

    def vjp(g):
        gb = g.reshape((n_frames, hop) + data.shape[1:])
        grad = (gb * w_hi_b).sum(axis=1)
        grad[1:] += (gb[:-1] * w_lo_b).sum(axis=1)
        return (grad,)

    return unwrap(Value.from_op(out, (fv,), vjp), frames)


def overlap_add_envelope(track: ControlSeries, frame_size: int = 128, hop: int = CONTROL_HOP) -> np.ndarray:
    if frame_size != 2 * hop:
        raise ValueError("only 50% overlap (frame_size == 2 * hop) is supported")
    if hop != track.hop_samples:
        raise ValueError(f"hop {hop} does not match track hop {track.hop_samples}")
    return hamming_envelope(track.frames, hop)
