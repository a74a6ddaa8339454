"""
A tour of the synthesizer
=========================

Render a harmonic-plus-noise chirp from hand-written controls, look at
its spectrum, then transpose it down an octave. Writes WAV files into
``demos/out/``.
"""

from pathlib import Path

import numpy as np

from diffdsp import HarmonicParams, NoiseParams, SynthParams, pitch_shift, render, stft_magnitude
from diffdsp.fileio import write_wav
from diffdsp.synth import scaled_sigmoid

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# one control frame every 64 samples (4 ms at 16 kHz); 250 frames is one second
frames = 250
f0 = np.geomspace(220, 440, frames)

# raw controls go through a scaled sigmoid, so 0 means "mid" and -30 means "off"
print("amplitude at raw 0:", scaled_sigmoid(np.array(0.0)))

harmonic_raw = np.tile(np.linspace(1.0, -1.0, 20), (frames, 1))
noise_raw = np.full((frames, 65), -2.0)
noise_raw[:, 40:] = -4.0  # darker noise above ~5 kHz

params = SynthParams(
    HarmonicParams(f0, np.full(frames, 0.5), harmonic_raw),
    NoiseParams(noise_raw),
)
audio = render(params)
write_wav(out / "chirp.wav", audio)

# the strongest bin of the first and last frames follows f0
spec = stft_magnitude(audio, 2048)
bin_hz = audio.sample_rate / 2048
print("first frame peak: %.0f Hz" % (np.argmax(spec.magnitudes[1]) * bin_hz))
print("last frame peak:  %.0f Hz" % (np.argmax(spec.magnitudes[-2]) * bin_hz))

# only f0 changes; the timbre controls are reused as they are
lower = pitch_shift(params, -12)
write_wav(out / "chirp_octave_down.wav", render(lower))
print("f0 range after shift: %.1f .. %.1f Hz" % (lower.harmonic.f0.min(), lower.harmonic.f0.max()))
