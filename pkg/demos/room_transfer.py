"""
Reverb: bypass and transfer
===========================

A parameter set with a reverb impulse response can be rendered with the
room (``render``), without it (``dereverb``), and the room can be put on
any other dry signal (``acoustic_transfer``). The identity
``transfer(dereverb(p), p.ir) == render(p)`` holds to rounding error.
"""

from pathlib import Path

import numpy as np

from diffdsp import HarmonicParams, ImpulseResponse, NoiseParams, SynthParams, acoustic_transfer, dereverb, render
from diffdsp.fileio import write_wav
from diffdsp.signal import AudioBuffer

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
rng = np.random.default_rng(0)

# a 0.5 s room: direct path plus an exponentially decaying noise tail
n = np.arange(8000)
taps = 0.1 * rng.normal(size=n.size) * np.exp(-6.9 * n / 4800)
taps[0] = 1.0
room = ImpulseResponse(taps)

frames = 250
notes = np.repeat([262.0, 330.0, 392.0, 523.0], frames // 4 + 1)[:frames]
amp = np.where(np.arange(frames) % 62 < 40, 0.5, -30.0)  # gaps between notes
params = SynthParams(
    HarmonicParams(notes, amp, np.tile(np.linspace(0.5, -1.0, 15), (frames, 1))),
    NoiseParams(np.full((frames, 65), -5.0)),
    room,
)

wet = render(params)
dry = dereverb(params)
write_wav(out / "notes_wet.wav", wet)
write_wav(out / "notes_dry.wav", dry)

# the silent gaps are where the room shows
gap = slice(45 * 64, 60 * 64)
print("rms in first gap, dry %.2e, wet %.2e" % (np.sqrt(np.mean(dry.samples[gap] ** 2)), np.sqrt(np.mean(wet.samples[gap] ** 2))))

rebuilt = acoustic_transfer(dry, room)
print("max |transfer(dereverb(p)) - render(p)|:", np.max(np.abs(rebuilt.samples - wet.samples)))

# any dry signal can be placed in the room, here a click train
clicks = np.zeros(16000)
clicks[::4000] = 0.8
write_wav(out / "clicks_in_room.wav", acoustic_transfer(AudioBuffer(clicks, 16000), room))
