"""
Fitting controls to a clip
==========================

Analysis by synthesis: the target below is made by the synthesizer
itself, so a perfect fit exists. We start from the tracker's f0 and
mid-range controls, run ADAM on the multi-scale spectral loss and
compare the resynthesis against the target.
"""

import time

import numpy as np

from diffdsp import FitConfig, HarmonicParams, NoiseParams, SynthParams, compare, fit, render

frames = 125  # half a second
target_params = SynthParams(
    HarmonicParams(
        np.geomspace(220, 330, frames),
        np.full(frames, 0.5),
        np.tile(np.linspace(0.5, -0.5, 10), (frames, 1)),
    ),
    NoiseParams(np.full((frames, 65), -1.5)),
)
target = render(target_params)

# a short run; the acceptance suite uses 2000 steps
cfg = FitConfig(steps=300, n_harmonics=10)
start = time.perf_counter()
result = fit(target, cfg, callback=lambda step, loss: step % 50 == 0 and print(f"step {step:4d}  loss {loss:.3f}"))
print("fit took %.1f s" % (time.perf_counter() - start))

losses = [row.loss for row in result.history]
print("loss: %.3f -> %.3f (best %.3f)" % (losses[0], losses[-1], min(losses)))

# f0 was frozen at the tracker estimate, so this mostly measures the tracker
print(compare(target, render(result.params)))

# the fitted amplitude track vs the one that made the target
print("amplitude raw, true %.2f, fitted mean %.2f" % (0.5, result.params.harmonic.amplitude_raw.mean()))
