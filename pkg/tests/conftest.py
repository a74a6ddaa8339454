import numpy as np
import pytest

from diffdsp.signal import AudioBuffer

SR = 16_000


def sine(freq, n_samples, amplitude=1.0, sr=SR, phase=0.0):
    n = np.arange(n_samples)
    return amplitude * np.sin(2 * np.pi * freq * n / sr + phase)


def buffer(samples, sr=SR):
    return AudioBuffer(np.asarray(samples, dtype=np.float64), sr)


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def direct_convolution(x, h):
    out = np.zeros(len(x))
    for i in range(len(x)):
        for j in range(min(len(h), i + 1)):
            out[i] += h[j] * x[i - j]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
