import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffdsp import autodiff as ad
from diffdsp.autodiff import Value, backward, finite_diff_check
from diffdsp.optim import AdamState, adam_step
from diffdsp.signal import bilinear_upsample, hamming_envelope, stft_mag
from diffdsp.synth import normalize_harmonics, scaled_sigmoid


def grad_of(f, *arrays):
    leaves = [Value(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    backward(f(*leaves))
    return [leaf.grad for leaf in leaves]


class TestBackward:
    def test_square(self):
        (g,) = grad_of(lambda x: x * x, 3.0)
        assert g == pytest.approx(6.0)

    def test_elementwise_product(self):
        ga, gb = grad_of(lambda a, b: (a * b).sum(), [1.0, 2.0], [3.0, 4.0])
        assert np.allclose(ga, [3, 4]) and np.allclose(gb, [1, 2])

    def test_non_scalar_loss_raises(self):
        x = Value(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            backward(x * 2.0)

    def test_shared_subexpression(self):
        f = lambda x: ad.sin(x) * ad.exp(x)
        (g1,) = grad_of(lambda x: (f(x) + f(x)).sum(), [0.3, -1.2])
        (g2,) = grad_of(lambda x: (2.0 * f(x)).sum(), [0.3, -1.2])
        assert np.allclose(g1, g2, rtol=1e-14)

    def test_reused_node(self):
        x = Value(np.array([2.0]), requires_grad=True)
        y = x * x
        backward((y * y).sum())
        assert x.grad[0] == pytest.approx(4 * 2.0**3)

    def test_repeated_backward_accumulates(self):
        x = Value(np.array([1.5]), requires_grad=True)
        loss = (x * x).sum()
        backward(loss)
        backward(loss)
        assert x.grad[0] == pytest.approx(6.0)
        x.zero_grad()
        assert x.grad[0] == 0.0

    def test_broadcast_gradient(self):
        ga, gb = grad_of(lambda a, b: (a * b).sum(), np.ones((3, 4)), np.arange(4.0))
        assert np.allclose(ga, np.tile(np.arange(4.0), (3, 1)))
        assert np.allclose(gb, [3, 3, 3, 3])

    def test_constants_get_no_grad(self):
        x = Value(np.ones(2), requires_grad=True)
        c = Value(np.ones(2))
        backward((x * c).sum())
        assert not c.grad.any()


class TestFiniteDiff:
    def test_sum_of_squares(self, rng):
        x = Value(rng.normal(size=20), requires_grad=True)
        assert finite_diff_check(lambda p: (p[0] * p[0]).sum(), [x], n_samples=None) < 1e-8

    def test_constant_reports_zero(self):
        x = Value(np.ones(4), requires_grad=True)
        assert finite_diff_check(lambda p: (p[0] * 0.0).sum() + 5.0, [x], n_samples=None) == 0.0

    def test_scaled_sigmoid_converges_quadratically(self, rng):
        x = Value(rng.normal(0, 2, 30), requires_grad=True)
        f = lambda p: (scaled_sigmoid(p[0]) * ad.sin(p[0])).sum()
        coarse = finite_diff_check(f, [x], epsilon=1e-3, n_samples=None)
        fine = finite_diff_check(f, [x], epsilon=1e-4, n_samples=None)
        assert fine < 1e-5
        assert fine < coarse / 20

    def test_restores_parameters(self, rng):
        data = rng.normal(size=10)
        x = Value(data.copy(), requires_grad=True)
        finite_diff_check(lambda p: (ad.exp(p[0])).sum(), [x])
        assert np.array_equal(x.data, data)

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValueError):
            finite_diff_check(lambda p: p[0].sum(), [Value(np.ones(2), requires_grad=True)], epsilon=0)


PRIMITIVES = {
    "add": lambda x, y: x + y,
    "mul": lambda x, y: x * y,
    "div": lambda x, y: x / (y * y + 1.0),
    "sin": lambda x, y: ad.sin(x) * y,
    "cumsum": lambda x, y: ad.cumsum(x * y),
    "log": lambda x, y: ad.log(x * x + 0.5),
    "power": lambda x, y: (y * y + 1.0) ** 1.7,
    "sigmoid": lambda x, y: scaled_sigmoid(x) + y,
    "normalize": lambda x, y: normalize_harmonics(ad.reshape(x * y, (4, 3))).reshape(-1),
    "interpolate": lambda x, y: bilinear_upsample(x + y, 5),
    "overlap_add": lambda x, y: hamming_envelope(x * y, 8),
    "dft_magnitude": lambda x, y: stft_mag(ad.concatenate([x, y]), 8, 2).reshape(-1),
    "getitem": lambda x, y: x[2:7] * y[::2][:5],
    "matmul": lambda x, y: ad.reshape(x, (3, 4)) @ ad.reshape(y, (4, 3)),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name, rng):
    op = PRIMITIVES[name]
    x = Value(rng.normal(size=12), requires_grad=True)
    y = Value(rng.normal(size=12), requires_grad=True)
    w = rng.normal(size=op(Value(x.data), Value(y.data)).shape)
    err = finite_diff_check(lambda p: (op(p[0], p[1]) * w).sum(), [x, y], n_samples=None)
    assert err < 1e-3


class TestAdam:
    def test_first_step_is_lr_sign(self, rng):
        g = rng.normal(size=50)
        p = rng.normal(size=50)
        (new,) = adam_step(AdamState(), [p], [g])
        assert np.allclose(new - p, -1e-3 * np.sign(g), rtol=1e-4)

    def test_zero_gradients_are_identity(self, rng):
        p = rng.normal(size=7)
        state = AdamState()
        q = p
        for _ in range(100):
            (q,) = adam_step(state, [q], [np.zeros(7)])
        assert np.array_equal(q, p)

    def test_decay_schedule(self):
        state = AdamState()
        assert state.effective_lr(0) == 1e-3
        assert state.effective_lr(9999) == 1e-3
        assert state.effective_lr(10000) == pytest.approx(0.00098, rel=1e-12)
        assert state.effective_lr(20000) == pytest.approx(1e-3 * 0.98**2, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(AdamState(), [np.zeros(3)], [np.zeros(4)])

    def test_matches_reference_recursion(self, rng):
        grads = rng.normal(size=(25, 4))
        state = AdamState(learning_rate=0.01, decay_interval=10)
        p = np.zeros(4)
        for g in grads:
            (p,) = adam_step(state, [p], [g])
        # scalar reference, one coordinate at a time
        for i in range(4):
            m = v = 0.0
            q = 0.0
            for t, g in enumerate(grads[:, i], start=1):
                lr = 0.01 * 0.98 ** ((t - 1) // 10)
                m = 0.9 * m + 0.1 * g
                v = 0.999 * v + 0.001 * g * g
                q -= lr * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
            assert p[i] == pytest.approx(q, rel=1e-12, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-6, 1e3), st.floats(-1e3, 1e3))
    def test_first_step_magnitude_bounded(self, scale, start):
        (new,) = adam_step(AdamState(), [np.array([start])], [np.array([scale])])
        assert abs(new[0] - start) <= 1e-3 * (1 + 1e-9)
