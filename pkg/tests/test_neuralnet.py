import numpy as np
import pytest

from softbitq import neuralnet

SEED = 3
FD_STEP = 1e-6


def numeric_grad(net, x, loss_fn, step=FD_STEP):
    """Central finite differences of loss_fn(net.forward(x)[0]) in theta."""
    grad = np.zeros_like(net.theta)
    for i in range(net.theta.size):
        orig = net.theta[i]
        net.theta[i] = orig + step
        hi = loss_fn(net.forward(x)[0])
        net.theta[i] = orig - step
        lo = loss_fn(net.forward(x)[0])
        net.theta[i] = orig
        grad[i] = (hi - lo) / (2 * step)
    return grad


class TestForward:
    def test_matches_manual_chain(self):
        rng = np.random.default_rng(SEED)
        net = neuralnet.Mlp([2, 3, 2], ["relu", "tanh"], rng, dtype=np.float64)
        x = rng.normal(size=(5, 2))
        w0, b0 = net.layers[0].W, net.layers[0].b
        w1, b1 = net.layers[1].W, net.layers[1].b
        expected = np.tanh(np.maximum(x @ w0.T + b0, 0.0) @ w1.T + b1)
        out, _ = net.forward(x)
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_theta_is_shared_storage(self):
        net = neuralnet.Mlp([2, 2, 1], ["relu", "linear"],
                            np.random.default_rng(SEED))
        net.theta[:] = 0.0
        out, _ = net.forward(np.ones((1, 2), dtype=np.float32))
        np.testing.assert_array_equal(out, [[0.0]])

    def test_glorot_scale(self):
        rng = np.random.default_rng(SEED)
        net = neuralnet.Mlp([64, 256, 1], ["relu", "linear"], rng, np.float64)
        observed = net.layers[0].W.std()
        np.testing.assert_allclose(observed, neuralnet.glorot_sigma(64, 256),
                                   rtol=0.02)

    def test_builder_shapes(self):
        rng = np.random.default_rng(SEED)
        enc = neuralnet.build_encoder(6, rng)
        dec = neuralnet.build_decoder(6, rng)
        assert enc.sizes == [6, 24, 24, 24, 24, 3]
        assert dec.sizes == [3, 24, 24, 24, 24, 6]
        assert enc.input_width == 6 and enc.output_width == 3
        out, _ = enc.forward(np.zeros((4, 6), dtype=np.float32))
        assert out.shape == (4, 3)
        assert np.all(np.abs(out) <= 1.0)

    def test_variance_probe_depth(self):
        rng = np.random.default_rng(SEED)
        probe = neuralnet.build_variance_probe(6, 3, rng)
        assert probe.sizes == [6, 24, 24, 24, 1]
        for layer in probe.layers:
            np.testing.assert_array_equal(layer.b, 0.0)


class TestBackward:
    @pytest.mark.parametrize("acts", [["relu", "tanh"], ["tanh", "linear"],
                                      ["relu", "relu", "linear"]])
    def test_gradient_matches_finite_differences(self, acts):
        rng = np.random.default_rng(SEED)
        sizes = [3] + [5] * (len(acts) - 1) + [2]
        net = neuralnet.Mlp(sizes, acts, rng, dtype=np.float64)
        x = rng.normal(size=(7, 3))
        w = rng.normal(size=(7, 2))  # fixed projection makes the loss scalar

        out, cache = net.forward(x)
        analytic, _ = net.backward(cache, w)
        numeric = numeric_grad(net, x, lambda o: float((o * w).sum()))
        denom = max(np.abs(numeric).max(), 1.0)
        assert np.abs(analytic - numeric).max() / denom < 1e-6

    def test_input_gradient(self):
        rng = np.random.default_rng(SEED + 1)
        net = neuralnet.Mlp([4, 6, 3], ["tanh", "linear"], rng, np.float64)
        x = rng.normal(size=(2, 4))
        w = rng.normal(size=(2, 3))
        out, cache = net.forward(x)
        _, d_in = net.backward(cache, w)

        step = FD_STEP
        numeric = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            xp = x.copy()
            xp[idx] += step
            hi = float((net.forward(xp)[0] * w).sum())
            xp[idx] -= 2 * step
            lo = float((net.forward(xp)[0] * w).sum())
            numeric[idx] = (hi - lo) / (2 * step)
        np.testing.assert_allclose(d_in, numeric, rtol=1e-6, atol=1e-8)


class TestAdam:
    def test_matches_reference_updates(self):
        rng = np.random.default_rng(SEED)
        theta = rng.normal(size=10).astype(np.float64)
        ref = theta.copy()
        state = neuralnet.AdamState(10, lr=0.01, dtype=np.float64)
        m = np.zeros(10)
        v = np.zeros(10)
        for t in range(1, 6):
            g = rng.normal(size=10)
            neuralnet.adam_step(theta, g, state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
            np.testing.assert_allclose(theta, ref, rtol=1e-12)

    def test_descends_quadratic(self):
        theta = np.array([5.0, -3.0], dtype=np.float64)
        state = neuralnet.AdamState(2, lr=0.05, dtype=np.float64)
        for _ in range(400):
            neuralnet.adam_step(theta, 2 * theta, state)
        assert np.abs(theta).max() < 1e-2
