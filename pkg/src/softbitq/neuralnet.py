"""A small dense-network engine with hand-written backpropagation.

Parameters of a network live in one flat vector; layer weight matrices
are views into it. That keeps the optimizer to a handful of vectorized
operations per step regardless of layer count, which matters on a
single core. Training runs in float32; float64 instances are used for
finite-difference gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


def glorot_sigma(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(2.0 / (fan_in + fan_out)))


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in), view into the owning net's parameter vector
    b: np.ndarray  # (out,), view
    activation: str


class Mlp:
    """Fully connected network over a flat parameter vector.

    Args:
        sizes: Layer widths, input first, e.g. [6, 24, 24, 3].
        activations: One per weight layer, from ACTIVATIONS.
        rng: If given, weights are drawn Glorot-Gaussian
            (sigma = sqrt(2 / (fan_in + fan_out))) and biases start at 0.
        dtype: float32 for training, float64 for gradient checking.
    """

    def __init__(self, sizes, activations, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per weight layer")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        self.sizes = list(sizes)
        self.dtype = np.dtype(dtype)
        total = sum(sizes[i + 1] * sizes[i] + sizes[i + 1] for i in range(len(sizes) - 1))
        self.theta = np.zeros(total, dtype=dtype)
        self.layers: list[DenseLayer] = []
        offset = 0
        for i, act in enumerate(activations):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            w = self.theta[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in)
            offset += fan_out * fan_in
            b = self.theta[offset:offset + fan_out]
            offset += fan_out
            if rng is not None:
                w[...] = rng.normal(0.0, glorot_sigma(fan_in, fan_out), w.shape)
            self.layers.append(DenseLayer(W=w, b=b, activation=act))

    @property
    def input_width(self) -> int:
        return self.sizes[0]

    @property
    def output_width(self) -> int:
        return self.sizes[-1]

    def forward(self, x: np.ndarray):
        """Run the network. Returns (output, cache) for backward()."""
        h = np.asarray(x, dtype=self.dtype)
        cache = []
        for layer in self.layers:
            pre = h @ layer.W.T
            pre += layer.b
            if layer.activation == "relu":
                out = np.maximum(pre, 0.0)
            elif layer.activation == "tanh":
                out = np.tanh(pre)
            else:
                out = pre
            cache.append((h, pre, out))
            h = out
        return h, cache

    def backward(self, cache, d_out: np.ndarray):
        """Backpropagate d(loss)/d(output).

        Returns:
            grad: flat gradient vector aligned with self.theta.
            d_in: gradient with respect to the network input.
        """
        grad = np.zeros_like(self.theta)
        offset = self.theta.size
        d = np.asarray(d_out, dtype=self.dtype)
        for layer, (x_in, pre, out) in zip(reversed(self.layers), reversed(cache)):
            if layer.activation == "relu":
                d = d * (pre > 0.0)
            elif layer.activation == "tanh":
                d = d * (1.0 - out * out)
            fan_out, fan_in = layer.W.shape
            offset -= fan_out
            grad[offset:offset + fan_out] = d.sum(axis=0)
            offset -= fan_out * fan_in
            grad[offset:offset + fan_out * fan_in] = (d.T @ x_in).reshape(-1)
            d = d @ layer.W
        return grad, d


class AdamState:
    """Adam accumulators for one flat parameter vector."""

    def __init__(self, n_params: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, dtype=np.float32):
        self.m = np.zeros(n_params, dtype=dtype)
        self.v = np.zeros(n_params, dtype=dtype)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update, in place on theta. Returns theta."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m += (1.0 - b1) * (grad - state.m)
    state.v += (1.0 - b2) * (grad * grad - state.v)
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    theta -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return theta


def build_encoder(k: int, rng: np.random.Generator, dtype=np.float32) -> Mlp:
    """Soft-bit encoder f: K -> 3 latents, four relu layers of width 4K."""
    w = 4 * k
    return Mlp([k, w, w, w, w, 3], ["relu"] * 4 + ["tanh"], rng, dtype)


def build_decoder(k: int, rng: np.random.Generator, dtype=np.float32) -> Mlp:
    """Latent decoder g: 3 -> K soft bits, mirror of the encoder."""
    w = 4 * k
    return Mlp([3, w, w, w, w, k], ["relu"] * 4 + ["tanh"], rng, dtype)


def build_variance_probe(k: int, depth: int, rng: np.random.Generator,
                         dtype=np.float64) -> Mlp:
    """Bias-free net for latent-variance analysis: K -> (4K relu)*depth -> 1 linear.

    Biases are allocated but stay at zero, which is equivalent to the
    bias-free setting for forward statistics.
    """
    sizes = [k] + [4 * k] * depth + [1]
    return Mlp(sizes, ["relu"] * depth + ["linear"], rng, dtype)
