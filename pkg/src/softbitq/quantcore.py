"""Fixed-codebook latent quantization and the annealed soft entropy.

The quantizer is a uniform 64-level codebook over [-0.8, 0.8], fixed
ahead of training (not learned). Training sees the quantizer through
two differentiable surrogates: a straight-through gradient for the
rounding itself, and a temperature-controlled soft assignment whose
expected code length term can be annealed from nearly uniform to
effectively hard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .config import CODEBOOK_HI, CODEBOOK_LO, CODEBOOK_SIZE, TemperatureSchedule

LOG2E = float(np.log2(np.e))


@dataclass(frozen=True)
class Codebook:
    """Strictly increasing quantizer centers and their decision midpoints."""

    centers: np.ndarray
    midpoints: np.ndarray = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 1 or c.size < 2 or not (np.diff(c) > 0).all():
            raise ValueError("centers must be a strictly increasing 1-D array")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "midpoints", 0.5 * (c[:-1] + c[1:]))

    @property
    def size(self) -> int:
        return self.centers.size


def build_codebook(size: int = CODEBOOK_SIZE, lo: float = CODEBOOK_LO,
                   hi: float = CODEBOOK_HI) -> Codebook:
    """Uniform codebook over [lo, hi] with `size` levels.

    For a symmetric range the centers are built by mirroring the upper
    half so that centers[i] == -centers[size-1-i] exactly in floating
    point; the decision boundary between the two middle centers is then
    exactly 0.0 and ties resolve toward the lower index as documented.
    """
    if size < 2 or not hi > lo:
        raise ValueError("need size >= 2 and hi > lo")
    spacing = (hi - lo) / (size - 1)
    if lo == -hi and size % 2 == 0:
        upper = hi - spacing * np.arange(size // 2)  # descending from hi
        centers = np.concatenate([-upper, upper[::-1]])
    else:
        centers = np.linspace(lo, hi, size)
    return Codebook(centers=centers)


def quantize(z: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Nearest-center indices with saturation outside the range.

    Exact midpoints between two centers round toward the lower index.

    Args:
        z: Any shape of real values.
        codebook: Target codebook.

    Returns:
        int64 indices, same shape as z.
    """
    z = np.asarray(z)
    idx = np.searchsorted(codebook.midpoints, z, side="left")
    return idx.astype(np.int64)


def dequantize(indices: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Map indices back to center values."""
    return codebook.centers[np.asarray(indices)]


def ste_backward(upstream: np.ndarray) -> np.ndarray:
    """Straight-through gradient of the quantizer: identity.

    The rounding z -> Q(z) has zero derivative almost everywhere, so
    training treats it as the identity map in the backward pass and
    passes the upstream gradient through unchanged (saturated inputs
    included).
    """
    return upstream


def soft_assign(z: np.ndarray, codebook: Codebook, tau: float,
                convention: str = "multiplicative") -> np.ndarray:
    """Softmax assignment of each sample to the codebook centers.

    With the multiplicative convention the logits are -tau * (z - c_i)^2,
    so tau -> 0 gives uniform weights and tau -> inf approaches the hard
    one-hot assignment. The divisive convention uses -(z - c_i)^2 / tau,
    which anneals in the opposite direction of tau.

    Args:
        z: Real samples, any shape; flattened internally.
        codebook: The codebook.
        tau: Temperature, > 0.
        convention: "multiplicative" or "divisive".

    Returns:
        Array of shape (z.size, M) with rows summing to 1.
    """
    zf = np.asarray(z, dtype=np.float64).reshape(-1)
    d2 = (zf[:, None] - codebook.centers[None, :]) ** 2
    if convention == "multiplicative":
        logits = -tau * d2
    elif convention == "divisive":
        logits = -d2 / tau
    else:
        raise ValueError(f"unknown convention {convention!r}")
    logits -= logits.max(axis=1, keepdims=True)
    q = np.exp(logits)
    q /= q.sum(axis=1, keepdims=True)
    return q


def soft_entropy(z: np.ndarray, codebook: Codebook, tau: float, p: np.ndarray,
                 unit: str = "nats", convention: str = "multiplicative") -> float:
    """Differentiable code-length estimate of the quantized latents.

    H = -(1/N) * sum_j sum_i q_ij * log p_i, with q the soft assignment
    of sample j and p an externally supplied probability table. For
    large tau (multiplicative convention) this approaches the plug-in
    entropy of the hard assignments when p is estimated from the same
    batch.

    Args:
        z: Latent samples, any shape.
        codebook: The codebook.
        tau: Temperature.
        p: 64 probabilities, all > 0.
        unit: "nats" (training loss) or "bits" (reporting).

    Returns:
        Scalar entropy estimate.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (codebook.size,) or (p <= 0).any():
        raise ValueError("p must hold one strictly positive value per center")
    q = soft_assign(z, codebook, tau, convention)
    h_nats = float(-(q @ np.log(p)).mean())
    if unit == "nats":
        return h_nats
    if unit == "bits":
        return h_nats * LOG2E
    raise ValueError(f"unknown unit {unit!r}")


def hard_entropy(p: np.ndarray, unit: str = "bits") -> float:
    """Plug-in entropy of a distribution; zero-probability cells contribute 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    h_bits = float(-(nz * np.log2(nz)).sum())
    return h_bits if unit == "bits" else h_bits / LOG2E


_EXP_CUTOFF = 20.0  # exp(-20) ~ 2e-9, beneath float32 gradient resolution
_TWO_POW = np.array([2.0 ** e for e in range(-32, 2)])


@numba.njit(inline="always")
def _fast_exp(a):  # pragma: no cover
    # exp(a) for a in [-_EXP_CUTOFF, 0]: 2^i * e^x with x = frac * ln2,
    # degree-6 Taylor (rel err ~1e-5, ample for softmax weights); the
    # 2^i factor is a table lookup, which beats calling out to libm here
    t = a * 1.4426950408889634
    i = int(t) - (t < 0.0)
    x = (t - i) * 0.6931471805599453
    poly = 1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (
        1.0 / 24.0 + x * (1.0 / 120.0 + x * (1.0 / 720.0))))))
    return poly * _TWO_POW[i + 32]


@numba.njit(cache=True, fastmath=True)
def _entropy_value_grad_kernel(z, centers, log_p, tau):  # pragma: no cover
    n = z.size
    m = centers.size
    grad = np.empty(n, dtype=np.float32)
    total = 0.0
    for j in range(n):
        zj = z[j]
        peak = -1e30
        i_star = 0
        for i in range(m):
            d = zj - centers[i]
            a = -tau * d * d
            if a > peak:
                peak = a
                i_star = i
        s = 0.0  # sum of weights
        su = 0.0  # sum of weights * (-log p)
        sa = 0.0  # sum of weights * dlogit/dz
        sua = 0.0  # sum of weights * (-log p) * dlogit/dz
        # centers are sorted, so -tau*d^2 is unimodal around i_star and the
        # outward scans may stop at the first negligible weight
        for i in range(i_star, m):
            d = zj - centers[i]
            a = -tau * d * d - peak
            if a < -_EXP_CUTOFF:
                break
            w = _fast_exp(a)
            da = -2.0 * tau * d
            u = -log_p[i]
            s += w
            su += w * u
            sa += w * da
            sua += w * u * da
        for i in range(i_star - 1, -1, -1):
            d = zj - centers[i]
            a = -tau * d * d - peak
            if a < -_EXP_CUTOFF:
                break
            w = _fast_exp(a)
            da = -2.0 * tau * d
            u = -log_p[i]
            s += w
            su += w * u
            sa += w * da
            sua += w * u * da
        total += su / s
        # d/dz of sum_i q_i u_i with q = softmax(a):
        grad[j] = np.float32(sua / s - (su / s) * (sa / s))
    return total / n, grad


def soft_entropy_value_and_grad(z_flat: np.ndarray, codebook: Codebook, tau: float,
                                p: np.ndarray) -> tuple[float, np.ndarray]:
    """Fused soft entropy (nats, multiplicative convention) and d/dz.

    The probability table is treated as a constant: no gradient flows
    through log p. Used by the training loop; numerically equivalent to
    differentiating soft_entropy by hand.
    """
    z32 = np.ascontiguousarray(z_flat, dtype=np.float32).reshape(-1)
    log_p = np.log(np.asarray(p, dtype=np.float64)).astype(np.float32)
    value, grad = _entropy_value_grad_kernel(
        z32, codebook.centers.astype(np.float32), log_p, np.float32(tau)
    )
    grad /= z32.size  # kernel accumulates per-sample terms; H is their mean
    return float(value), grad


def tau_at_epoch(t: int, schedule: TemperatureSchedule | None = None) -> float:
    """Annealing temperature at epoch t: tau0 * growth^t."""
    if schedule is None:
        schedule = TemperatureSchedule()
    return schedule.at_epoch(t)
