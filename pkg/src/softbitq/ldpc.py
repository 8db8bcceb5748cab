"""Rate-1/2 quasi-cyclic LDPC code (n = 648) with sum-product decoding.

Encoding is systematic: codeword = [payload, parity]. The generator is
derived once from the parity-check matrix by GF(2) elimination. The
decoder is the tanh-rule sum-product algorithm with early stopping on a
zero syndrome; inside the decoder a positive LLR means "bit is 0".
The decoder is written batch-first because Monte Carlo runs decode
thousands of codewords with identical structure.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

N_BITS = 648
N_PAYLOAD = 324
LIFTING = 27

_TANH_FLOOR = 1e-4  # keeps check-node products away from zero
_TANH_CEIL = 1.0 - 1e-6  # caps message magnitude near 14.5 nats


def _load_base_matrix() -> np.ndarray:
    ref = importlib.resources.files("softbitq").joinpath("data/wlan_n648_r12_z27.txt")
    rows = []
    for line in ref.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([int(v) for v in line.split()])
    base = np.array(rows, dtype=np.int64)
    if base.shape != (12, 24):
        raise ValueError(f"base matrix has shape {base.shape}, expected (12, 24)")
    return base


def expand_base_matrix(base: np.ndarray, z: int = LIFTING) -> np.ndarray:
    """Expand a shift-index base matrix into a dense binary H."""
    rows, cols = base.shape
    h = np.zeros((rows * z, cols * z), dtype=np.uint8)
    eye = np.eye(z, dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            shift = base[r, c]
            if shift >= 0:
                h[r * z:(r + 1) * z, c * z:(c + 1) * z] = np.roll(eye, shift % z, axis=1)
    return h


def _derive_parity_map(h: np.ndarray) -> np.ndarray:
    """Row-reduce H until its right square block is the identity.

    Returns P such that parity = (payload @ P.T) mod 2. Raises if the
    right block is singular, which would mean the stored matrix is
    corrupt.
    """
    m, n = h.shape
    k = n - m
    work = h.copy()
    for j in range(m):
        col = k + j
        pivot_rows = np.nonzero(work[j:, col])[0]
        if pivot_rows.size == 0:
            raise ValueError(f"parity block singular at column {col}")
        pivot = j + pivot_rows[0]
        if pivot != j:
            work[[j, pivot]] = work[[pivot, j]]
        others = np.nonzero(work[:, col])[0]
        others = others[others != j]
        work[others] ^= work[j]
    return work[:, :k].copy()


@dataclass
class LdpcCode:
    h: np.ndarray  # (324, 648) uint8 parity-check matrix
    parity_map: np.ndarray  # (324, 324) uint8, parity = payload @ P.T mod 2
    z: int = LIFTING
    # edge bookkeeping for the batched decoder, built lazily
    _edges: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def k(self) -> int:
        return self.h.shape[1] - self.h.shape[0]

    def edge_structure(self):
        if not self._edges:
            check_idx, var_idx = np.nonzero(self.h)
            # nonzero already yields row-major order: sorted by check, then var
            check_deg = np.bincount(check_idx, minlength=self.h.shape[0])
            check_ptr = np.concatenate([[0], np.cumsum(check_deg)[:-1]])
            var_order = np.argsort(var_idx, kind="stable")
            var_deg = np.bincount(var_idx, minlength=self.h.shape[1])
            if (var_deg == 0).any() or (check_deg == 0).any():
                raise ValueError("degenerate code: empty row or column in H")
            var_ptr = np.concatenate([[0], np.cumsum(var_deg)[:-1]])
            self._edges = dict(
                check_idx=check_idx,
                var_idx=var_idx,
                check_deg=check_deg,
                check_ptr=check_ptr,
                var_order=var_order,
                var_deg=var_deg,
                var_ptr=var_ptr,
            )
        return self._edges


def build_wlan_code() -> LdpcCode:
    """Construct the (324, 648) code shipped with the package."""
    h = expand_base_matrix(_load_base_matrix())
    p = _derive_parity_map(h)
    return LdpcCode(h=h, parity_map=p)


def encode(payload: np.ndarray, code: LdpcCode) -> np.ndarray:
    """Systematically encode payload bits.

    Args:
        payload: 0/1 array of shape (324,) or (B, 324).
        code: The code.

    Returns:
        Codewords with the same leading shape, trailing axis 648.
    """
    arr = np.asarray(payload)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr).astype(np.float32)
    # float32 matmul is exact here: row sums are bounded by 324 < 2^24
    parity = (arr2 @ code.parity_map.T.astype(np.float32)) % 2.0
    out = np.concatenate([arr2, parity], axis=1).astype(np.uint8)
    return out[0] if single else out


def syndrome_ok(bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    """True where H @ bits = 0 (mod 2). Accepts (648,) or (B, 648)."""
    arr = np.atleast_2d(np.asarray(bits)).astype(np.float32)
    syn = (arr @ code.h.T.astype(np.float32)) % 2.0
    ok = ~(syn > 0).any(axis=1)
    return ok[0] if np.asarray(bits).ndim == 1 else ok


def decode_bp_batch(
    llrs: np.ndarray, code: LdpcCode, max_iter: int = 50
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sum-product decode a batch of LLR vectors.

    Args:
        llrs: (B, 648) channel LLRs, positive favoring bit 0.
        code: The code.
        max_iter: Iteration cap.

    Returns:
        bits: (B, 648) uint8 hard decisions.
        iterations: (B,) iterations consumed; 0 means the channel hard
            decisions already satisfied every check.
        ok: (B,) bool, True where the syndrome reached zero.
    """
    e = code.edge_structure()
    var_idx = e["var_idx"]
    check_ptr = e["check_ptr"]
    check_deg = e["check_deg"]
    var_order = e["var_order"]
    var_ptr = e["var_ptr"]

    lch = np.ascontiguousarray(np.asarray(llrs, dtype=np.float32))
    if lch.ndim != 2 or lch.shape[1] != code.n:
        raise ValueError(f"expected (B, {code.n}) LLRs, got {lch.shape}")
    batch = lch.shape[0]

    bits_out = (lch < 0).astype(np.uint8)
    iters_out = np.full(batch, max_iter, dtype=np.int64)
    ok_out = syndrome_ok(bits_out, code)
    iters_out[ok_out] = 0

    active = np.nonzero(~ok_out)[0]
    if active.size == 0:
        return bits_out, iters_out, ok_out

    lch_act = lch[active]
    v2c = lch_act[:, var_idx]
    last_hard = lch_act < 0.0

    for iteration in range(1, max_iter + 1):
        t = np.tanh(0.5 * v2c)
        t = np.where(t >= 0.0, np.clip(t, _TANH_FLOOR, _TANH_CEIL),
                     np.clip(t, -_TANH_CEIL, -_TANH_FLOOR)).astype(np.float32)
        prod = np.multiply.reduceat(t, check_ptr, axis=1)
        ext = np.repeat(prod, check_deg, axis=1) / t
        np.clip(ext, -_TANH_CEIL, _TANH_CEIL, out=ext)
        c2v = 2.0 * np.arctanh(ext)

        posterior = lch_act.copy()
        sums = np.add.reduceat(c2v[:, var_order], var_ptr, axis=1)
        posterior += sums
        v2c = posterior[:, var_idx] - c2v

        hard = posterior < 0.0
        par = np.add.reduceat(hard[:, var_idx].astype(np.int32), check_ptr, axis=1)
        converged = ~((par & 1).any(axis=1))

        if converged.any():
            rows = active[converged]
            bits_out[rows] = hard[converged]
            iters_out[rows] = iteration
            ok_out[rows] = True
            keep = ~converged
            if not keep.any():
                return bits_out, iters_out, ok_out
            active = active[keep]
            v2c = v2c[keep]
            lch_act = lch_act[keep]
            last_hard = hard[keep]
        else:
            last_hard = hard

    bits_out[active] = last_hard
    return bits_out, iters_out, ok_out


def decode_bp(llrs: np.ndarray, code: LdpcCode, max_iter: int = 50):
    """Single-codeword convenience wrapper around decode_bp_batch."""
    bits, iters, ok = decode_bp_batch(np.asarray(llrs)[None, :], code, max_iter)
    return bits[0], int(iters[0]), bool(ok[0])
