"""Flooding sum-product decoding on the Tanner graph.

Works on a single frame (N,) or a batch (F, N); every per-frame quantity is
computed row-wise, so results do not depend on how frames are batched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ldpc_code import ParityCheckMatrix

LLR_CLAMP = 50.0
_PHI_FLOOR = 1e-12


def phi(x):
    """-ln tanh(x/2) for x > 0 (self-inverse)."""
    x = np.clip(x, _PHI_FLOOR, LLR_CLAMP)
    return np.log1p(2.0 / np.expm1(x))


@dataclass
class DecoderState:
    """Per-edge check-to-variable messages (F, E) and the iteration count."""

    c2v: np.ndarray
    iterations: int = 0


@dataclass
class DecodeResult:
    posterior: np.ndarray
    hard: np.ndarray
    extrinsic: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


class BPDecoder:
    def __init__(self, H: ParityCheckMatrix):
        self.H = H
        # H stores edges column-major; checks are processed in row-major order
        self._by_row = np.lexsort((H.cols, H.rows))
        row_w = H.row_weights
        nonempty = row_w > 0
        starts = np.concatenate([[0], np.cumsum(row_w)[:-1]])
        self._row_starts = starts[nonempty]
        self._row_w = row_w[nonempty]
        # with LLR = ln P(1) - ln P(0) the tanh rule carries a factor (-1)^w
        # for a check of weight w; repeat it per edge in row order
        self._odd = np.repeat(self._row_w & 1, self._row_w).astype(np.int64)
        data = np.ones(H.num_edges)
        # (N, E) incidence: posterior sums per column
        self._col_sum = sp.csr_matrix((data, (H.cols, np.arange(H.num_edges))), shape=(H.n, H.num_edges))
        self._csr = H.csr.astype(np.int64)

    @property
    def num_edges(self) -> int:
        return self.H.num_edges

    def init_state(self, frames: int = 1) -> DecoderState:
        return DecoderState(np.zeros((frames, self.num_edges)))

    def _check_update(self, v2c: np.ndarray) -> np.ndarray:
        """Exact tanh-rule check update on (F, E) column-major messages."""
        x = v2c[:, self._by_row]
        zero = (x == 0).astype(np.int64)
        mag = phi(np.abs(x))
        neg = (x < 0).astype(np.int64)
        tot = np.add.reduceat(mag, self._row_starts, axis=1)
        par = np.add.reduceat(neg, self._row_starts, axis=1) & 1
        zeros = np.add.reduceat(zero, self._row_starts, axis=1)
        tot = np.repeat(tot, self._row_w, axis=1)
        par = np.repeat(par, self._row_w, axis=1)
        zeros = np.repeat(zeros, self._row_w, axis=1)
        out_mag = phi(np.maximum(tot - mag, _PHI_FLOOR))
        # an erased (exactly zero) input on any other edge erases the output
        out_mag[zeros - zero > 0] = 0.0
        sign = 1.0 - 2.0 * (par ^ neg ^ self._odd)
        out = np.empty_like(x)
        out[:, self._by_row] = np.clip(sign * out_mag, -LLR_CLAMP, LLR_CLAMP)
        return out

    def column_sums(self, c2v: np.ndarray) -> np.ndarray:
        return np.asarray((self._col_sum @ c2v.T).T)

    def iterate(self, state: DecoderState, channel: np.ndarray) -> np.ndarray:
        """One flooding iteration in place; returns the posterior LLRs (F, N)."""
        incoming = self.column_sums(state.c2v)
        v2c = (channel + incoming)[:, self.H.cols] - state.c2v
        v2c = np.clip(v2c, -LLR_CLAMP, LLR_CLAMP)
        state.c2v = self._check_update(v2c)
        state.iterations += 1
        return channel + self.column_sums(state.c2v)

    def syndrome_ok(self, hard: np.ndarray) -> np.ndarray:
        return ~((self._csr @ hard.T.astype(np.int64)) % 2).any(axis=0)

    def converged(self, posterior: np.ndarray) -> np.ndarray:
        """Syndrome satisfied and no erased (zero-LLR) bit."""
        return self.syndrome_ok((posterior > 0).astype(np.uint8)) & (posterior != 0).all(axis=1)

    def decode(self, llr, iterations: int = 100, early_exit: bool = True) -> DecodeResult:
        """Decode channel LLRs (ln P(1) - ln P(0)); extrinsic = posterior - input."""
        z = np.asarray(llr, dtype=np.float64)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        if z.shape[1] != self.H.n:
            raise ValueError(f"LLR length {z.shape[1]} != N = {self.H.n}")
        if iterations < 1:
            raise ValueError("need at least one iteration")
        z = np.clip(z, -LLR_CLAMP, LLR_CLAMP)
        frames = z.shape[0]
        posterior = z.copy()
        its = np.zeros(frames, dtype=np.int64)
        done = np.zeros(frames, dtype=bool)
        active = np.arange(frames)
        state = self.init_state(frames)
        for _ in range(iterations):
            sub = DecoderState(state.c2v[active])
            post = self.iterate(sub, z[active])
            state.c2v[active] = sub.c2v
            posterior[active] = post
            its[active] += 1
            if early_exit:
                ok = self.converged(post)
                done[active[ok]] = True
                active = active[~ok]
                if active.size == 0:
                    break
        hard = (posterior > 0).astype(np.uint8)
        converged = self.converged(posterior)
        res = DecodeResult(posterior, hard, posterior - z, its, converged)
        if single:
            res = DecodeResult(posterior[0], hard[0], res.extrinsic[0], its[0:1], converged[0:1])
        return res


def decode(llr, H: ParityCheckMatrix, iterations: int = 100, early_exit: bool = True) -> DecodeResult:
    return BPDecoder(H).decode(llr, iterations, early_exit)
