"""Noncoherent M-FSK mapping and the network-coded soft demodulator.

Bit labeling is natural binary with bit 0 most significant, so the network
symbol carried by a super-symbol (q1, q2) is simply ``q1 ^ q2``.
LLRs follow ``ln P(b=1) - ln P(b=0)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import i0e, logsumexp

from .channel import Csi, CsiMode

LLR_CLAMP = 50.0
PHASE_NODES = 32


def bits_per_symbol(m: int) -> int:
    mu = int(m).bit_length() - 1
    if m < 2 or 1 << mu != m:
        raise ValueError(f"modulation order must be a power of two >= 2, got {m}")
    return mu


def label_table(m: int) -> np.ndarray:
    """(M, mu) table: entry [q, j] is bit j of symbol q, most significant first."""
    mu = bits_per_symbol(m)
    q = np.arange(m)[:, None]
    return ((q >> (mu - 1 - np.arange(mu))) & 1).astype(np.int8)


def modulate(bits, m: int) -> np.ndarray:
    """Map groups of log2(M) bits (last axis) to tone indices."""
    bits = np.asarray(bits, dtype=np.int64)
    mu = bits_per_symbol(m)
    if bits.shape[-1] % mu:
        raise ValueError(f"codeword length {bits.shape[-1]} is not a multiple of {mu}")
    groups = bits.reshape(bits.shape[:-1] + (-1, mu))
    weights = 1 << np.arange(mu - 1, -1, -1)
    return groups @ weights


def demodulate_bits(symbols, m: int) -> np.ndarray:
    symbols = np.asarray(symbols)
    table = label_table(m)
    return table[symbols].reshape(symbols.shape[:-1] + (-1,))


def one_hot(symbols, m: int) -> np.ndarray:
    """(M, Nq) matrix with a single 1 per column."""
    symbols = np.asarray(symbols)
    x = np.zeros((m, symbols.size), dtype=np.float64)
    x[symbols, np.arange(symbols.size)] = 1.0
    return x


def log_i0(x):
    """ln I0(x) for x >= 0 without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.log(i0e(x)) + x


def _pair_matrix(diag, off1, off2):
    """Assemble (Nq, M, M): off1[:, q1] + off2[:, q2] off the diagonal, diag[:, q] on it."""
    ll = off1[:, :, None] + off2[:, None, :]
    m = diag.shape[1]
    idx = np.arange(m)
    ll[:, idx, idx] = diag
    return ll


def super_symbol_likelihoods(y, csi: Csi, n0: float, m: int) -> np.ndarray:
    """log p(y | q1, q2) up to a per-interval constant.

    ``y`` is one observation (length M) or a frame (M, Nq). Returns
    (M, M) or (Nq, M, M) with axis order [q1, q2].
    """
    y = np.asarray(y, dtype=complex)
    single = y.ndim == 1
    yy = y[:, None] if single else y
    if yy.shape[0] != m:
        raise ValueError(f"observation has {yy.shape[0]} tones, expected {m}")
    yt = yy.T  # (Nq, M)
    mode = CsiMode(csi.mode)

    if mode is CsiMode.FULL:
        h = np.asarray(csi.gains).reshape(2, -1)
        h1, h2 = h[0][:, None], h[1][:, None]
        base = np.abs(yt) ** 2
        off1 = -(np.abs(yt - h1) ** 2 - base) / n0
        off2 = -(np.abs(yt - h2) ** 2 - base) / n0
        diag = -(np.abs(yt - h1 - h2) ** 2 - base) / n0
    elif mode is CsiMode.NONE:
        a = np.abs(yt) ** 2

        def gain(var):
            return np.log(n0 / var) + a * (1.0 / n0 - 1.0 / var)

        off1 = off2 = gain(n0 + 1.0)
        diag = gain(n0 + 2.0)
    else:
        alpha = np.asarray(csi.amplitudes, dtype=np.float64).reshape(2, -1)
        a1, a2 = alpha[0][:, None], alpha[1][:, None]
        r = np.abs(yt)
        off1 = log_i0(2 * a1 * r / n0) - a1**2 / n0
        off2 = log_i0(2 * a2 * r / n0) - a2**2 / n0
        diag = _same_tone_partial(r, a1, a2, n0, PHASE_NODES)

    ll = _pair_matrix(diag, off1, off2)
    return ll[0] if single else ll


def _same_tone_partial(r, a1, a2, n0, nodes):
    """ln of the phase-difference average for two known amplitudes on one tone."""
    phi = 2 * np.pi * np.arange(1, nodes + 1) / nodes
    beta2 = a1[..., None] ** 2 + a2[..., None] ** 2 + 2 * (a1 * a2)[..., None] * np.cos(phi)
    beta = np.sqrt(np.maximum(beta2, 0.0))
    terms = log_i0(2 * beta * r[..., None] / n0) - beta2 / n0
    return logsumexp(terms, axis=-1) - np.log(nodes)


def normalize(ll) -> np.ndarray:
    """Log posteriors under a uniform prior: each interval exponentiates to sum 1."""
    ll = np.asarray(ll)
    flat = ll.reshape(ll.shape[:-2] + (-1,))
    return ll - logsumexp(flat, axis=-1)[..., None, None]


def network_symbol_likelihoods(ll) -> np.ndarray:
    """Collapse (Nq, M, M) super-symbol values to (Nq, M) over s = q1 ^ q2."""
    ll = np.asarray(ll)
    m = ll.shape[-1]
    q1 = np.arange(m)[:, None]
    s = np.arange(m)[None, :]
    gathered = ll[..., q1, q1 ^ s]  # [..., q1, s]
    return logsumexp(gathered, axis=-2)


def somap_from_network(ls, v) -> np.ndarray:
    """Extrinsic network-bit LLRs from network-symbol log-likelihoods (Nq, M) and priors."""
    ls = np.asarray(ls, dtype=np.float64)
    nq, m = ls.shape
    mu = bits_per_symbol(m)
    table = label_table(m).astype(np.float64)
    v = np.clip(np.asarray(v, dtype=np.float64).reshape(nq, mu), -LLR_CLAMP, LLR_CLAMP)
    prior = v @ table.T  # (Nq, M)
    z = np.empty((nq, mu))
    for j in range(mu):
        metric = ls + prior - np.outer(v[:, j], table[:, j])
        one = table[:, j] == 1
        z[:, j] = logsumexp(metric[:, one], axis=1) - logsumexp(metric[:, ~one], axis=1)
    return np.clip(z, -LLR_CLAMP, LLR_CLAMP).reshape(-1)


def dnc_somap(posteriors, v) -> np.ndarray:
    """Soft bit-mapper for the network-coded bits.

    ``posteriors`` are (Nq, M, M) super-symbol log values, ``v`` the a-priori
    LLRs of the network bits (Nq * mu). The a-priori of bit j never enters
    its own output.
    """
    posteriors = np.asarray(posteriors)
    if posteriors.ndim == 2:
        posteriors = posteriors[None]
    nq, m, _ = posteriors.shape
    if np.size(v) != nq * bits_per_symbol(m):
        raise ValueError("a-priori length does not match the number of intervals")
    return somap_from_network(network_symbol_likelihoods(posteriors), v)


def detect_network_symbols(ll) -> np.ndarray:
    """Hard network-symbol decisions (no prior)."""
    return np.argmax(network_symbol_likelihoods(ll), axis=-1)


class Interleaver:
    """Seeded permutation of length n: ``interleave(x)[j] = x[perm[j]]``."""

    def __init__(self, n: int, seed: int | None = 0, identity: bool = False):
        self.n = int(n)
        self.seed = seed
        if identity:
            self.perm = np.arange(self.n)
        else:
            self.perm = np.random.default_rng(seed).permutation(self.n)
        self.inverse = np.empty_like(self.perm)
        self.inverse[self.perm] = np.arange(self.n)

    def _check(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.n:
            raise ValueError(f"length {x.shape[-1]} != interleaver length {self.n}")
        return x

    def interleave(self, x) -> np.ndarray:
        return self._check(x)[..., self.perm]

    def deinterleave(self, x) -> np.ndarray:
        return self._check(x)[..., self.inverse]
