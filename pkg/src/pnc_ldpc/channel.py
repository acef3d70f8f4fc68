"""Two-source flat Rayleigh multiple-access channel."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class CsiMode(str, Enum):
    FULL = "full"
    PARTIAL = "partial"
    NONE = "none"


def noise_density(ebno_db: float, rate: float, m: int, per_bit: bool = False) -> float:
    """One-sided noise spectral density N0 = 1 / (10^(X/10) * R * M).

    With ``per_bit`` the modulation order enters as log2(M) instead of M.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"code rate must lie in (0, 1], got {rate}")
    if m < 2:
        raise ValueError(f"modulation order must be >= 2, got {m}")
    scale = np.log2(m) if per_bit else m
    return float(1.0 / (10.0 ** (ebno_db / 10.0) * rate * scale))


@dataclass(frozen=True)
class FadingFrame:
    """Per-symbol gains, shape (2, Nq): row i is source i+1."""

    gains: np.ndarray

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.gains)

    @property
    def num_symbols(self) -> int:
        return self.gains.shape[1]


@dataclass(frozen=True)
class Csi:
    """What the receiver may know about the gains under a given CSI mode."""

    mode: CsiMode
    gains: np.ndarray | None = None
    amplitudes: np.ndarray | None = None


def draw_fading(num_symbols: int, rng: np.random.Generator) -> FadingFrame:
    """Independent Rayleigh(sqrt(1/2)) amplitudes with uniform phases, E[|h|^2] = 1."""
    amp = rng.rayleigh(scale=np.sqrt(0.5), size=(2, num_symbols))
    theta = rng.uniform(0.0, 2 * np.pi, size=(2, num_symbols))
    return FadingFrame(amp * np.exp(1j * theta))


def csi_view(fading: FadingFrame, mode) -> Csi:
    mode = CsiMode(mode)
    if mode is CsiMode.FULL:
        return Csi(mode, gains=fading.gains)
    if mode is CsiMode.PARTIAL:
        return Csi(mode, amplitudes=fading.amplitudes)
    return Csi(mode)


def complex_noise(shape, n0: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with E|n|^2 = n0."""
    s = np.sqrt(n0 / 2.0)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def transmit(x1, x2, fading: FadingFrame, n0: float, rng: np.random.Generator) -> np.ndarray:
    """Received frame Y = X1 H1 + X2 H2 + N for one-hot symbol matrices (M x Nq)."""
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    if x1.shape != x2.shape or x1.ndim != 2:
        raise ValueError("symbol matrices must share shape (M, Nq)")
    if x1.shape[1] != fading.num_symbols:
        raise ValueError("fading frame length does not match the symbol frame")
    y = x1 * fading.gains[0] + x2 * fading.gains[1]
    if n0 > 0:
        y = y + complex_noise(y.shape, n0, rng)
    return y.astype(complex)


def transmit_symbols(q1, q2, m: int, fading: FadingFrame, n0: float, rng) -> np.ndarray:
    """Same as ``transmit`` but starting from tone indices."""
    q1 = np.asarray(q1)
    q2 = np.asarray(q2)
    nq = q1.size
    y = np.zeros((m, nq), dtype=complex)
    idx = np.arange(nq)
    y[q1, idx] += fading.gains[0]
    y[q2, idx] += fading.gains[1]
    if n0 > 0:
        y += complex_noise(y.shape, n0, rng)
    return y
