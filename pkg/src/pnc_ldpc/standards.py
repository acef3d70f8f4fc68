"""Base codes whose accumulator (H2) is retained during degree optimization.

WiMAX (IEEE 802.16e) rate-2/3A, N=2304: built from the standard base matrix.
DVB-S2 normal frame rate 3/5, N=64800: the standard's address tables are not
bundled; ``dvbs2_profile_matrix`` realizes a random matrix with the same
dual-diagonal accumulator and the same column-degree profile
{12:12960, 3:25920, 2:25920}. Supply the genuine alist through
``load_alist`` where bit-exact standard behaviour matters.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .ldpc_code import DegreeDistribution, ParityCheckMatrix, load_alist, realize_matrix

WIMAX_23A_BASE = np.array(
    [
        [3, 0, -1, -1, 2, 0, -1, 3, 7, -1, 1, 1, -1, -1, -1, -1, 1, 0, -1, -1, -1, -1, -1, -1],
        [-1, -1, 1, -1, 36, -1, -1, 34, 10, -1, -1, 18, 2, -1, 3, 0, -1, 0, 0, -1, -1, -1, -1, -1],
        [-1, -1, 12, 2, -1, 15, -1, 40, -1, 3, -1, 15, -1, 2, 13, -1, -1, -1, 0, 0, -1, -1, -1, -1],
        [-1, -1, 19, 24, -1, 3, 0, -1, 6, -1, 17, -1, -1, -1, 8, 39, -1, -1, -1, 0, 0, -1, -1, -1],
        [20, -1, 6, -1, -1, 10, 29, -1, -1, 28, -1, 14, -1, 38, -1, -1, 0, -1, -1, -1, 0, 0, -1, -1],
        [-1, -1, 10, -1, 28, 20, -1, -1, 8, -1, 36, -1, 9, -1, 21, 45, -1, -1, -1, -1, -1, 0, 0, -1],
        [35, 25, -1, 37, -1, 21, -1, -1, 5, -1, -1, 0, -1, 4, 20, -1, -1, -1, -1, -1, -1, -1, 0, 0],
        [-1, 6, 6, -1, -1, -1, 4, -1, 14, 30, -1, 3, 36, -1, 14, -1, 1, -1, -1, -1, -1, -1, -1, 0],
    ]
)


def expand_base_matrix(base: np.ndarray, z: int, k_blocks: int) -> ParityCheckMatrix:
    """Lift a base matrix by z x z circulants (-1 = zero block, s = identity shifted by s mod z)."""
    rows, cols = [], []
    t = np.arange(z)
    for i, j in zip(*np.nonzero(base >= 0)):
        s = int(base[i, j]) % z
        rows.append(i * z + t)
        cols.append(j * z + (t + s) % z)
    mb, nb = base.shape
    return ParityCheckMatrix(
        n=nb * z, m=mb * z, rows=np.concatenate(rows), cols=np.concatenate(cols), k=k_blocks * z
    )


@dataclass(frozen=True)
class BaseCode:
    name: str
    n: int
    k: int
    dc: int
    fixed: tuple[tuple[int, int], ...]
    free_range: tuple[int, int]
    ordered_free: bool  # True: second free degree strictly above the first

    @property
    def rate(self) -> float:
        return self.k / self.n

    def distribution(self, free_entries) -> DegreeDistribution:
        return DegreeDistribution(
            entries=self.fixed + tuple(tuple(e) for e in free_entries), dc=self.dc, n=self.n, k=self.k
        )


DVBS2 = BaseCode("dvbs2", 64800, 38880, 11, ((2, 25920),), (3, 100), True)
WIMAX = BaseCode("wimax", 2304, 1536, 10, ((2, 672), (3, 96)), (1, 100), True)
BASES = {"dvbs2": DVBS2, "wimax": WIMAX}

# column-degree profiles of the standard matrices
STANDARD_DISTRIBUTIONS = {
    "dvbs2": DVBS2.distribution([(3, 25920), (12, 12960)]),
    "wimax": WIMAX.distribution([(3, 1056), (6, 480)]),
}


@lru_cache(maxsize=None)
def wimax_23a_matrix() -> ParityCheckMatrix:
    return expand_base_matrix(WIMAX_23A_BASE, 96, 16)


@lru_cache(maxsize=None)
def dvbs2_profile_matrix(seed: int = 2013) -> ParityCheckMatrix:
    return realize_matrix(STANDARD_DISTRIBUTIONS["dvbs2"], seed, avoid_4cycles=False)


def standard_matrix(name: str) -> ParityCheckMatrix:
    """Reference matrix for a base: bundled alist when present, else rebuilt."""
    fname = {"wimax": "wimax_2304_r23a.alist", "dvbs2": "dvbs2_64800_r35_profile.alist.gz"}[name]
    ref = resources.files("pnc_ldpc") / "data" / fname
    if ref.is_file():
        with resources.as_file(ref) as path:
            H = load_alist(path, k=BASES[name].k)
        return H
    return wimax_23a_matrix() if name == "wimax" else dvbs2_profile_matrix()


def accumulator_for(name: str) -> ParityCheckMatrix | None:
    """H2 carrier for realize_matrix: WiMAX keeps the standard staircase, DVB-S2 the plain accumulator."""
    return wimax_23a_matrix() if name == "wimax" else None
