"""EXIT-chart analysis of the relay receiver and degree-distribution search."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import CsiMode, csi_view, draw_fading, noise_density, transmit_symbols
from .jfunc import I_MAX, J, J_inv, mutual_information
from .ldpc_code import DegreeDistribution, solve_free_counts, validate_distribution
from .modem import bits_per_symbol, modulate, network_symbol_likelihoods, somap_from_network, super_symbol_likelihoods

log = logging.getLogger(__name__)

GRID_POINTS = 100
TUNNEL_MARGIN = 1e-4


@dataclass(frozen=True)
class DetectorConfig:
    m: int
    csi: CsiMode
    rate: float
    length: int  # bits per simulated frame (L)
    frames: int = 1
    per_bit: bool = False
    grid_points: int = GRID_POINTS

    def __post_init__(self):
        object.__setattr__(self, "csi", CsiMode(self.csi))
        bits_per_symbol(self.m)
        if self.length % bits_per_symbol(self.m):
            raise ValueError("frame length must be a multiple of log2(M)")

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "csi": self.csi.value,
            "rate": self.rate,
            "length": self.length,
            "frames": self.frames,
            "per_bit": self.per_bit,
            "grid_points": self.grid_points,
        }


@dataclass
class DetectorCharacteristic:
    ia: np.ndarray
    ie: np.ndarray
    coeffs: np.ndarray  # f0, f1, f2, f3
    ebno_db: float
    config: DetectorConfig
    seed: int

    def __call__(self, x):
        """Cubic fit f_DET, clamped to [0, 1]."""
        x = np.asarray(x, dtype=np.float64)
        f0, f1, f2, f3 = self.coeffs
        return np.clip(((f3 * x + f2) * x + f1) * x + f0, 0.0, 1.0)

    @property
    def fit_rms(self) -> float:
        return float(np.sqrt(np.mean((self(self.ia) - self.ie) ** 2)))

    def save(self, stem, extra: dict | None = None) -> None:
        """``<stem>.csv`` with k, I_A, I_E and a ``<stem>.json`` sidecar.

        ``extra`` items (e.g. a config hash) go into the sidecar and a leading
        ``#`` comment line of the CSV.
        """
        stem = Path(stem)
        extra = dict(extra or {})
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            if extra:
                fh.write("# " + " ".join(f"{k}={v}" for k, v in extra.items()) + "\n")
            w = csv.writer(fh)
            w.writerow(["k", "I_A", "I_E"])
            for k, (a, e) in enumerate(zip(self.ia, self.ie)):
                w.writerow([k, repr(float(a)), repr(float(e))])
        meta = {
            "coeffs": [float(c) for c in self.coeffs],
            "ebno_db": self.ebno_db,
            "config": self.config.to_json(),
            "seed": self.seed,
            **extra,
        }
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load(cls, stem) -> "DetectorCharacteristic":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        with open(stem.with_suffix(".csv"), newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))][1:]
        data = np.array(rows, dtype=np.float64).reshape(-1, 3)
        return cls(
            ia=data[:, 1],
            ie=data[:, 2],
            coeffs=np.array(meta["coeffs"]),
            ebno_db=meta["ebno_db"],
            config=DetectorConfig(**meta["config"]),
            seed=meta["seed"],
        )


def fit_cubic(ia, ie) -> np.ndarray:
    """Unweighted least-squares cubic; returns f0..f3."""
    ia = np.asarray(ia, dtype=np.float64)
    if np.unique(ia).size < 4:
        raise ValueError("cubic fit needs at least four distinct abscissae")
    coeffs, *_ = np.linalg.lstsq(np.vander(ia, 4, increasing=True), np.asarray(ie), rcond=None)
    return coeffs


def gaussian_prior(bits, sigma: float, rng) -> np.ndarray:
    """Consistent-Gaussian a-priori LLRs: (b - 1/2) sigma^2 + sigma x."""
    b = np.asarray(bits, dtype=np.float64)
    return (b - 0.5) * sigma**2 + sigma * rng.standard_normal(b.shape)


def detector_characteristic(config: DetectorConfig, ebno_db: float, seed: int) -> DetectorCharacteristic:
    """Monte Carlo transfer curve of the demodulator (one SOMAP pass per grid point)."""
    rng = np.random.default_rng(seed)
    m, mu = config.m, bits_per_symbol(config.m)
    n0 = noise_density(ebno_db, config.rate, m, per_bit=config.per_bit)
    grid = np.arange(config.grid_points) / config.grid_points
    sigmas = J_inv(grid)
    ie = np.zeros(config.grid_points)
    for _ in range(config.frames):
        b1 = rng.integers(0, 2, config.length)
        b2 = rng.integers(0, 2, config.length)
        q1, q2 = modulate(b1, m), modulate(b2, m)
        fading = draw_fading(q1.size, rng)
        y = transmit_symbols(q1, q2, m, fading, n0, rng)
        ll = super_symbol_likelihoods(y, csi_view(fading, config.csi), n0, m)
        ls = network_symbol_likelihoods(ll)
        b = b1 ^ b2
        for k, s in enumerate(sigmas):
            v = gaussian_prior(b, s, rng)
            ie[k] += mutual_information(somap_from_network(ls, v), b)
    ie /= config.frames
    return DetectorCharacteristic(grid, ie, fit_cubic(grid, ie), float(ebno_db), config, seed)


# --------------------------------------------------------------------------
# code curves
# --------------------------------------------------------------------------


def ia_grid(points: int = GRID_POINTS) -> np.ndarray:
    return np.arange(points) / points


def vnd_curve_per_degree(dist: DegreeDistribution, f_det, ia=None) -> np.ndarray:
    """(D, B) array of per-degree VND+detector extrinsic information."""
    ia = ia_grid() if ia is None else np.asarray(ia)
    s_a = J_inv(ia)
    out = np.empty((len(dist.entries), ia.size))
    for i, d in enumerate(dist.degrees):
        ia_det = J(np.sqrt(d) * s_a)
        s_det = J_inv(np.clip(f_det(ia_det), 0.0, I_MAX))
        out[i] = J(np.sqrt((d - 1) * s_a**2 + s_det**2))
    return out


def vnd_curve(dist: DegreeDistribution, f_det, ia=None) -> np.ndarray:
    """Edge-weighted combination of the per-degree curves."""
    return dist.edge_fractions @ vnd_curve_per_degree(dist, f_det, ia)


def cnd_curve(dc: int, ia) -> np.ndarray:
    """Check-node extrinsic information for a-priori ``ia``."""
    if dc < 2:
        raise ValueError("check degree must be >= 2")
    ia = np.asarray(ia, dtype=np.float64)
    return 1.0 - J(np.sqrt(dc - 1) * J_inv(1.0 - ia))


def cnd_curve_inverse(dc: int, ie) -> np.ndarray:
    """A-priori information the check nodes need to emit ``ie``."""
    if dc < 2:
        raise ValueError("check degree must be >= 2")
    ie = np.asarray(ie, dtype=np.float64)
    # J_inv(1) is clamped at sigma_max, so pin the exact limit at I_E = 0
    return np.where(ie <= 0, 0.0, 1.0 - J(J_inv(1.0 - ie) / np.sqrt(dc - 1)))


def tunnel_open(vnd: np.ndarray, cnd_a: np.ndarray, margin: float = TUNNEL_MARGIN) -> bool:
    """Open iff the VND curve clears the inverted CND curve at every interior grid point."""
    return bool(np.all(vnd[1:] > cnd_a[1:] + margin))


# --------------------------------------------------------------------------
# thresholds
# --------------------------------------------------------------------------


class CharacteristicCache:
    """Detector characteristics keyed by grid SNR; filled once, then read-only."""

    def __init__(self, config: DetectorConfig, seed: int):
        self.config = config
        self.seed = seed
        self._store: dict[float, DetectorCharacteristic] = {}

    def __call__(self, ebno_db: float) -> DetectorCharacteristic:
        key = round(float(ebno_db), 6)
        if key not in self._store:
            # per-SNR seed so the cache content does not depend on visiting order
            point_seed = self.seed * 1_000_003 + int(round((key + 100.0) * 1000))
            self._store[key] = detector_characteristic(self.config, key, point_seed)
            log.debug("characteristic at %.2f dB: I_E(0)=%.4f", key, self._store[key].ie[0])
        return self._store[key]

    def items(self):
        return sorted(self._store.items())


@dataclass
class ThresholdResult:
    dist: DegreeDistribution
    threshold_db: float | None
    step_db: float
    verdicts: dict[float, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "distribution": self.dist.to_json(),
            "label": self.dist.label(),
            "threshold_db": self.threshold_db,
            "step_db": self.step_db,
            "verdicts": {f"{k:.2f}": v for k, v in sorted(self.verdicts.items())},
        }


def snr_grid(lo: float, hi: float, step: float = 0.1) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 6)


def is_open_at(dist: DegreeDistribution, char: DetectorCharacteristic) -> bool:
    ia = ia_grid(char.config.grid_points)
    return tunnel_open(vnd_curve(dist, char, ia), cnd_curve_inverse(dist.dc, ia))


def exit_threshold(dist: DegreeDistribution, cache: CharacteristicCache, grid) -> ThresholdResult:
    """Lowest grid SNR whose tunnel is open, scanning down from the top of the grid.

    The scan bisects over the grid, assuming the open region is an upper
    interval of the grid (detector curves improve with SNR).
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    step = float(np.median(np.diff(grid))) if grid.size > 1 else 0.0
    verdicts: dict[float, bool] = {}

    def open_at(i):
        snr = float(grid[i])
        if snr not in verdicts:
            verdicts[snr] = is_open_at(dist, cache(snr))
        return verdicts[snr]

    hi = grid.size - 1
    if not open_at(hi):
        return ThresholdResult(dist, None, step, verdicts)
    lo = 0
    if open_at(lo):
        return ThresholdResult(dist, float(grid[lo]), step, verdicts)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if open_at(mid):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(dist, float(grid[hi]), step, verdicts)


def candidate_distributions(base) -> list[DegreeDistribution]:
    """All feasible two-free-degree distributions of a base code's search space."""
    lo, hi = base.free_range
    out = []
    for d_a in range(lo, hi + 1):
        start = d_a + 1 if base.ordered_free else lo
        for d_b in range(start, hi + 1):
            counts = solve_free_counts(base.fixed, (d_a, d_b), base.n, base.k, base.dc)
            if counts is None:
                continue
            dist = base.distribution([(d_a, counts[0]), (d_b, counts[1])])
            if validate_distribution(dist).valid:
                out.append(dist)
    return out


def optimize_degrees(base, cache: CharacteristicCache, grid, limit: int | None = None) -> list[ThresholdResult]:
    """Thresholds of every feasible distribution, best first.

    Ties are broken by the lexicographic order of the degree tuple.
    """
    cands = candidate_distributions(base)
    if not cands:
        raise ValueError(f"no feasible distribution for base {base.name}")
    if limit is not None:
        cands = cands[:limit]
    results = [exit_threshold(d, cache, grid) for d in cands]

    def key(r):
        t = np.inf if r.threshold_db is None else r.threshold_db
        return (t, tuple(r.dist.degrees.tolist()), tuple(r.dist.counts.tolist()))

    return sorted(results, key=key)


def save_curves(path, ia, vnd, cnd_a, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(["k", "I_A", "I_E_VND", "I_A_CND"])
        for k, row in enumerate(zip(ia, vnd, cnd_a)):
            w.writerow([k] + [repr(float(x)) for x in row])
