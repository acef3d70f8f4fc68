"""Degree distributions, eIRA parity-check matrices, alist I/O and encoding."""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class CodeError(ValueError):
    """Raised for malformed distributions, matrices or files."""


class ConstructionError(RuntimeError):
    """Raised when a matrix cannot be realized within the repair budget."""


# --------------------------------------------------------------------------
# degree distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DegreeDistribution:
    """Variable-node degree distribution ``{degree: count, ...}`` of a check-regular code.

    ``entries`` keeps the order and multiplicity given by the caller, since a
    distribution may list the same degree twice (e.g. the accumulator's
    degree-3 columns and a free degree-3 group).
    """

    entries: tuple[tuple[int, int], ...]
    dc: int
    n: int
    k: int

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((int(d), int(o)) for d, o in self.entries)
        )

    @property
    def degrees(self) -> np.ndarray:
        return np.array([d for d, _ in self.entries], dtype=int)

    @property
    def counts(self) -> np.ndarray:
        return np.array([o for _, o in self.entries], dtype=int)

    @property
    def node_fractions(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def edge_fractions(self) -> np.ndarray:
        e = self.degrees * self.counts
        return e / e.sum()

    @property
    def m(self) -> int:
        return self.n - self.k

    @property
    def rate(self) -> float:
        return self.k / self.n

    def census(self) -> dict[int, int]:
        """Column-weight multiset as ``{weight: count}`` (duplicate degrees merged)."""
        out: dict[int, int] = {}
        for d, o in self.entries:
            out[d] = out.get(d, 0) + o
        return dict(sorted(out.items()))

    def label(self) -> str:
        return "{" + ", ".join(f"{d}:{o}" for d, o in self.entries) + "}"

    def to_json(self) -> dict:
        return {
            "entries": [[d, o] for d, o in self.entries],
            "dc": self.dc,
            "n": self.n,
            "k": self.k,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DegreeDistribution":
        try:
            return cls(
                entries=tuple(tuple(e) for e in obj["entries"]),
                dc=int(obj["dc"]),
                n=int(obj["n"]),
                k=int(obj["k"]),
            )
        except KeyError as exc:
            raise CodeError(f"distribution is missing field {exc.args[0]!r}") from None


def load_distribution(path) -> DegreeDistribution:
    with open(path) as fh:
        return DegreeDistribution.from_json(json.load(fh))


def save_distribution(dist: DegreeDistribution, path) -> None:
    with open(path, "w") as fh:
        json.dump(dist.to_json(), fh)
        fh.write("\n")


@dataclass
class ValidationReport:
    node_sum: int
    edges_variable: int
    edges_check: int
    node_sum_ok: bool
    edge_balance_ok: bool
    positive_ok: bool
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.node_sum_ok and self.edge_balance_ok and self.positive_ok

    def summary(self) -> str:
        lines = [
            f"node sum        {self.node_sum}  {'ok' if self.node_sum_ok else 'FAIL'}",
            f"edges (var)     {self.edges_variable}",
            f"edges (check)   {self.edges_check}  {'ok' if self.edge_balance_ok else 'FAIL'}",
        ]
        lines += [f"failure: {f}" for f in self.failures]
        lines += [f"warning: {w}" for w in self.warnings]
        lines.append("VALID" if self.valid else "INVALID")
        return "\n".join(lines)


def validate_distribution(dist: DegreeDistribution) -> ValidationReport:
    """Check the node-sum and edge-balance constraints; never raises."""
    degrees, counts = dist.degrees, dist.counts
    node_sum = int(counts.sum())
    e_v = int((degrees * counts).sum())
    e_c = dist.dc * (dist.n - dist.k)
    failures, warnings = [], []

    positive_ok = bool(
        len(dist.entries) > 0
        and (degrees > 0).all()
        and (counts > 0).all()
        and dist.dc > 0
        and dist.n > dist.k > 0
    )
    if not positive_ok:
        failures.append("degrees, counts, dc, n and k must be positive with n > k")
    node_sum_ok = node_sum == dist.n
    if not node_sum_ok:
        failures.append(f"node sum {node_sum} != N = {dist.n}")
    edge_ok = e_v == e_c
    if not edge_ok:
        failures.append(f"variable edges {e_v} != check edges {e_c}")
    if (degrees == 1).any():
        warnings.append("degree-1 variable nodes receive no iterative gain")
    return ValidationReport(node_sum, e_v, e_c, node_sum_ok, edge_ok, positive_ok, failures, warnings)


def solve_free_counts(fixed, free_degrees, n: int, k: int, dc: int):
    """Solve for the counts of two free degrees given the fixed (accumulator) entries.

    Returns ``(o_a, o_b)`` as positive integers, or ``None`` when the 2x2
    system has no positive integer solution (including ``d_a == d_b``).
    """
    d_a, d_b = (int(d) for d in free_degrees)
    if d_a == d_b or d_a <= 0 or d_b <= 0:
        return None
    nodes = n - sum(o for _, o in fixed)
    edges = dc * (n - k) - sum(d * o for d, o in fixed)
    # o_a + o_b = nodes ; d_a o_a + d_b o_b = edges
    num = edges - d_a * nodes
    den = d_b - d_a
    if num % den:
        return None
    o_b = num // den
    o_a = nodes - o_b
    if o_a <= 0 or o_b <= 0:
        return None
    return o_a, o_b


# --------------------------------------------------------------------------
# parity-check matrices
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Sparse binary (N-K) x N matrix with the eIRA split ``H = [H1 | H2]``.

    ``rows``/``cols`` hold the nonzero coordinates sorted column-major. H1 is
    the first ``k`` columns, H2 the last ``n - k``.
    """

    n: int
    m: int
    rows: np.ndarray
    cols: np.ndarray
    k: int | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        if rows.shape != cols.shape:
            raise CodeError("row/column index arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.m or cols.min() < 0 or cols.max() >= self.n):
            raise CodeError("entry outside the matrix bounds")
        order = np.lexsort((rows, cols))
        rows, cols = rows[order], cols[order]
        key = cols * self.m + rows
        if key.size and (np.diff(key) == 0).any():
            raise CodeError("repeated (row, col) entry")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        k = self.n - self.m if self.k is None else int(self.k)
        if not 0 < k < self.n:
            raise CodeError(f"invalid information length k={k}")
        object.__setattr__(self, "k", k)

    @classmethod
    def from_dense(cls, dense, k: int | None = None) -> "ParityCheckMatrix":
        dense = np.asarray(dense)
        r, c = np.nonzero(dense % 2)
        return cls(n=dense.shape[1], m=dense.shape[0], rows=r, cols=c, k=k)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def num_edges(self) -> int:
        return int(self.rows.size)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        data = np.ones(self.rows.size, dtype=np.int8)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray().astype(np.uint8)

    @property
    def column_weights(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n)

    @property
    def row_weights(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.m)

    def column_census(self) -> dict[int, int]:
        w, c = np.unique(self.column_weights, return_counts=True)
        return {int(a): int(b) for a, b in zip(w, c)}

    def entry_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def h2_entries(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows and (H2-local) columns of the accumulator part."""
        sel = self.cols >= self.k
        return self.rows[sel], self.cols[sel] - self.k

    @cached_property
    def is_dual_diagonal(self) -> bool:
        """True when H2 is the plain accumulator: col j at rows j, j+1; last col at the last row."""
        if self.m != self.n - self.k:
            return False
        r, c = self.h2_entries()
        m = self.m
        expect_c = np.concatenate([np.repeat(np.arange(m - 1), 2), [m - 1]])
        expect_r = np.concatenate([np.stack([np.arange(m - 1), np.arange(1, m)], 1).ravel(), [m - 1]])
        return r.size == expect_r.size and np.array_equal(c, expect_c) and np.array_equal(r, expect_r)

    def syndrome(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return (self.csr @ bits.T).T % 2

    def equals(self, other: "ParityCheckMatrix") -> bool:
        return (
            self.shape == other.shape
            and self.k == other.k
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )


def dual_diagonal_accumulator(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Entries (rows, cols) of the m x m dual-diagonal accumulator."""
    j = np.arange(m - 1)
    rows = np.concatenate([j, j + 1, [m - 1]])
    cols = np.concatenate([j, j, [m - 1]])
    return rows, cols


def syndrome_check(bits, H: ParityCheckMatrix) -> bool:
    """True iff ``H c^T = 0`` over GF(2)."""
    return not H.syndrome(bits).any()


def _accumulator_groups(h2_rows, h2_cols, m, dual_diagonal: bool) -> dict[int, int]:
    """Nominal column-degree census of an accumulator.

    The dual-diagonal terminator column (weight 1) is counted as degree 2, the
    way standards tabulate it.
    """
    w = np.bincount(h2_cols, minlength=m)
    if dual_diagonal:
        w = w.copy()
        w[-1] = 2
    vals, cnt = np.unique(w, return_counts=True)
    return {int(a): int(b) for a, b in zip(vals, cnt)}


def _split_free_entries(dist: DegreeDistribution, acc_census: dict[int, int]) -> list[tuple[int, int]]:
    """Remove the accumulator's columns from the distribution, leaving H1's entries."""
    remaining = dict(acc_census)
    free = []
    for d, o in dist.entries:
        take = min(o, remaining.get(d, 0))
        if take:
            remaining[d] -= take
        if o - take:
            free.append((d, o - take))
    if any(v for v in remaining.values()):
        raise CodeError(
            f"distribution {dist.label()} does not contain the accumulator columns {acc_census}"
        )
    return free


def realize_matrix(
    dist: DegreeDistribution,
    seed: int,
    accumulator: ParityCheckMatrix | None = None,
    avoid_4cycles: bool | None = None,
    max_passes: int = 100,
) -> ParityCheckMatrix:
    """Random eIRA parity-check matrix with the given column-weight distribution.

    H2 is the dual-diagonal accumulator unless ``accumulator`` supplies one
    (its last ``n - k`` columns are copied verbatim, e.g. a standard's H2).
    H1 is drawn by socket matching under a seeded permutation, followed by
    swap passes that remove repeated entries and, when ``avoid_4cycles`` is
    set (default: N <= 4096), length-4 cycles on a best-effort basis.
    """
    if any(d <= 0 or o <= 0 for d, o in dist.entries):
        raise CodeError("degrees and counts must be positive")
    report = validate_distribution(dist)
    if not report.valid:
        raise CodeError("; ".join(report.failures))
    m, n, k = dist.m, dist.n, dist.k

    if accumulator is None:
        h2_rows, h2_cols = dual_diagonal_accumulator(m)
        dual = True
    else:
        if accumulator.m != m or accumulator.n - accumulator.k != m:
            raise CodeError("accumulator dimensions do not match the distribution")
        h2_rows, h2_cols = accumulator.h2_entries()
        dual = accumulator.is_dual_diagonal
    free = _split_free_entries(dist, _accumulator_groups(h2_rows, h2_cols, m, dual))
    col_deg = np.concatenate([np.full(o, d, dtype=np.int64) for d, o in free])
    if col_deg.size != k:
        raise CodeError(f"H1 would have {col_deg.size} columns, expected K = {k}")
    if (col_deg > m).any():
        raise CodeError("a column degree exceeds the number of checks")

    h2_row_w = np.bincount(h2_rows, minlength=m)
    row_sockets = dist.dc - h2_row_w
    deficit = int(row_sockets.sum() - col_deg.sum())
    # Rows touching the weight-1 terminator give up the unmatched socket(s).
    if deficit > 0:
        lighter = np.argsort(h2_row_w, kind="stable")[:deficit]
        row_sockets[lighter] -= 1
    elif deficit < 0:
        raise CodeError("H1 column edges exceed the available check sockets")
    if (row_sockets < 0).any():
        raise CodeError("check degree too small for the accumulator")

    rng = np.random.default_rng(seed)
    edge_col = np.repeat(np.arange(k), col_deg)
    edge_row = rng.permutation(np.repeat(np.arange(m), row_sockets))

    _repair_duplicates(edge_row, edge_col, m, rng, max_passes)
    if avoid_4cycles is None:
        avoid_4cycles = n <= 4096
    if avoid_4cycles:
        _reduce_4cycles(edge_row, edge_col, h2_rows, h2_cols + k, m, rng, max_passes)

    rows = np.concatenate([edge_row, h2_rows])
    cols = np.concatenate([edge_col, h2_cols + k])
    return ParityCheckMatrix(n=n, m=m, rows=rows, cols=cols, k=k)


def _duplicate_edges(edge_row, edge_col, m) -> np.ndarray:
    key = edge_col * m + edge_row
    order = np.argsort(key, kind="stable")
    dup = np.zeros(key.size, dtype=bool)
    dup[order[1:]] = np.diff(key[order]) == 0
    return np.flatnonzero(dup)


def _repair_duplicates(edge_row, edge_col, m, rng, max_passes) -> None:
    for _ in range(max_passes):
        bad = _duplicate_edges(edge_row, edge_col, m)
        if bad.size == 0:
            return
        present = set((edge_col * m + edge_row).tolist())
        for e in bad:
            for _try in range(64):
                f = int(rng.integers(edge_row.size))
                ce, cf, re, rf = edge_col[e], edge_col[f], edge_row[e], edge_row[f]
                if ce == cf or re == rf:
                    continue
                if ce * m + rf in present or cf * m + re in present:
                    continue
                present.discard(cf * m + rf)
                present.add(ce * m + rf)
                present.add(cf * m + re)
                edge_row[e], edge_row[f] = rf, re
                break
    if _duplicate_edges(edge_row, edge_col, m).size:
        raise ConstructionError(
            f"could not remove repeated entries within {max_passes} passes; distribution too skewed"
        )


def _reduce_4cycles(edge_row, edge_col, fixed_rows, fixed_cols, m, rng, max_passes) -> int:
    """Swap H1 edges out of length-4 cycles; returns the number of cycle edges left."""
    ncols = int(max(edge_col.max(), fixed_cols.max())) + 1
    col_rows = [set() for _ in range(ncols)]
    row_cols = [set() for _ in range(m)]
    for r, c in zip(np.concatenate([edge_row, fixed_rows]).tolist(), np.concatenate([edge_col, fixed_cols]).tolist()):
        col_rows[c].add(r)
        row_cols[r].add(c)

    def in_cycle(r, c):
        # (r, c) closes a 4-cycle if another column meets both r and some other row of c
        others = col_rows[c] - {r}
        for c2 in row_cols[r]:
            if c2 != c and not others.isdisjoint(col_rows[c2]):
                return True
        return False

    def would_cycle(r, c, drop_r):
        others = col_rows[c] - {drop_r, r}
        for c2 in row_cols[r]:
            if c2 != c and not others.isdisjoint(col_rows[c2]):
                return True
        return False

    n_edges = edge_row.size
    bad = []
    for _ in range(max_passes):
        bad = [e for e in range(n_edges) if in_cycle(int(edge_row[e]), int(edge_col[e]))]
        if not bad:
            break
        moved = 0
        for e in bad:
            re, ce = int(edge_row[e]), int(edge_col[e])
            if not in_cycle(re, ce):
                continue
            for _try in range(32):
                f = int(rng.integers(n_edges))
                rf, cf = int(edge_row[f]), int(edge_col[f])
                if ce == cf or re == rf or rf in col_rows[ce] or re in col_rows[cf]:
                    continue
                if would_cycle(rf, ce, re) or would_cycle(re, cf, rf):
                    continue
                col_rows[ce].discard(re); row_cols[re].discard(ce)
                col_rows[cf].discard(rf); row_cols[rf].discard(cf)
                col_rows[ce].add(rf); row_cols[rf].add(ce)
                col_rows[cf].add(re); row_cols[re].add(cf)
                edge_row[e], edge_row[f] = rf, re
                moved += 1
                break
        if moved == 0:
            break
    return len(bad)


def count_4cycle_edges(H: ParityCheckMatrix) -> int:
    """Number of column pairs sharing two or more rows (each such pair closes a 4-cycle)."""
    A = H.csr.astype(np.int32)
    overlap = (A.T @ A).tocoo()
    mask = (overlap.row < overlap.col) & (overlap.data >= 2)
    return int(mask.sum())


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------


def _gf2_inverse(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    aug = np.concatenate([a.astype(np.uint8) % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivots = np.flatnonzero(aug[col:, col]) + col
        if pivots.size == 0:
            raise CodeError("H2 is singular over GF(2)")
        p = pivots[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        hit = np.flatnonzero(aug[:, col])
        hit = hit[hit != col]
        aug[hit] ^= aug[col]
    return aug[:, n:]


class Encoder:
    """Systematic encoder ``c = [u | p]`` with ``H2 p = H1 u``.

    Dual-diagonal H2 uses the accumulator recursion. Any other invertible
    square H2 (e.g. the WiMAX staircase with its weight-3 column) uses a
    precomputed GF(2) inverse, limited to ``max_dense`` parity bits.
    """

    def __init__(self, H: ParityCheckMatrix, max_dense: int = 8192):
        self.H = H
        csc = H.csr.tocsc()
        self._h1 = csc[:, : H.k].tocsr().astype(np.int64)
        self._inv = None
        if not H.is_dual_diagonal:
            if H.m != H.n - H.k or H.m > max_dense:
                raise NotImplementedError("encoding needs a square eIRA H2")
            self._inv = _gf2_inverse(csc[:, H.k :].toarray())

    def encode(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        single = u.ndim == 1
        u2 = np.atleast_2d(u)
        if u2.shape[1] != self.H.k:
            raise CodeError(f"message length {u2.shape[1]} != K = {self.H.k}")
        s = (self._h1 @ u2.T).T % 2
        if self._inv is None:
            p = np.bitwise_xor.accumulate(s, axis=1)
        else:
            p = (s @ self._inv.T.astype(np.int64)) % 2
        c = np.concatenate([u2, p], axis=1).astype(np.uint8)
        return c[0] if single else c


def encode(u, H: ParityCheckMatrix) -> np.ndarray:
    return Encoder(H).encode(u)


# --------------------------------------------------------------------------
# alist I/O
# --------------------------------------------------------------------------


def _open_text(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t")
    return open(path, mode)


def save_alist(H: ParityCheckMatrix, path) -> None:
    """Write ``H`` in alist format (1-indexed, no zero padding)."""
    cw, rw = H.column_weights, H.row_weights
    csr = H.csr
    col_lists = np.split(H.rows + 1, np.cumsum(cw)[:-1])
    with _open_text(path, "w") as fh:
        fh.write(f"{H.n} {H.m}\n")
        fh.write(f"{cw.max()} {rw.max()}\n")
        fh.write(" ".join(map(str, cw)) + "\n")
        fh.write(" ".join(map(str, rw)) + "\n")
        for lst in col_lists:
            fh.write(" ".join(map(str, lst)) + "\n")
        for r in range(H.m):
            idx = csr.indices[csr.indptr[r] : csr.indptr[r + 1]]
            fh.write(" ".join(map(str, np.sort(idx) + 1)) + "\n")


def load_alist(path, k: int | None = None) -> ParityCheckMatrix:
    """Parse an alist file. Zeros are accepted only as trailing padding."""
    with _open_text(path, "r") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        cw = [int(x) for x in lines[2]]
        rw = [int(x) for x in lines[3]]
    except (IndexError, ValueError):
        raise CodeError(f"{path}: malformed alist header") from None
    if len(cw) != n or len(rw) != m:
        raise CodeError(f"{path}: degree list lengths do not match N={n}, M={m}")
    if len(lines) < 4 + n + m:
        raise CodeError(f"{path}: expected {n} column and {m} row lists")

    def parse_list(tokens, weight, bound, what, idx):
        vals = [int(t) for t in tokens]
        head, pad = vals[:weight], vals[weight:]
        if len(head) != weight:
            raise CodeError(f"{path}: {what} {idx + 1} lists {len(head)} entries, expected {weight}")
        if any(v == 0 for v in head):
            raise CodeError(f"{path}: {what} {idx + 1} references index 0 (alist is 1-indexed)")
        if any(v < 1 or v > bound for v in head):
            raise CodeError(f"{path}: {what} {idx + 1} has an index outside 1..{bound}")
        if any(p != 0 for p in pad):
            raise CodeError(f"{path}: {what} {idx + 1} has more entries than its degree")
        return head

    rows, cols = [], []
    for j in range(n):
        rs = parse_list(lines[4 + j], cw[j], m, "column", j)
        rows.extend(r - 1 for r in rs)
        cols.extend([j] * len(rs))
    from_rows = set()
    for i in range(m):
        cs = parse_list(lines[4 + n + i], rw[i], n, "row", i)
        from_rows.update((i, c - 1) for c in cs)
    if from_rows != set(zip(rows, cols)):
        raise CodeError(f"{path}: column and row adjacency lists disagree")
    return ParityCheckMatrix(n=n, m=m, rows=np.array(rows), cols=np.array(cols), k=k)
