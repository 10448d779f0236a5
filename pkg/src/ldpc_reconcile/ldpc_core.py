"""Sparse LDPC parity-check matrices: construction, alist I/O, syndromes."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numba
import numpy as np

from .prng import SplitMix64

_DIST_TOL = 1e-9


class ConstructionError(ValueError):
    """Degree quantization or graph construction cannot be satisfied."""


class AlistError(ValueError):
    """Malformed alist text."""


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distribution pair.

    ``lam`` and ``rho`` are sequences of ``(degree, coefficient)`` where the
    coefficient is the fraction of edges attached to nodes of that degree,
    i.e. ``lambda(x) = sum lam_i x**(i-1)``.
    """

    lam: tuple[tuple[int, float], ...]
    rho: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "lam", _normalize_terms(self.lam, "lambda", min_degree=1))
        object.__setattr__(self, "rho", _normalize_terms(self.rho, "rho", min_degree=2))
        rate = _rate_of(self.lam, self.rho)
        if not 0.0 < rate < 1.0:
            raise ValueError(f"design rate {rate:.6g} outside (0, 1)")

    @classmethod
    def parse(cls, lam: str, rho: str) -> "DegreeDistribution":
        """Build from text like ``"3:1"`` and ``"7:7/15 8:8/15"``."""
        return cls(_parse_terms(lam), _parse_terms(rho))

    def variable_node_fractions(self) -> list[tuple[int, float]]:
        return _node_fractions(self.lam)

    def check_node_fractions(self) -> list[tuple[int, float]]:
        return _node_fractions(self.rho)


def _parse_terms(text: str) -> list[tuple[int, float]]:
    terms = []
    for token in text.replace(",", " ").split():
        try:
            degree, coeff = token.split(":")
            terms.append((int(degree), float(Fraction(coeff))))
        except ValueError as exc:
            raise ValueError(f"bad degree term {token!r}; expected degree:coefficient") from exc
    return terms


def _normalize_terms(terms, name: str, min_degree: int) -> tuple[tuple[int, float], ...]:
    merged: dict[int, float] = {}
    for degree, coeff in terms:
        degree = int(degree)
        coeff = float(coeff)
        if degree < min_degree:
            raise ValueError(f"{name} degree {degree} below {min_degree}")
        if coeff < 0 or not math.isfinite(coeff):
            raise ValueError(f"{name} coefficient {coeff} must be finite and >= 0")
        merged[degree] = merged.get(degree, 0.0) + coeff
    if not merged:
        raise ValueError(f"{name} is empty")
    total = math.fsum(merged.values())
    if abs(total - 1.0) > _DIST_TOL:
        raise ValueError(f"{name} coefficients sum to {total!r}, not 1")
    return tuple(sorted((d, c) for d, c in merged.items() if c > 0))


def _inverse_mean(terms) -> float:
    return math.fsum(c / d for d, c in terms)


def _rate_of(lam, rho) -> float:
    return 1.0 - _inverse_mean(rho) / _inverse_mean(lam)


def _node_fractions(terms) -> list[tuple[int, float]]:
    total = _inverse_mean(terms)
    return [(d, (c / d) / total) for d, c in terms]


def design_rate(dist: DegreeDistribution) -> float:
    """Design rate ``1 - (sum rho_j/j) / (sum lambda_i/i)`` of the ensemble."""
    return _rate_of(dist.lam, dist.rho)


DEFAULT_DISTRIBUTION = DegreeDistribution(((3, 1.0),), ((7, 7 / 15), (8, 8 / 15)))
REGULAR_3_6 = DegreeDistribution(((3, 1.0),), ((6, 1.0),))


@dataclass(frozen=True)
class ParityCheckMatrix:
    """Binary parity-check matrix stored as sorted per-row column lists.

    Immutable; the derived edge arrays are computed lazily and shared by
    every decoder that uses the matrix.
    """

    n: int
    rows: tuple[tuple[int, ...], ...] = field(repr=False)

    def __post_init__(self):
        rows = tuple(tuple(sorted(int(c) for c in row)) for row in self.rows)
        seen = np.zeros(self.n, dtype=bool)
        for r, row in enumerate(rows):
            if len(set(row)) != len(row):
                raise ValueError(f"row {r} repeats a column index")
            if row and (row[0] < 0 or row[-1] >= self.n):
                raise ValueError(f"row {r} has a column index outside [0, {self.n})")
            seen[list(row)] = True
        if not seen.all():
            raise ValueError(f"column {int(np.argmin(seen))} is not covered by any check")
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> int:
        return self.n - self.m

    @property
    def rate(self) -> float:
        return 1.0 - self.m / self.n

    @cached_property
    def edge_var(self) -> np.ndarray:
        return np.fromiter((c for row in self.rows for c in row), dtype=np.int64)

    @cached_property
    def edge_check(self) -> np.ndarray:
        return np.repeat(np.arange(self.m, dtype=np.int64), self.row_degrees)

    @cached_property
    def row_degrees(self) -> np.ndarray:
        return np.array([len(row) for row in self.rows], dtype=np.int64)

    @cached_property
    def column_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_var, minlength=self.n)

    def columns(self) -> list[list[int]]:
        cols: list[list[int]] = [[] for _ in range(self.n)]
        for r, row in enumerate(self.rows):
            for c in row:
                cols[c].append(r)
        return cols

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.m, self.n), dtype=np.uint8)
        dense[self.edge_check, self.edge_var] = 1
        return dense

    @classmethod
    def from_dense(cls, dense) -> "ParityCheckMatrix":
        dense = np.asarray(dense)
        return cls(dense.shape[1], tuple(tuple(np.flatnonzero(row)) for row in dense))

    def degree_histograms(self) -> tuple[dict[int, int], dict[int, int]]:
        col = np.bincount(self.column_degrees)
        row = np.bincount(self.row_degrees)
        return (
            {d: int(c) for d, c in enumerate(col) if c},
            {d: int(c) for d, c in enumerate(row) if c},
        )


def syndrome(h: ParityCheckMatrix, word) -> np.ndarray:
    """Return ``H @ word mod 2`` as a uint8 vector of length ``h.m``."""
    word = np.asarray(word)
    if word.shape != (h.n,):
        raise ValueError(f"word has shape {word.shape}, expected ({h.n},)")
    ones = np.bincount(h.edge_check, weights=word[h.edge_var] & 1, minlength=h.m)
    return (ones.astype(np.int64) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# progressive edge growth


def _largest_remainder(total: int, fractions: list[float]) -> list[int]:
    raw = [total * f for f in fractions]
    counts = [math.floor(x + 1e-9) for x in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def _target_degrees(n: int, dist: DegreeDistribution) -> tuple[np.ndarray, np.ndarray]:
    var_fr = dist.variable_node_fractions()
    var_counts = _largest_remainder(n, [f for _, f in var_fr])
    var_deg = np.repeat([d for d, _ in var_fr], var_counts).astype(np.int64)

    m = round(n * (1.0 - design_rate(dist)))
    if m < 1:
        raise ConstructionError(f"n={n} yields no check nodes")
    chk_fr = dist.check_node_fractions()
    chk_counts = _largest_remainder(m, [f for _, f in chk_fr])
    chk_deg = np.repeat([d for d, _ in chk_fr], chk_counts).astype(np.int64)

    # residual edges from rounding go to the lowest-index checks one at a time
    diff = int(var_deg.sum() - chk_deg.sum())
    step = 1 if diff > 0 else -1
    i = 0
    while diff:
        j = i % m
        if step > 0 or chk_deg[j] > 2:
            chk_deg[j] += step
            diff -= step
        i += 1
        if i > 4 * m * max(1, abs(diff)):
            raise ConstructionError("cannot balance variable and check edge counts")
    if var_deg.max() > m:
        raise ConstructionError(f"variable degree {var_deg.max()} exceeds check count {m}")
    if chk_deg.max() > n:
        raise ConstructionError(f"check degree {chk_deg.max()} exceeds code length {n}")
    return var_deg, chk_deg


@numba.njit(cache=True)
def _peg_core(order, var_deg, chk_target, n, m, max_chk):
    max_var = var_deg.max()
    var_adj = np.full((n, max_var), -1, np.int64)
    var_cnt = np.zeros(n, np.int64)
    chk_adj = np.full((m, max_chk), -1, np.int64)
    chk_cnt = np.zeros(m, np.int64)
    depth = np.empty(m, np.int64)
    seen_var = np.zeros(n, np.bool_)
    frontier = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    big = n + m + 1

    for v in order:
        for e in range(var_deg[v]):
            # BFS depth of every check from v; unreachable checks stay at `big`
            depth[:] = big
            if var_cnt[v] > 0:
                seen_var[:] = False
                seen_var[v] = True
                nf = 1
                frontier[0] = v
                level = 0
                while nf > 0:
                    nn = 0
                    for fi in range(nf):
                        u = frontier[fi]
                        for a in range(var_cnt[u]):
                            c = var_adj[u, a]
                            if depth[c] == big:
                                depth[c] = level
                                for b in range(chk_cnt[c]):
                                    w = chk_adj[c, b]
                                    if not seen_var[w]:
                                        seen_var[w] = True
                                        nxt[nn] = w
                                        nn += 1
                    for fi in range(nn):
                        frontier[fi] = nxt[fi]
                    nf = nn
                    level += 1
            # farthest check with spare capacity; then lowest degree; then index
            best = -1
            for relax in range(2):
                for c in range(m):
                    if depth[c] == 0 and var_cnt[v] > 0:
                        continue
                    if relax == 0 and chk_cnt[c] >= chk_target[c]:
                        continue
                    if chk_cnt[c] >= max_chk:
                        continue
                    if best < 0:
                        best = c
                    elif depth[c] > depth[best]:
                        best = c
                    elif depth[c] == depth[best] and chk_cnt[c] < chk_cnt[best]:
                        best = c
                if best >= 0:
                    break
            if best < 0:
                return var_adj, var_cnt, False
            var_adj[v, var_cnt[v]] = best
            var_cnt[v] += 1
            chk_adj[best, chk_cnt[best]] = v
            chk_cnt[best] += 1
            depth[best] = 0
    return var_adj, var_cnt, True


def build_peg_code(n: int, dist: DegreeDistribution = DEFAULT_DISTRIBUTION, seed: int = 0) -> ParityCheckMatrix:
    """Construct a parity-check matrix by progressive edge growth.

    Variable nodes are processed by non-decreasing degree; ``seed`` permutes
    the processing order within each degree class.  Each new edge goes to
    the check farthest from the variable node in the current graph (so no
    short cycle is closed when avoidable) among checks below their target
    degree, ties broken by lowest current degree then lowest index.

    Parameters
    ----------
    n : int
        Code length (number of columns), at least 64.
    dist : DegreeDistribution
        Target ensemble; node-perspective degree counts are quantized with
        largest-remainder rounding.
    seed : int
        64-bit construction seed.

    Returns
    -------
    ParityCheckMatrix
        Deterministic for fixed ``(n, dist, seed)``.
    """
    if n < 64:
        raise ConstructionError(f"n={n} is below the minimum length 64")
    var_deg, chk_deg = _target_degrees(n, dist)
    m = len(chk_deg)

    keys = SplitMix64(seed).next_u64(n)
    order = np.lexsort((keys, var_deg)).astype(np.int64)
    max_chk = int(chk_deg.max()) + 8
    var_adj, var_cnt, ok = _peg_core(order, var_deg, chk_deg, n, m, max_chk)
    if not ok:
        raise ConstructionError("ran out of admissible checks during edge growth")

    rows: list[list[int]] = [[] for _ in range(m)]
    for v in range(n):
        for a in range(var_cnt[v]):
            rows[var_adj[v, a]].append(v)
    return ParityCheckMatrix(n, tuple(tuple(r) for r in rows))


def girth(h: ParityCheckMatrix, limit: int = 12) -> int:
    """Shortest cycle length in the Tanner graph (``limit + 2`` if none shorter)."""
    cols = h.columns()
    best = limit + 2
    for v in range(h.n):
        # BFS over the bipartite graph, nodes encoded as ('v', i) -> i, ('c', j) -> n + j
        dist = {v: 0}
        parent = {v: -1}
        queue = [v]
        head = 0
        while head < len(queue):
            node = queue[head]
            head += 1
            if 2 * dist[node] >= best:
                break
            nbrs = (h.n + c for c in cols[node]) if node < h.n else iter(h.rows[node - h.n])
            for w in nbrs:
                if w == parent[node]:
                    continue
                if w in dist:
                    best = min(best, dist[node] + dist[w] + 1)
                else:
                    dist[w] = dist[node] + 1
                    parent[w] = node
                    queue.append(w)
    return best


# ---------------------------------------------------------------------------
# alist


def save_alist(h: ParityCheckMatrix) -> bytes:
    """Serialize in MacKay's alist format (1-based, zero-padded lists)."""
    cols = h.columns()
    max_col = max(len(c) for c in cols)
    max_row = max(len(r) for r in h.rows)
    out = io.StringIO()
    out.write(f"{h.n} {h.m}\n{max_col} {max_row}\n")
    out.write(" ".join(str(len(c)) for c in cols) + "\n")
    out.write(" ".join(str(len(r)) for r in h.rows) + "\n")
    for c in cols:
        padded = [x + 1 for x in c] + [0] * (max_col - len(c))
        out.write(" ".join(map(str, padded)) + "\n")
    for r in h.rows:
        padded = [x + 1 for x in r] + [0] * (max_row - len(r))
        out.write(" ".join(map(str, padded)) + "\n")
    return out.getvalue().encode("ascii")


def _ints(line: str, what: str) -> list[int]:
    try:
        return [int(t) for t in line.split()]
    except ValueError as exc:
        raise AlistError(f"non-integer token in {what}: {line.strip()!r}") from exc


def load_alist(data: bytes | str) -> ParityCheckMatrix:
    """Parse alist text; zero padding and unpadded lists are both accepted."""
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4:
        raise AlistError("alist header is incomplete")
    header = _ints(lines[0], "header")
    if len(header) != 2 or min(header) < 1:
        raise AlistError(f"bad size line {lines[0]!r}")
    n, m = header
    maxes = _ints(lines[1], "max-degree line")
    if len(maxes) != 2:
        raise AlistError(f"bad max-degree line {lines[1]!r}")
    col_deg = _ints(lines[2], "column degrees")
    row_deg = _ints(lines[3], "row degrees")
    if len(col_deg) != n or len(row_deg) != m:
        raise AlistError("degree list lengths do not match n and m")
    if max(col_deg) > maxes[0] or max(row_deg) > maxes[1]:
        raise AlistError("a degree exceeds the declared maximum")
    body = lines[4:]
    if len(body) < n + m:
        raise AlistError(f"expected {n + m} index lines, found {len(body)}")

    def entries(line, limit, degree, what):
        idx = [x for x in _ints(line, what) if x != 0]
        if len(idx) != degree:
            raise AlistError(f"{what} lists {len(idx)} entries, degree says {degree}")
        if any(x < 1 or x > limit for x in idx):
            raise AlistError(f"{what} has an index outside [1, {limit}]")
        if len(set(idx)) != len(idx):
            raise AlistError(f"{what} has a duplicate entry")
        return [x - 1 for x in idx]

    col_lists = [entries(body[j], m, col_deg[j], f"column {j + 1}") for j in range(n)]
    rows = [entries(body[n + i], n, row_deg[i], f"row {i + 1}") for i in range(m)]

    from_cols = sorted((r, c) for c, rs in enumerate(col_lists) for r in rs)
    from_rows = sorted((r, c) for r, cs in enumerate(rows) for c in cs)
    if from_cols != from_rows:
        raise AlistError("column and row lists describe different matrices")
    try:
        return ParityCheckMatrix(n, tuple(tuple(r) for r in rows))
    except ValueError as exc:
        raise AlistError(str(exc)) from exc
