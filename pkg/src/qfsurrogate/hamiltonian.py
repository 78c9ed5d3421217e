"""Data-encoded diagonal k-local spin-glass Hamiltonians.

A normalized sample ``x`` becomes the longitudinal fields of

    H(x) = sum_i x_i Z_i + g * sum_S c_S prod_{i in S} Z_i

where the subsets ``S`` are connected vertex sets of a device topology (at
most ``K`` qubits each), ``c_S`` in [0, 1] are normalized mutual-information
coefficients estimated from data and ``g`` is a global coupling strength.

Basis convention: qubit 0 is the most significant bit of the basis index and
bit value 0 carries Z eigenvalue +1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import networkx as nx
import numpy as np
from scipy.stats import rankdata

TOPOLOGY_KINDS = ("line", "ring", "heavy-hex", "complete")
SCHEDULE_KINDS = ("linear", "trig")


class HamiltonianError(ValueError):
    pass


# -- topology ---------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    kind: str
    n: int
    edges: tuple

    def neighbors(self):
        adj = {i: set() for i in range(self.n)}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


def _heavy_hex_size(rows, cols):
    # honeycomb of rows x cols hexagons: V = 2(r+1)(c+1) - 2, E = V + r*c - 1
    v = 2 * (rows + 1) * (cols + 1) - 2
    return v + (v + rows * cols - 1)


def heavy_hex_shape(n):
    """(rows, cols) of hexagons whose edge-subdivided lattice has ``n`` nodes."""
    for rows in range(1, n + 1):
        if _heavy_hex_size(rows, rows) > n:
            break
        for cols in range(rows, n + 1):
            size = _heavy_hex_size(rows, cols)
            if size == n:
                return rows, cols
            if size > n:
                break
    return None


def heavy_hex_sizes(limit=200):
    """Qubit counts the heavy-hex generator accepts, up to ``limit``."""
    return [n for n in range(1, limit + 1) if heavy_hex_shape(n) is not None]


def _heavy_hex_edges(rows, cols):
    # honeycomb with one extra qubit sitting on every edge
    g = nx.hexagonal_lattice_graph(rows, cols)
    nodes = sorted(g.nodes())
    ids = {v: i for i, v in enumerate(nodes)}
    lattice_edges = sorted(tuple(sorted((ids[u], ids[v]))) for u, v in g.edges())
    edges = []
    for k, (u, v) in enumerate(lattice_edges):
        mid = len(nodes) + k
        edges.append((u, mid))
        edges.append((v, mid))
    return tuple(sorted(edges))


def build_topology(kind, n) -> Topology:
    if n < 1:
        raise HamiltonianError("topology needs at least one qubit")
    if kind == "line":
        edges = tuple((i, i + 1) for i in range(n - 1))
    elif kind == "ring":
        if n < 3:
            edges = tuple((i, i + 1) for i in range(n - 1))
        else:
            edges = tuple(sorted([(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]))
    elif kind == "complete":
        edges = tuple(combinations(range(n), 2))
    elif kind == "heavy-hex":
        shape = heavy_hex_shape(n)
        if shape is None:
            raise HamiltonianError(
                f"heavy-hex cannot tile n={n}; valid sizes start {heavy_hex_sizes(80)}"
            )
        edges = _heavy_hex_edges(*shape)
    else:
        raise HamiltonianError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    return Topology(kind, n, edges)


def enumerate_subsets(top: Topology, K) -> list:
    """Connected vertex subsets of size 2..K, ordered by size then lexicographically."""
    if K < 2:
        raise HamiltonianError("maximum locality K must be at least 2")
    adj = top.neighbors()
    level = {frozenset(e) for e in top.edges}
    out = []
    for size in range(2, K + 1):
        out.extend(sorted(tuple(sorted(s)) for s in level))
        if size == K:
            break
        grown = set()
        for s in level:
            frontier = set().union(*(adj[v] for v in s)) - s
            for v in frontier:
                grown.add(s | {v})
        level = grown
    return out


# -- coefficients -------------------------------------------------------------


@dataclass(frozen=True)
class CouplingGraph:
    n: int
    subsets: tuple
    coeffs: np.ndarray
    K: int
    strength: float = 1.0

    def __post_init__(self):
        subsets = tuple(tuple(int(i) for i in s) for s in self.subsets)
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if coeffs.shape[0] != len(subsets):
            raise HamiltonianError("one coefficient per subset is required")
        if len(set(subsets)) != len(subsets):
            raise HamiltonianError("duplicate subsets in coupling graph")
        for s in subsets:
            if not 2 <= len(s) <= self.K or min(s) < 0 or max(s) >= self.n:
                raise HamiltonianError(f"invalid subset {s} for n={self.n}, K={self.K}")
        if np.any(coeffs < 0.0) or np.any(coeffs > 1.0):
            raise HamiltonianError("coupling coefficients must lie in [0, 1]")
        coeffs.setflags(write=False)
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dimension(self):
        """Length of the feature vector this graph induces."""
        return self.n + len(self.subsets)

    def to_text(self):
        lines = ["coupling-graph v1", f"n {self.n}", f"K {self.K}",
                 f"strength {self.strength!r}"]
        lines += [f"{','.join(map(str, s))} {c:.17g}" for s, c in zip(self.subsets, self.coeffs)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "coupling-graph v1":
            raise HamiltonianError("not a coupling-graph v1 document")
        try:
            n = int(lines[1].split()[1])
            K = int(lines[2].split()[1])
            strength = float(lines[3].split()[1])
            subsets, coeffs = [], []
            for ln in lines[4:]:
                s, c = ln.split()
                subsets.append(tuple(int(i) for i in s.split(",")))
                coeffs.append(float(c))
        except (IndexError, ValueError) as exc:
            raise HamiltonianError(f"malformed coupling graph: {exc}") from None
        return cls(n, tuple(subsets), np.array(coeffs), K, strength)


def quantile_bins(column, n_bins):
    """Rank-based equal-population binning; ties share a bin."""
    column = np.asarray(column, dtype=float)
    ranks = rankdata(column, method="average")
    codes = np.floor((ranks - 1.0) * n_bins / column.size).astype(int)
    return np.clip(codes, 0, n_bins - 1)


def _entropy(codes):
    # codes: (N, k) integer matrix; joint entropy in nats
    _, counts = np.unique(codes, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def normalized_total_correlation(codes):
    """Total correlation of the columns of ``codes`` scaled to [0, 1].

    The scale is ``(k - 1) * max(H_i)`` for ``k`` columns, which bounds total
    correlation from above and is reached by identical columns; for two
    columns this is mutual information over the larger marginal entropy.
    Zero when every column is constant.
    """
    codes = np.asarray(codes)
    marg = [_entropy(codes[:, [j]]) for j in range(codes.shape[1])]
    tc = sum(marg) - _entropy(codes)
    bound = (len(marg) - 1) * max(marg)
    if bound <= 1e-12:
        return 0.0
    return float(np.clip(tc / bound, 0.0, 1.0))


def estimate_coefficients(samples, subsets, n_bins=4, K=None, strength=1.0) -> CouplingGraph:
    """Coupling coefficients ``c_S`` from the joint statistics of the input columns.

    Pairs get normalized mutual information, larger subsets normalized total
    correlation, both on quantile-binned columns. Labels are not used.
    """
    X = np.asarray(getattr(samples, "samples", samples), dtype=float)
    rows, n = X.shape
    if rows < 2:
        raise HamiltonianError("coefficient estimation needs at least two rows")
    if rows < 8:
        warnings.warn(f"only {rows} rows for coefficient estimation; estimates are coarse")
    if rows < n_bins:
        reduced = max(2, rows)
        warnings.warn(f"{rows} rows cannot fill {n_bins} bins; using {reduced}")
        n_bins = reduced
    codes = np.column_stack([quantile_bins(X[:, j], n_bins) for j in range(n)])
    subsets = [tuple(s) for s in subsets]
    coeffs = np.array([normalized_total_correlation(codes[:, list(s)]) for s in subsets])
    if K is None:
        K = max((len(s) for s in subsets), default=2)
    return CouplingGraph(n, tuple(subsets), coeffs, K, strength)


# -- Hamiltonian ----------------------------------------------------------------


@lru_cache(maxsize=256)
def z_signs(n, subset):
    """Eigenvalue of ``prod_{i in subset} Z_i`` on every basis state, as int8."""
    basis = np.arange(2 ** n, dtype=np.int64)
    parity = np.zeros(2 ** n, dtype=np.int64)
    for i in subset:
        parity ^= (basis >> (n - 1 - i)) & 1
    out = (1 - 2 * parity).astype(np.int8)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DataHamiltonian:
    fields: np.ndarray
    graph: CouplingGraph
    _diag: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return self.graph.n

    def diagonal(self):
        """Energies of all ``2**n`` computational basis states."""
        if self._diag is None:
            n = self.n
            diag = np.zeros(2 ** n)
            for i, h in enumerate(self.fields):
                if h != 0.0:
                    diag += h * z_signs(n, (i,))
            g = self.graph.strength
            for s, c in zip(self.graph.subsets, self.graph.coeffs):
                if c != 0.0:
                    diag += (g * c) * z_signs(n, s)
            diag.setflags(write=False)
            object.__setattr__(self, "_diag", diag)
        return self._diag


def build_hamiltonian(x, graph: CouplingGraph) -> DataHamiltonian:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != graph.n:
        raise HamiltonianError(f"sample has {x.shape[0]} entries, graph has {graph.n} qubits")
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise HamiltonianError("fields must be normalized into [-1, 1]")
    x = x.copy()
    x.setflags(write=False)
    return DataHamiltonian(x, graph)


# -- schedules --------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    kind: str = "trig"
    T: float = 1.0
    steps: int = 8

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise HamiltonianError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if not self.T > 0:
            raise HamiltonianError("anneal time T must be positive")
        if self.steps < 1:
            raise HamiltonianError("steps must be at least 1")


def schedule_values(sch: Schedule, t):
    """Return ``(A, B, dA/dt, dB/dt)`` at time ``t``."""
    T = sch.T
    if t < -1e-12 * T or t > T * (1 + 1e-12):
        raise HamiltonianError(f"t={t} outside [0, {T}]")
    t = min(max(t, 0.0), T)
    if sch.kind == "linear":
        return 1.0 - t / T, t / T, -1.0 / T, 1.0 / T
    u = math.pi * t / (2.0 * T)
    rate = math.pi / (2.0 * T) * math.sin(2.0 * u)
    return math.cos(u) ** 2, math.sin(u) ** 2, -rate, rate
