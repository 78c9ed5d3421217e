"""Dense statevector simulation of the digitized counterdiabatic anneal.

The anneal interpolates from the transverse-field driver ``-G * sum_i X_i``
(ground state ``|+>^n``) to the data Hamiltonian ``H(x)``:

    H_ad(t) = A(t) * (-G * sum_i X_i) + B(t) * H(x)

Each Trotter step applies, in this order, the diagonal phases of ``H(x)``,
the driver as per-qubit X rotations and, when enabled, a local
counterdiabatic Y rotation per qubit. The counterdiabatic angle is the exact
adiabatic gauge potential of the isolated spin ``-G*A*X + B*h*Z`` with
``h = x_i``; couplings are ignored in it.

Features are expectation values of ``Z_i`` and of ``prod_{i in S} Z_i`` for
every coupling subset, in :class:`FeatureLayout` order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh

from .hamiltonian import (
    CouplingGraph,
    DataHamiltonian,
    Schedule,
    build_hamiltonian,
    schedule_values,
    z_signs,
)

MAX_QUBITS = 20
MAX_ORACLE_QUBITS = 8


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class QuantumConfig:
    """Simulation settings.

    ``shots=None`` means exact expectation values; an integer switches to
    sampling that many bitstrings per sample. ``driver_strength`` scales the
    transverse-field driver; 0 leaves only the diagonal evolution.
    """

    n: int
    schedule: Schedule = field(default_factory=Schedule)
    cd_enabled: bool = True
    shots: int | None = None
    seed: int = 0
    driver_strength: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise SimulationError(
                f"n={self.n} qubits is outside the statevector range 1..{MAX_QUBITS}; "
                "reduce the number of input columns"
            )
        if self.shots is not None and self.shots < 1:
            raise SimulationError("shots must be at least 1 in sampling mode")


@dataclass(frozen=True)
class FeatureLayout:
    n: int
    subsets: tuple

    @classmethod
    def from_graph(cls, graph: CouplingGraph):
        return cls(graph.n, tuple(graph.subsets))

    @property
    def components(self):
        return tuple((i,) for i in range(self.n)) + tuple(self.subsets)

    @property
    def descriptors(self):
        return tuple("*".join(f"Z{i}" for i in comp) for comp in self.components)

    def __len__(self):
        return self.n + len(self.subsets)

    @classmethod
    def from_descriptors(cls, names):
        comps = [tuple(int(tok[1:]) for tok in name.split("*")) for name in names]
        singles = [c for c in comps if len(c) == 1]
        n = len(singles)
        if singles != [(i,) for i in range(n)] or any(len(c) == 1 for c in comps[n:]):
            raise SimulationError("layout must list single-qubit components first, in order")
        return cls(n, tuple(comps[n:]))


# -- state preparation and gates ------------------------------------------------


def initial_state(n):
    """``|+>^n``, the ground state of ``-sum_i X_i``."""
    if not 1 <= n <= MAX_QUBITS:
        raise SimulationError(f"n={n} outside 1..{MAX_QUBITS}")
    return np.full(2 ** n, 2.0 ** (-n / 2), dtype=complex)


def apply_1q(state, gate, qubit, n):
    psi = state.reshape((2,) * n)
    psi = np.tensordot(gate, psi, axes=([1], [qubit]))
    return np.moveaxis(psi, 0, qubit).reshape(-1)


def rx_driver(angle):
    """``exp(i * angle * X)``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 1j * s], [1j * s, c]])


def ry(angle):
    """``exp(-i * angle * Y / 2)``."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cd_rates(h, A, B, dA, dB, driver_strength=1.0):
    """Time derivative of the single-spin mixing angle ``arctan(B h / (G A))``."""
    h = np.asarray(h, dtype=float)
    gA, gdA = driver_strength * A, driver_strength * dA
    num = h * (dB * gA - B * gdA)
    den = gA ** 2 + (B * h) ** 2
    return np.divide(num, den, out=np.zeros_like(h), where=den > 0)


def trotter_step(state, H: DataHamiltonian, config: QuantumConfig, t, dt):
    """Advance ``state`` by one first-order Trotter step of length ``dt``.

    Schedule values are taken at ``t``.
    """
    n = config.n
    A, B, dA, dB = schedule_values(config.schedule, t)
    state = state * np.exp(-1j * dt * B * H.diagonal())
    angle = dt * A * config.driver_strength
    if angle != 0.0:
        gate = rx_driver(angle)
        for q in range(n):
            state = apply_1q(state, gate, q, n)
    if config.cd_enabled:
        rates = cd_rates(H.fields, A, B, dA, dB, config.driver_strength)
        for q in range(n):
            if rates[q] != 0.0:
                state = apply_1q(state, ry(dt * rates[q]), q, n)
    return state


def evolve(x, graph: CouplingGraph, config: QuantumConfig):
    """Run the full digitized anneal for one normalized sample.

    ``config.schedule.steps`` uniform steps cover ``[0, T]``; each step
    evaluates the schedule at its midpoint.
    """
    if graph.n != config.n:
        raise SimulationError(f"graph has {graph.n} qubits, config has {config.n}")
    H = build_hamiltonian(x, graph)
    sch = config.schedule
    dt = sch.T / sch.steps
    state = initial_state(config.n)
    for k in range(sch.steps):
        state = trotter_step(state, H, config, (k + 0.5) * dt, dt)
    return state


# -- measurement --------------------------------------------------------------------


def extract_features(state, layout: FeatureLayout, config: QuantumConfig, sample_index=0):
    """Single- and multi-qubit Z expectation values in layout order.

    In sampling mode the bitstrings are drawn from a generator seeded with
    ``(config.seed, sample_index)``.
    """
    n = layout.n
    if state.shape != (2 ** n,):
        raise SimulationError(f"state of length {state.shape[0]} does not match a {n}-qubit layout")
    probs = np.abs(state) ** 2
    probs /= probs.sum()
    if config.shots is not None:
        rng = np.random.default_rng([config.seed, sample_index])
        probs = rng.multinomial(config.shots, probs) / config.shots
    values = np.array([probs @ z_signs(n, comp) for comp in layout.components])
    return np.clip(values, -1.0, 1.0)


def extract_batch(samples, graph: CouplingGraph, config: QuantumConfig, errors=None):
    """Quantum features for every row of ``samples``, order preserving.

    A failing row does not stop the batch. When ``errors`` is a list, each
    failure is appended as ``(row, message)`` and the row is filled with NaN;
    otherwise a :class:`SimulationError` listing all failures is raised once
    the batch has finished.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    layout = FeatureLayout.from_graph(graph)
    out = np.full((samples.shape[0], len(layout)), np.nan)
    failed = []
    for r, x in enumerate(samples):
        try:
            out[r] = extract_features(evolve(x, graph, config), layout, config, sample_index=r)
        except ValueError as exc:
            failed.append((r, str(exc)))
    if failed:
        if errors is None:
            detail = "; ".join(f"row {r}: {msg}" for r, msg in failed)
            raise SimulationError(f"{len(failed)} sample(s) failed: {detail}")
        errors.extend(failed)
    return out


# -- dense reference --------------------------------------------------------------------


def sum_x_matrix(n):
    """Dense ``sum_i X_i`` on ``n`` qubits."""
    dim = 2 ** n
    basis = np.arange(dim)
    M = np.zeros((dim, dim))
    for q in range(n):
        M[basis ^ (1 << (n - 1 - q)), basis] += 1.0
    return M


def propagate_piecewise(hamiltonian_at, state, T, substeps):
    """Evolve under a time-dependent Hermitian matrix, constant on each slice.

    ``hamiltonian_at(t)`` is evaluated at slice midpoints and each slice is
    exponentiated exactly through its eigendecomposition.
    """
    dt = T / substeps
    state = np.asarray(state, dtype=complex)
    for k in range(substeps):
        w, V = eigh(hamiltonian_at((k + 0.5) * dt))
        state = V @ (np.exp(-1j * dt * w) * (V.conj().T @ state))
    return state


def exact_evolve_oracle(x, graph: CouplingGraph, config: QuantumConfig, substeps=1000):
    """Reference anneal without Trotter splitting and without the CD term."""
    n = config.n
    if n > MAX_ORACLE_QUBITS:
        raise SimulationError(f"dense oracle limited to {MAX_ORACLE_QUBITS} qubits, got {n}")
    H = build_hamiltonian(x, graph)
    driver = -config.driver_strength * sum_x_matrix(n)
    diag = np.diag(H.diagonal())

    def h_ad(t):
        A, B, _, _ = schedule_values(config.schedule, t)
        return A * driver + B * diag

    return propagate_piecewise(h_ad, initial_state(n), config.schedule.T, substeps)


def fidelity(a, b):
    return float(abs(np.vdot(a, b)) ** 2)


def ground_state_fidelity(state, H: DataHamiltonian, tol=1e-9):
    """Probability mass of ``state`` on the (possibly degenerate) ground space of ``H``."""
    diag = H.diagonal()
    ground = diag <= diag.min() + tol
    return float(np.sum(np.abs(state[ground]) ** 2))


# -- feature files ----------------------------------------------------------------------


def write_feature_csv(path, features, layout: FeatureLayout, row_ids=None, extra=None):
    """Feature matrix as CSV: a ``row`` column, then layout components.

    ``extra`` is an optional mapping of column name to per-row values
    appended after the features.
    """
    features = np.asarray(features, dtype=float)
    if row_ids is None:
        row_ids = np.arange(features.shape[0])
    extra = extra or {}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", *layout.descriptors, *extra])
        for r, (rid, vals) in enumerate(zip(row_ids, features)):
            w.writerow([int(rid), *(repr(float(v)) for v in vals),
                        *(_fmt(col[r]) for col in extra.values())])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_feature_csv(path):
    """Return ``(row_ids, features, layout)`` from :func:`write_feature_csv` output.

    Columns after the layout components are ignored.
    """
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "row":
        raise SimulationError(f"{path}: not a feature CSV")
    names = [h for h in rows[0][1:] if h.startswith("Z")]
    layout = FeatureLayout.from_descriptors(names)
    D = len(names)
    ids = np.array([int(r[0]) for r in rows[1:]], dtype=int)
    F = np.array([[float(v) for v in r[1:1 + D]] for r in rows[1:]]).reshape(len(ids), D)
    return ids, F, layout
