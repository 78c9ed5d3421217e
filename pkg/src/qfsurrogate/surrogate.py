"""Closed-form Ridge surrogate from raw inputs to quantum features.

The model is ``F(x) = W z(x) + b`` with ``z`` an optional lift of the
normalized input. It minimizes

    (1/M) sum_i ||phi_i - W z_i - b||^2 + lam * ||W||_F^2

which, after centering, is the linear system

    (Zc^T Zc + M lam I) W^T = Zc^T Yc,    b = mean(Y) - W mean(Z)

solved with one Cholesky factorization shared by all output columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist, pdist

from .dataset import NormStats
from .hamiltonian import CouplingGraph
from .qsim import FeatureLayout

MODEL_FORMAT = "qfsurrogate-model"
MODEL_VERSION = 1
LIFT_KINDS = ("identity", "polynomial", "random-fourier")
DEFAULT_LAMBDA_GRID = tuple(10.0 ** k for k in range(-6, 3))


class SurrogateError(ValueError):
    pass


class ModelFormatError(SurrogateError):
    pass


# -- lifts ----------------------------------------------------------------------


@dataclass(frozen=True)
class LiftSpec:
    kind: str = "identity"
    degree: int = 2
    n_features: int = 200
    bandwidth: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LIFT_KINDS:
            raise SurrogateError(f"unknown lift {self.kind!r}; expected one of {LIFT_KINDS}")
        if self.kind == "polynomial" and not 1 <= self.degree <= 3:
            raise SurrogateError("polynomial lift degree must be 1, 2 or 3")
        if self.kind == "random-fourier":
            if self.n_features < 1:
                raise SurrogateError("random-fourier lift needs at least one feature")
            if self.bandwidth is not None and not self.bandwidth > 0:
                raise SurrogateError("bandwidth must be positive")


@dataclass(frozen=True)
class Lift:
    """A lift with all of its data-dependent parameters resolved."""

    spec: LiftSpec
    input_dim: int
    monomials: tuple = ()
    frequencies: np.ndarray | None = None
    phases: np.ndarray | None = None
    bandwidth: float | None = None

    @property
    def output_dim(self):
        if self.spec.kind == "identity":
            return self.input_dim
        if self.spec.kind == "polynomial":
            return len(self.monomials)
        return self.frequencies.shape[1]

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_dim:
            raise SurrogateError(f"lift expects {self.input_dim} inputs, got {X.shape[-1]}")
        kind = self.spec.kind
        if kind == "identity":
            return X
        if kind == "polynomial":
            return np.stack([np.prod(X[..., list(m)], axis=-1) for m in self.monomials], axis=-1)
        scale = np.sqrt(2.0 / self.frequencies.shape[1])
        return scale * np.cos(np.einsum("...d,dp->...p", X, self.frequencies) + self.phases)

    def to_dict(self):
        d = {"kind": self.spec.kind, "degree": self.spec.degree,
             "n_features": self.spec.n_features, "seed": self.spec.seed,
             "input_dim": self.input_dim, "bandwidth": self.bandwidth}
        if self.spec.kind == "random-fourier":
            d["frequencies"] = self.frequencies.tolist()
            d["phases"] = self.phases.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        spec = LiftSpec(d["kind"], d["degree"], d["n_features"], d["bandwidth"], d["seed"])
        if spec.kind != "random-fourier":
            return make_lift(spec, d["input_dim"])
        freq = np.asarray(d["frequencies"], dtype=float).reshape(d["input_dim"], -1)
        phases = np.asarray(d["phases"], dtype=float)
        if phases.shape != (freq.shape[1],):
            raise ModelFormatError("random-fourier phases do not match frequencies")
        return cls(spec, d["input_dim"], frequencies=freq, phases=phases, bandwidth=d["bandwidth"])


def make_lift(spec: LiftSpec, input_dim, reference=None) -> Lift:
    """Resolve ``spec`` for ``input_dim`` inputs.

    For the random-Fourier lift without an explicit bandwidth, the Gaussian
    kernel width is the median pairwise distance of ``reference``.
    """
    if spec.kind == "identity":
        return Lift(spec, input_dim)
    if spec.kind == "polynomial":
        monos = tuple(m for deg in range(1, spec.degree + 1)
                      for m in combinations_with_replacement(range(input_dim), deg))
        return Lift(spec, input_dim, monomials=monos)
    bw = spec.bandwidth
    if bw is None:
        if reference is None or len(reference) < 2:
            raise SurrogateError("random-fourier lift needs a bandwidth or reference points")
        bw = float(np.median(pdist(np.asarray(reference, dtype=float))))
        if not bw > 0:
            bw = 1.0
    rng = np.random.default_rng(spec.seed)
    freq = rng.standard_normal((input_dim, spec.n_features)) / bw
    phases = rng.uniform(0.0, 2.0 * np.pi, spec.n_features)
    return Lift(spec, input_dim, frequencies=freq, phases=phases, bandwidth=bw)


# -- model ----------------------------------------------------------------------------


class Coverage(NamedTuple):
    in_coverage: bool | np.ndarray
    distance: float | np.ndarray


@dataclass(frozen=True)
class SurrogateModel:
    W: np.ndarray
    b: np.ndarray
    lam: float
    lift: Lift
    layout: FeatureLayout
    norm_stats: NormStats | None = None
    coverage_refs: np.ndarray | None = None
    coverage_radius: float = 0.0
    graph: CouplingGraph | None = None
    cv_scores: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise SurrogateError("lambda must be positive")
        D, p = self.W.shape
        if D != len(self.layout):
            raise SurrogateError(f"W has {D} rows but the feature layout has {len(self.layout)}")
        if p != self.lift.output_dim:
            raise SurrogateError(f"W has {p} columns but the lift produces {self.lift.output_dim}")
        if self.b.shape != (D,):
            raise SurrogateError("intercept length must equal the feature dimension")
        if self.coverage_refs is not None and self.coverage_refs.shape[1] != p:
            raise SurrogateError("coverage references must live in the lifted space")
        if self.norm_stats is not None and self.norm_stats.shift.shape[0] != self.lift.input_dim:
            raise SurrogateError("normalization stats do not match the input dimension")

    @property
    def input_dim(self):
        return self.lift.input_dim

    def embed(self, X, clip=True):
        """Normalize then lift raw inputs."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_dim:
            raise SurrogateError(f"model expects {self.input_dim} inputs, got {X.shape[-1]}")
        if self.norm_stats is not None:
            X = self.norm_stats.apply(X, clip=clip)
        return self.lift.transform(X)


def _check_finite(name, A):
    if not np.all(np.isfinite(A)):
        raise SurrogateError(f"{name} contains non-finite values")


def _solve_centered(Z, Y, lam):
    M = Z.shape[0]
    z_mean, y_mean = Z.mean(axis=0), Y.mean(axis=0)
    Zc, Yc = Z - z_mean, Y - y_mean
    G = Zc.T @ Zc
    G[np.diag_indices_from(G)] += M * lam
    Wt = cho_solve(cho_factor(G, lower=True), Zc.T @ Yc)
    W = Wt.T
    return W, y_mean - W @ z_mean


def ridge_objective(W, b, Z, Y, lam):
    R = Y - Z @ W.T - b
    return float(np.mean(np.sum(R ** 2, axis=1)) + lam * np.sum(W ** 2))


def coverage_radius(refs, percentile=95.0):
    """Percentile of nearest-neighbour distances inside ``refs``."""
    if len(refs) < 2:
        return 0.0
    d = cdist(refs, refs)
    np.fill_diagonal(d, np.inf)
    return float(np.percentile(d.min(axis=1), percentile))


def fit_ridge(inputs, targets, lam, lift=LiftSpec(), norm_stats=None, layout=None,
              graph=None, coverage_percentile=95.0) -> SurrogateModel:
    """Fit the surrogate in closed form.

    ``inputs`` are already normalized (``norm_stats`` describes how, so that
    :func:`predict` can take raw samples). ``layout`` defaults to a layout
    with only single-qubit components when ``targets`` has ``d`` columns, and
    is otherwise taken from ``graph``.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    Y = np.atleast_2d(np.asarray(targets, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise SurrogateError("inputs and targets need the same number of rows")
    if X.shape[0] < 2:
        raise SurrogateError("need at least two training rows")
    if not lam > 0:
        raise SurrogateError("lambda must be positive")
    _check_finite("inputs", X)
    _check_finite("targets", Y)
    if layout is None:
        layout = FeatureLayout.from_graph(graph) if graph is not None else _flat_layout(Y.shape[1])
    if isinstance(lift, LiftSpec):
        lift = make_lift(lift, X.shape[1], reference=X)
    Z = lift.transform(X)
    W, b = _solve_centered(Z, Y, lam)
    return SurrogateModel(W=W, b=b, lam=float(lam), lift=lift, layout=layout,
                          norm_stats=norm_stats, coverage_refs=Z,
                          coverage_radius=coverage_radius(Z, coverage_percentile), graph=graph)


def _flat_layout(D):
    return FeatureLayout(D, ())


def cross_validate_lambda(inputs, targets, lift=LiftSpec(), grid=DEFAULT_LAMBDA_GRID,
                          folds=5, seed=0):
    """Pick lambda by k-fold CV with the one-standard-error rule.

    Returns ``(lam, scores)`` where ``scores`` maps each grid value to its
    ``(mean, standard error)`` validation MSE. The chosen value is the largest
    lambda whose mean is within one standard error of the best mean.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.atleast_2d(np.asarray(targets, dtype=float))
    M = X.shape[0]
    folds = min(folds, M)
    if folds < 2:
        raise SurrogateError("cross-validation needs at least two rows")
    if isinstance(lift, LiftSpec):
        lift = make_lift(lift, X.shape[1], reference=X)
    Z = lift.transform(X)
    perm = np.random.default_rng(seed).permutation(M)
    parts = np.array_split(perm, folds)
    grid = sorted(float(g) for g in grid)
    scores = {}
    for lam in grid:
        errs = []
        for k in range(folds):
            val = parts[k]
            trn = np.concatenate([parts[j] for j in range(folds) if j != k])
            if trn.size < 2:
                continue
            W, b = _solve_centered(Z[trn], Y[trn], lam)
            R = Y[val] - Z[val] @ W.T - b
            errs.append(float(np.mean(R ** 2)))
        errs = np.array(errs)
        se = errs.std(ddof=1) / np.sqrt(errs.size) if errs.size > 1 else 0.0
        scores[lam] = (float(errs.mean()), float(se))
    best = min(grid, key=lambda g: scores[g][0])
    limit = scores[best][0] + scores[best][1]
    chosen = max(g for g in grid if scores[g][0] <= limit)
    return chosen, scores


def fit_ridge_cv(inputs, targets, lift=LiftSpec(), grid=DEFAULT_LAMBDA_GRID, folds=5,
                 seed=0, **kwargs) -> SurrogateModel:
    X = np.asarray(inputs, dtype=float)
    if isinstance(lift, LiftSpec):
        lift = make_lift(lift, X.shape[1], reference=X)
    lam, scores = cross_validate_lambda(X, targets, lift, grid, folds, seed)
    model = fit_ridge(X, targets, lam, lift=lift, **kwargs)
    object.__setattr__(model, "cv_scores", scores)
    return model


def predict(model: SurrogateModel, x, clip=True):
    """Surrogate features for raw sample(s) ``x``; outputs are not clamped."""
    Z = model.embed(x, clip=clip)
    # einsum's own loop keeps each row's rounding independent of batch size
    return np.einsum("...p,dp->...d", Z, model.W) + model.b


def coverage_flag(model: SurrogateModel, x, clip=True) -> Coverage:
    """Distance to the nearest subsample point and whether it is within the radius."""
    if model.coverage_refs is None:
        raise SurrogateError("model carries no coverage references")
    Z = model.embed(x, clip=clip)
    single = Z.ndim == 1
    d = cdist(np.atleast_2d(Z), model.coverage_refs).min(axis=1)
    inside = d <= model.coverage_radius
    if single:
        return Coverage(bool(inside[0]), float(d[0]))
    return Coverage(inside, d)


# -- persistence ------------------------------------------------------------------------

_SECTIONS = ("header", "layout", "lift", "norm_stats", "ridge", "coverage", "graph")


def save_model(model: SurrogateModel, path):
    """Write the model as one JSON object per line, one line per section."""
    D, p = model.W.shape
    sections = [
        {"section": "header", "format": MODEL_FORMAT, "version": MODEL_VERSION,
         "D": D, "p": p, "d": model.input_dim},
        {"section": "layout", "components": list(model.layout.descriptors)},
        {"section": "lift", **model.lift.to_dict()},
        {"section": "norm_stats",
         "stats": None if model.norm_stats is None else model.norm_stats.to_dict()},
        {"section": "ridge", "lambda": model.lam, "W": model.W.tolist(), "b": model.b.tolist()},
        {"section": "coverage", "radius": model.coverage_radius,
         "refs": None if model.coverage_refs is None else model.coverage_refs.tolist()},
        {"section": "graph", "text": None if model.graph is None else model.graph.to_text()},
    ]
    text = "".join(json.dumps(s, allow_nan=False) + "\n" for s in sections)
    Path(path).write_text(text, encoding="utf-8")


def load_model(path) -> SurrogateModel:
    found = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            break
        if isinstance(obj, dict) and "section" in obj:
            found[obj["section"]] = obj
    missing = [s for s in _SECTIONS if s not in found]
    if missing:
        raise ModelFormatError(f"{path}: missing section(s): {', '.join(missing)}")
    head = found["header"]
    if head.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a surrogate model file")
    if head.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: model version {head.get('version')} unsupported (expected {MODEL_VERSION})"
        )
    D, p, d = head["D"], head["p"], head["d"]
    try:
        W = np.array(found["ridge"]["W"], dtype=float)
        b = np.array(found["ridge"]["b"], dtype=float)
    except ValueError:
        raise ModelFormatError(f"{path}: ridge matrix rows have unequal lengths") from None
    if W.shape != (D, p):
        raise ModelFormatError(f"{path}: W has shape {W.shape}, header says {(D, p)}")
    if b.shape != (D,):
        raise ModelFormatError(f"{path}: b has length {b.shape}, header says {D}")
    layout = FeatureLayout.from_descriptors(found["layout"]["components"])
    if len(layout) != D:
        raise ModelFormatError(f"{path}: layout has {len(layout)} components, header says {D}")
    lift = Lift.from_dict(found["lift"])
    if lift.input_dim != d or lift.output_dim != p:
        raise ModelFormatError(f"{path}: lift dimensions do not match header")
    stats = found["norm_stats"]["stats"]
    norm = None if stats is None else NormStats.from_dict(stats)
    if norm is not None and norm.shift.shape != (d,):
        raise ModelFormatError(f"{path}: normalization stats have the wrong length")
    refs = found["coverage"]["refs"]
    refs = None if refs is None else np.array(refs, dtype=float).reshape(-1, p)
    gtext = found["graph"]["text"]
    graph = None if gtext is None else CouplingGraph.from_text(gtext)
    try:
        return SurrogateModel(W=W, b=b, lam=found["ridge"]["lambda"], lift=lift, layout=layout,
                              norm_stats=norm, coverage_refs=refs,
                              coverage_radius=found["coverage"]["radius"], graph=graph)
    except SurrogateError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
