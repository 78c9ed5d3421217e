"""Pipeline configuration and the shared stage functions.

Both the command-line tool and :func:`compare_pipelines` go through the same
stages so that their outputs agree.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import qsim
from .dataset import (
    NORMALIZATION_MODES,
    Dataset,
    SplitSpec,
    apply_normalization,
    fit_norm_stats,
    load_dataset,
    split,
)
from .downstream import CLASSIFIER_KINDS, evaluate, train_classifier
from .hamiltonian import (
    SCHEDULE_KINDS,
    TOPOLOGY_KINDS,
    Schedule,
    build_topology,
    enumerate_subsets,
    estimate_coefficients,
)
from .subsample import SubsampleSpec, default_subsample_size, select_subsample
from .surrogate import DEFAULT_LAMBDA_GRID, LIFT_KINDS, LiftSpec, fit_ridge, fit_ridge_cv, predict


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int
    dataset_path: str = ""
    label_column: str | int = "label"
    normalization: str = "min-max-symmetric"
    test_fraction: float = 0.2
    subsample_size: int | None = None
    max_medoid_iters: int = 100
    topology: str = "line"
    max_locality: int = 2
    n_bins: int = 4
    coupling_strength: float = 1.0
    schedule: str = "trig"
    anneal_time: float = 1.0
    trotter_steps: int = 8
    cd_enabled: bool = True
    shots: int | None = None
    ridge_lambda: float | None = None
    cross_validate: bool = True
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    cv_folds: int = 5
    lift: str = "identity"
    lift_degree: int = 2
    lift_features: int = 200
    lift_bandwidth: float | None = None
    classifier: str = "multinomial-logistic"
    output_dir: str = "run"

    def __post_init__(self):
        problems = []

        def need(ok, name, msg):
            if not ok:
                problems.append(f"{name}: {msg}")

        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "non-negative integer required")
        need(self.normalization in NORMALIZATION_MODES, "normalization",
             f"expected one of {NORMALIZATION_MODES}")
        need(0 < self.test_fraction < 1, "test_fraction", "must lie in (0, 1)")
        need(self.subsample_size is None or self.subsample_size >= 1, "subsample_size",
             "must be at least 1")
        need(self.topology in TOPOLOGY_KINDS, "topology", f"expected one of {TOPOLOGY_KINDS}")
        need(self.max_locality >= 2, "max_locality", "must be at least 2")
        need(self.n_bins >= 2, "n_bins", "must be at least 2")
        need(self.schedule in SCHEDULE_KINDS, "schedule", f"expected one of {SCHEDULE_KINDS}")
        need(self.anneal_time > 0, "anneal_time", "must be positive")
        need(self.trotter_steps >= 1, "trotter_steps", "must be at least 1")
        need(self.shots is None or self.shots >= 1, "shots", "must be at least 1 or null")
        need(self.ridge_lambda is None or self.ridge_lambda > 0, "ridge_lambda", "must be positive")
        need(self.cross_validate or self.ridge_lambda is not None, "ridge_lambda",
             "required when cross_validate is false")
        need(all(g > 0 for g in self.lambda_grid), "lambda_grid", "values must be positive")
        need(self.cv_folds >= 2, "cv_folds", "must be at least 2")
        need(self.lift in LIFT_KINDS, "lift", f"expected one of {LIFT_KINDS}")
        need(self.classifier in CLASSIFIER_KINDS, "classifier", f"expected one of {CLASSIFIER_KINDS}")
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))
        self.lambda_grid = tuple(float(g) for g in self.lambda_grid)

    # -- derived settings --

    def split_spec(self):
        return SplitSpec(self.test_fraction, self.seed)

    def schedule_obj(self):
        return Schedule(self.schedule, self.anneal_time, self.trotter_steps)

    def quantum_config(self, n):
        return qsim.QuantumConfig(n, self.schedule_obj(), self.cd_enabled, self.shots, self.seed)

    def lift_spec(self):
        return LiftSpec(self.lift, self.lift_degree, self.lift_features, self.lift_bandwidth,
                        self.seed)

    def to_dict(self):
        d = asdict(self)
        d["lambda_grid"] = list(self.lambda_grid)
        return d


_SECTIONS = {
    "dataset": {"path": "dataset_path", "label_column": "label_column",
                "normalization": "normalization", "test_fraction": "test_fraction"},
    "subsample": {"size": "subsample_size", "max_medoid_iters": "max_medoid_iters"},
    "hamiltonian": {"topology": "topology", "max_locality": "max_locality", "n_bins": "n_bins",
                    "coupling_strength": "coupling_strength"},
    "quantum": {"schedule": "schedule", "anneal_time": "anneal_time", "steps": "trotter_steps",
                "cd": "cd_enabled", "shots": "shots"},
    "surrogate": {"lambda": "ridge_lambda", "cross_validate": "cross_validate",
                  "lambda_grid": "lambda_grid", "cv_folds": "cv_folds", "lift": "lift",
                  "degree": "lift_degree", "n_features": "lift_features",
                  "bandwidth": "lift_bandwidth"},
    "classifier": {"kind": "classifier"},
}


def config_from_mapping(raw, base_dir=None) -> PipelineConfig:
    """Build a config from the nested mapping of a YAML config file.

    Relative dataset paths resolve against ``base_dir`` (the config file's
    directory).
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    if "seed" not in raw:
        raise ConfigError("seed: an explicit seed is mandatory")
    kwargs = {"seed": raw["seed"]}
    if "output_dir" in raw:
        kwargs["output_dir"] = raw["output_dir"]
    for section, body in raw.items():
        if section in ("seed", "output_dir"):
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"{section}: unknown configuration section")
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a mapping")
        for key, value in body.items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            kwargs[_SECTIONS[section][key]] = value
    path = kwargs.get("dataset_path")
    if path and base_dir is not None and not Path(path).is_absolute():
        kwargs["dataset_path"] = str(Path(base_dir) / path)
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, seed=None, output_dir=None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        if seed is not None:
            raw["seed"] = seed
        if output_dir is not None:
            raw["output_dir"] = str(output_dir)
    cfg = config_from_mapping(raw, base_dir=path.parent)
    if not cfg.dataset_path:
        raise ConfigError("dataset.path: required")
    if not Path(cfg.dataset_path).is_file():
        raise ConfigError(f"dataset.path: file not found: {cfg.dataset_path}")
    return cfg


# -- stages --------------------------------------------------------------------------


@dataclass
class PreparedData:
    """Normalized train/test split of the raw dataset."""

    raw: Dataset
    train: Dataset
    test: Dataset
    train_raw: Dataset
    test_raw: Dataset

    def split_hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.train.index, dtype=np.int64).tobytes())
        h.update(b"|")
        h.update(np.ascontiguousarray(self.test.index, dtype=np.int64).tobytes())
        return h.hexdigest()


def prepare(ds: Dataset, cfg: PipelineConfig) -> PreparedData:
    train_raw, test_raw = split(ds, cfg.split_spec())
    stats = fit_norm_stats(train_raw.samples, cfg.normalization)
    return PreparedData(ds, apply_normalization(train_raw, stats),
                        apply_normalization(test_raw, stats), train_raw, test_raw)


def prepare_from_config(cfg: PipelineConfig) -> PreparedData:
    return prepare(load_dataset(cfg.dataset_path, cfg.label_column), cfg)


def choose_subsample(data: PreparedData, cfg: PipelineConfig):
    """Row positions (into ``data.train``) of the quantum subsample."""
    M = cfg.subsample_size or default_subsample_size(data.train.n_samples)
    spec = SubsampleSpec(M, cfg.seed, cfg.max_medoid_iters)
    return select_subsample(data.train, spec)


def coupling_graph(samples, cfg: PipelineConfig):
    n = samples.shape[1]
    qsim.QuantumConfig(n)  # rejects n above the simulator cap early
    top = build_topology(cfg.topology, n)
    subsets = enumerate_subsets(top, cfg.max_locality) if n > 1 else []
    return estimate_coefficients(samples, subsets, cfg.n_bins, K=cfg.max_locality,
                                 strength=cfg.coupling_strength)


def quantum_features(samples, graph, cfg: PipelineConfig):
    return qsim.extract_batch(samples, graph, cfg.quantum_config(graph.n))


def fit_surrogate(inputs, targets, graph, norm_stats, cfg: PipelineConfig):
    kwargs = dict(lift=cfg.lift_spec(), norm_stats=norm_stats, graph=graph)
    if cfg.cross_validate:
        return fit_ridge_cv(inputs, targets, grid=cfg.lambda_grid, folds=cfg.cv_folds,
                            seed=cfg.seed, **kwargs)
    return fit_ridge(inputs, targets, cfg.ridge_lambda, **kwargs)


@dataclass
class ComparisonRow:
    approach: str
    accuracy: float
    auc: float
    quantum_executions: int
    split_hash: str


@dataclass
class Comparison:
    rows: list = field(default_factory=list)

    def row(self, approach):
        return next(r for r in self.rows if r.approach == approach)

    def to_dict(self):
        return {"rows": [asdict(r) for r in self.rows]}

    def to_text(self):
        lines = [f"{'approach':<14}{'accuracy':>10}{'auc':>10}{'quantum runs':>14}"]
        for r in self.rows:
            lines.append(f"{r.approach:<14}{r.accuracy:>10.4f}{r.auc:>10.4f}"
                         f"{r.quantum_executions:>14d}")
        return "\n".join(lines) + "\n"


def compare_pipelines(ds: Dataset, cfg: PipelineConfig) -> Comparison:
    """Classical baseline, full quantum and surrogate pipelines on one split.

    * ``classical``: classifier on the normalized raw inputs.
    * ``full-quantum``: classifier on simulated quantum features of every
      train and test sample.
    * ``surrogate``: quantum features only for the subsample, a Ridge
      surrogate replayed over every train and test sample.

    All three share the split, the coupling graph (estimated on the
    subsample) and the downstream classifier settings.
    """
    data = prepare(ds, cfg)
    sub = choose_subsample(data, cfg)
    q_inputs = data.train.samples[sub.indices]
    graph = coupling_graph(q_inputs, cfg)
    ytr, yte = data.train.labels, data.test.labels
    h = data.split_hash()

    def run(train_feats, test_feats):
        clf = train_classifier(train_feats, ytr, cfg.classifier, seed=cfg.seed)
        return evaluate(clf, test_feats, yte)

    rep_a = run(data.train.samples, data.test.samples)

    q_train = quantum_features(data.train.samples, graph, cfg)
    q_test = quantum_features(data.test.samples, graph, cfg)
    rep_b = run(q_train, q_test)
    n_b = data.train.n_samples + data.test.n_samples

    q_sub = quantum_features(q_inputs, graph, cfg)
    model = fit_surrogate(q_inputs, q_sub, graph, data.train.norm_stats, cfg)
    rep_c = run(predict(model, data.train_raw.samples), predict(model, data.test_raw.samples))

    return Comparison([
        ComparisonRow("classical", rep_a.accuracy, rep_a.auc, 0, h),
        ComparisonRow("full-quantum", rep_b.accuracy, rep_b.auc, n_b, h),
        ComparisonRow("surrogate", rep_c.accuracy, rep_c.auc, sub.M, h),
    ])
