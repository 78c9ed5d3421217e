"""Command-line driver for the five pipeline stages.

Every subcommand reads the same YAML config and writes its artifacts under
the configured output directory; later stages pick up earlier artifacts by
their default names unless paths are given explicitly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .downstream import evaluate, load_classifier, save_classifier, train_classifier
from .hamiltonian import CouplingGraph
from .pipeline import (
    choose_subsample,
    compare_pipelines,
    coupling_graph,
    fit_surrogate,
    load_config,
    prepare_from_config,
    quantum_features,
)
from .qsim import FeatureLayout, read_feature_csv, write_feature_csv
from .subsample import read_indices, write_indices
from .surrogate import (
    coverage_flag,
    coverage_radius,
    load_model,
    predict,
    ridge_objective,
    save_model,
)

INDICES = "subsample_indices.txt"
SUBSAMPLE_SUMMARY = "subsample_summary.json"
GRAPH = "coupling_graph.txt"
QFEATURES = "quantum_features.csv"
MODEL = "surrogate_model.jsonl"
SURROGATE_SUMMARY = "surrogate_summary.json"
REPLAY = "replay_features.csv"
CLASSIFIER = "classifier.json"
EVALUATION = "evaluation.json"
EVALUATION_TXT = "evaluation.txt"
COMPARISON = "comparison.json"
COMPARISON_TXT = "comparison.txt"
MANIFEST = "manifest.json"

ARTIFACTS = (INDICES, SUBSAMPLE_SUMMARY, GRAPH, QFEATURES, MODEL, SURROGATE_SUMMARY, REPLAY,
             CLASSIFIER, EVALUATION, EVALUATION_TXT, COMPARISON, COMPARISON_TXT)


class StageError(Exception):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def demo_config_path():
    """Path of the bundled demo config (synthetic parity dataset)."""
    return Path(str(resources.files("qfsurrogate") / "data" / "demo.yaml"))


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _out(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _normalized_rows(data, row_ids):
    # row ids are positions in the loaded file
    return data.train.norm_stats.apply(data.raw.samples[np.asarray(row_ids, dtype=int)])


# -- stages ---------------------------------------------------------------------------


def cmd_subsample(cfg, log=print):
    out = _out(cfg)
    data = prepare_from_config(cfg)
    sub = choose_subsample(data, cfg)
    ids = data.train.index[sub.indices]
    write_indices(out / INDICES, ids)
    summary = {
        "M": sub.M,
        "N_train": data.train.n_samples,
        "per_class_counts": {str(k): v for k, v in sub.per_class_counts.items()},
        "coverage_radius_preview": coverage_radius(data.train.samples[sub.indices]),
    }
    _dump_json(out / SUBSAMPLE_SUMMARY, summary)
    log(f"subsample: M={sub.M} of {data.train.n_samples} training rows, "
        f"per class {summary['per_class_counts']}")
    return out / INDICES


def cmd_extract(cfg, indices_path=None, log=print):
    out = _out(cfg)
    ids = read_indices(indices_path or out / INDICES)
    data = prepare_from_config(cfg)
    if ids.size == 0 or ids.min() < 0 or ids.max() >= data.raw.n_samples:
        raise ValueError("index file references rows outside the dataset")
    X = _normalized_rows(data, ids)
    graph = coupling_graph(X, cfg)
    F = quantum_features(X, graph, cfg)
    (out / GRAPH).write_text(graph.to_text(), encoding="utf-8")
    write_feature_csv(out / QFEATURES, F, FeatureLayout.from_graph(graph), row_ids=ids)
    log(f"extract: {len(ids)} samples x {F.shape[1]} quantum features")
    return out / QFEATURES


def cmd_train_surrogate(cfg, features_path=None, indices_path=None, log=print):
    out = _out(cfg)
    ids = read_indices(indices_path or out / INDICES)
    row_ids, F, layout = read_feature_csv(features_path or out / QFEATURES)
    if not np.array_equal(row_ids, ids):
        raise ValueError(
            f"feature rows ({len(row_ids)}) do not match the subsample indices ({len(ids)})"
        )
    graph = CouplingGraph.from_text((out / GRAPH).read_text(encoding="utf-8"))
    if FeatureLayout.from_graph(graph) != layout:
        raise ValueError("feature layout does not match the coupling graph")
    data = prepare_from_config(cfg)
    X = _normalized_rows(data, ids)
    model = fit_surrogate(X, F, graph, data.train.norm_stats, cfg)
    save_model(model, out / MODEL)
    Z = model.lift.transform(X)
    mse = float(np.mean(np.sum((F - predict(model, data.raw.samples[ids])) ** 2, axis=1)))
    summary = {
        "lambda": model.lam,
        "training_mse": mse,
        "training_objective": ridge_objective(model.W, model.b, Z, F, model.lam),
        "cv_scores": {repr(k): list(v) for k, v in model.cv_scores.items()},
    }
    _dump_json(out / SURROGATE_SUMMARY, summary)
    log(f"train-surrogate: lambda={model.lam:g}, training MSE={mse:.6g}")
    return out / MODEL


def cmd_replay(cfg, model_path=None, log=print):
    out = _out(cfg)
    model = load_model(model_path or out / MODEL)
    data = prepare_from_config(cfg)
    X = data.raw.samples
    if X.shape[1] != model.input_dim:
        raise ValueError(f"model expects {model.input_dim} input columns, dataset has {X.shape[1]}")
    t0 = time.perf_counter()
    F = predict(model, X)
    cov = coverage_flag(model, X)
    elapsed = time.perf_counter() - t0
    train_ids = set(data.train.index.tolist())
    split_col = ["train" if i in train_ids else "test" for i in range(data.raw.n_samples)]
    extra = {
        "split": split_col,
        "coverage": ["in" if c else "out" for c in cov.in_coverage],
        "coverage_distance": [float(d) for d in cov.distance],
    }
    write_feature_csv(out / REPLAY, F, model.layout, row_ids=data.raw.index, extra=extra)
    n_out = int(np.sum(~cov.in_coverage))
    log(f"replay: {len(X)} rows in {elapsed * 1e3:.2f} ms "
        f"({elapsed / len(X) * 1e3:.4f} ms/sample), {n_out} flagged out of coverage")
    return out / REPLAY


def _replay_split(path, data, which):
    row_ids, F, _ = read_feature_csv(path)
    if len(row_ids) != data.raw.n_samples:
        raise ValueError("replay file does not cover the dataset")
    rows = (data.train if which == "train" else data.test).index
    pos = {int(r): k for k, r in enumerate(row_ids)}
    sel = [pos[int(r)] for r in rows]
    return F[sel], data.raw.labels[rows]


def cmd_train(cfg, features_path=None, log=print):
    out = _out(cfg)
    data = prepare_from_config(cfg)
    F, y = _replay_split(features_path or out / REPLAY, data, "train")
    clf = train_classifier(F, y, cfg.classifier, seed=cfg.seed)
    save_classifier(clf, out / CLASSIFIER)
    log(f"train: {cfg.classifier} on {len(y)} surrogate feature rows")
    return out / CLASSIFIER


def cmd_evaluate(cfg, classifier_path=None, features_path=None, log=print):
    out = _out(cfg)
    data = prepare_from_config(cfg)
    clf = load_classifier(classifier_path or out / CLASSIFIER)
    F, y = _replay_split(features_path or out / REPLAY, data, "test")
    rep = evaluate(clf, F, y)
    _dump_json(out / EVALUATION, rep.to_dict())
    (out / EVALUATION_TXT).write_text(rep.to_text(), encoding="utf-8")
    log(f"evaluate: accuracy={rep.accuracy:.4f} auc={rep.auc:.4f}")
    return out / EVALUATION


def cmd_compare(cfg, log=print):
    out = _out(cfg)
    data = prepare_from_config(cfg)
    comp = compare_pipelines(data.raw, cfg)
    _dump_json(out / COMPARISON, comp.to_dict())
    (out / COMPARISON_TXT).write_text(comp.to_text(), encoding="utf-8")
    log(comp.to_text().rstrip())
    return out / COMPARISON


def write_manifest(cfg):
    out = _out(cfg)
    snapshot = cfg.to_dict()
    snapshot.pop("output_dir")
    manifest = {
        "tool": "qfsurrogate",
        "version": __version__,
        "config": snapshot,
        "inputs": {"dataset": _sha256(cfg.dataset_path)},
        "artifacts": {name: _sha256(out / name) for name in ARTIFACTS if (out / name).exists()},
    }
    _dump_json(out / MANIFEST, manifest)
    return out / MANIFEST


STAGES = (
    ("subsample", cmd_subsample),
    ("extract", cmd_extract),
    ("train-surrogate", cmd_train_surrogate),
    ("replay", cmd_replay),
    ("train", cmd_train),
    ("evaluate", cmd_evaluate),
    ("compare", cmd_compare),
)


def cmd_run_all(cfg, log=print):
    for name, fn in STAGES:
        _run_stage(name, fn, cfg, log=log)
    return write_manifest(cfg)


def _run_stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


# -- argument parsing -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="qfsurrogate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-c", "--config", required=True, help="YAML pipeline config")
        sp.add_argument("-o", "--output-dir", help="override the configured output directory")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        return sp

    add("subsample", "select the stratified k-medoid subsample")
    sp = add("extract", "simulate quantum features for the subsample")
    sp.add_argument("--indices")
    sp = add("train-surrogate", "fit the Ridge surrogate on the quantum features")
    sp.add_argument("--features")
    sp.add_argument("--indices")
    sp = add("replay", "apply the surrogate to every row, with coverage flags")
    sp.add_argument("--model")
    sp = add("train", "train the downstream classifier on replayed features")
    sp.add_argument("--features")
    sp = add("evaluate", "evaluate the downstream classifier on the test split")
    sp.add_argument("--classifier")
    sp.add_argument("--features")
    add("compare", "classical vs full-quantum vs surrogate comparison")
    add("run-all", "every stage in order, plus a manifest of artifact hashes")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    stage = args.command
    try:
        cfg = load_config(args.config, seed=args.seed, output_dir=args.output_dir)
    except (ValueError, OSError) as exc:
        print(f"[config] error: {exc}", file=sys.stderr)
        return 2
    try:
        if stage == "subsample":
            _run_stage(stage, cmd_subsample, cfg)
        elif stage == "extract":
            _run_stage(stage, cmd_extract, cfg, args.indices)
        elif stage == "train-surrogate":
            _run_stage(stage, cmd_train_surrogate, cfg, args.features, args.indices)
        elif stage == "replay":
            _run_stage(stage, cmd_replay, cfg, args.model)
        elif stage == "train":
            _run_stage(stage, cmd_train, cfg, args.features)
        elif stage == "evaluate":
            _run_stage(stage, cmd_evaluate, cfg, args.classifier, args.features)
        elif stage == "compare":
            _run_stage(stage, cmd_compare, cfg)
        elif stage == "run-all":
            path = cmd_run_all(cfg)
            print(f"run-all: manifest written to {path}")
    except StageError as exc:
        print(f"{exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
