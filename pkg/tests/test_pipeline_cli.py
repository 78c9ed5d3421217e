import json

import numpy as np
import pytest
import yaml

from qfsurrogate import cli
from qfsurrogate.dataset import load_dataset, make_parity_dataset, save_dataset
from qfsurrogate.pipeline import ConfigError, compare_pipelines, config_from_mapping, load_config
from qfsurrogate.qsim import read_feature_csv
from qfsurrogate.subsample import read_indices
from qfsurrogate.surrogate import load_model, predict, ridge_objective


def small_config(tmp_path, n_features=4, n_samples=60, **overrides):
    ds = make_parity_dataset(n_samples, n_features, seed=3)
    save_dataset(ds, tmp_path / "data.csv")
    raw = {
        "seed": 1,
        "output_dir": str(tmp_path / "run"),
        "dataset": {"path": "data.csv", "label_column": "label"},
        "subsample": {},
        "quantum": {"steps": 4, "cd": False},
        "surrogate": {"lift": "polynomial", "degree": 2},
    }
    for key, value in overrides.items():
        section, _, name = key.partition("__")
        if name:
            raw.setdefault(section, {})[name] = value
        else:
            raw[section] = value
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


# -- configuration -------------------------------------------------------------------


def test_seed_is_mandatory():
    with pytest.raises(ConfigError, match="seed"):
        config_from_mapping({"dataset": {"path": "x.csv"}})


def test_field_level_messages():
    with pytest.raises(ConfigError) as err:
        config_from_mapping({"seed": 0, "quantum": {"steps": 0}, "surrogate": {"lift": "x"}})
    assert "trotter_steps" in str(err.value) and "lift" in str(err.value)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="quantum.stepz"):
        config_from_mapping({"seed": 0, "quantum": {"stepz": 3}})
    with pytest.raises(ConfigError, match="unknown configuration section"):
        config_from_mapping({"seed": 0, "extras": {}})


def test_missing_dataset_file(tmp_path):
    (tmp_path / "c.yaml").write_text("seed: 0\ndataset:\n  path: nowhere.csv\n")
    with pytest.raises(ConfigError, match="file not found"):
        load_config(tmp_path / "c.yaml")


def test_overrides_and_relative_paths(tmp_path):
    cfg = load_config(small_config(tmp_path), seed=9, output_dir=tmp_path / "other")
    assert cfg.seed == 9 and cfg.output_dir == str(tmp_path / "other")
    assert cfg.dataset_path == str(tmp_path / "data.csv")


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "c.yaml").write_text("dataset:\n  path: data.csv\n")
    assert run(["subsample", "-c", tmp_path / "c.yaml"]) == 2
    assert "[config]" in capsys.readouterr().err


# -- subcommands ---------------------------------------------------------------------


def test_subsample_writes_default_size(tmp_path):
    cfg_path = small_config(tmp_path)
    assert run(["subsample", "-c", cfg_path]) == 0
    idx = read_indices(tmp_path / "run" / cli.INDICES)
    assert idx.size == 10  # ceil(0.2 * 48 training rows)
    first = (tmp_path / "run" / cli.INDICES).read_bytes()
    assert run(["subsample", "-c", cfg_path]) == 0
    assert (tmp_path / "run" / cli.INDICES).read_bytes() == first
    summary = json.loads((tmp_path / "run" / cli.SUBSAMPLE_SUMMARY).read_text())
    assert sum(summary["per_class_counts"].values()) == 10
    assert summary["coverage_radius_preview"] > 0


def test_subsample_too_small_fails_with_stage(tmp_path, capsys):
    cfg_path = small_config(tmp_path, subsample__size=1)
    assert run(["subsample", "-c", cfg_path]) == 1
    err = capsys.readouterr().err
    assert err.startswith("[subsample]") and "number of classes" in err


def test_extract_dimensions(tmp_path):
    cfg_path = small_config(tmp_path, n_features=6, subsample__size=10)
    run(["subsample", "-c", cfg_path])
    assert run(["extract", "-c", cfg_path]) == 0
    ids, F, layout = read_feature_csv(tmp_path / "run" / cli.QFEATURES)
    assert F.shape == (10, 11) and len(layout) == 11
    first = (tmp_path / "run" / cli.QFEATURES).read_bytes()
    run(["extract", "-c", cfg_path])
    assert (tmp_path / "run" / cli.QFEATURES).read_bytes() == first


def test_extract_shot_mode_seeding(tmp_path):
    def features(seed, sub):
        cfg_path = small_config(tmp_path / sub, quantum__shots=2000)
        run(["subsample", "-c", cfg_path])
        run(["extract", "-c", cfg_path, "--seed", seed])
        return (tmp_path / sub / "run" / cli.QFEATURES).read_bytes()

    for sub in ("a", "b", "c"):
        (tmp_path / sub).mkdir()
    a, b = features(4, "a"), features(4, "b")
    assert a == b
    c = features(5, "c")
    assert c != a


def test_extract_qubit_cap(tmp_path, capsys):
    cfg_path = small_config(tmp_path, n_features=21, n_samples=40)
    run(["subsample", "-c", cfg_path])
    assert run(["extract", "-c", cfg_path]) == 1
    err = capsys.readouterr().err
    assert err.startswith("[extract]")
    assert "reduce the number of input columns" in err


def test_train_surrogate_and_replay(tmp_path):
    cfg_path = small_config(tmp_path)
    out = tmp_path / "run"
    for stage in ("subsample", "extract", "train-surrogate", "replay"):
        assert run([stage, "-c", cfg_path]) == 0, stage
    cfg = load_config(cfg_path)
    model = load_model(out / cli.MODEL)
    summary = json.loads((out / cli.SURROGATE_SUMMARY).read_text())
    assert summary["lambda"] in cfg.lambda_grid

    ids, F, _ = read_feature_csv(out / cli.QFEATURES)
    ds = load_dataset(tmp_path / "data.csv", "label")
    pred = predict(model, ds.samples[ids])
    assert summary["training_mse"] == pytest.approx(np.mean(np.sum((F - pred) ** 2, axis=1)))
    Z = model.lift.transform(model.norm_stats.apply(ds.samples[ids]))
    assert summary["training_objective"] == pytest.approx(
        ridge_objective(model.W, model.b, Z, F, model.lam))

    rows, R, _ = read_feature_csv(out / cli.REPLAY)
    assert len(rows) == ds.n_samples
    np.testing.assert_array_equal(R[ids], pred)
    lines = (out / cli.REPLAY).read_text().splitlines()
    header = lines[0].split(",")
    cov = header.index("coverage")
    dist = header.index("coverage_distance")
    for i in ids:
        fields = lines[1 + i].split(",")
        assert fields[cov] == "in" and float(fields[dist]) == 0.0


def test_feature_index_mismatch(tmp_path, capsys):
    cfg_path = small_config(tmp_path)
    run(["subsample", "-c", cfg_path])
    run(["extract", "-c", cfg_path])
    (tmp_path / "other.txt").write_text("0\n1\n")
    assert run(["train-surrogate", "-c", cfg_path, "--indices", tmp_path / "other.txt"]) == 1
    assert "[train-surrogate]" in capsys.readouterr().err


def test_run_all_matches_individual_stages(tmp_path):
    cfg_path = small_config(tmp_path)
    assert run(["run-all", "-c", cfg_path, "-o", tmp_path / "all"]) == 0
    for stage in ("subsample", "extract", "train-surrogate", "replay", "train", "evaluate",
                  "compare"):
        assert run([stage, "-c", cfg_path, "-o", tmp_path / "steps"]) == 0
    for name in cli.ARTIFACTS:
        assert (tmp_path / "all" / name).read_bytes() == (tmp_path / "steps" / name).read_bytes()
    manifest = json.loads((tmp_path / "all" / cli.MANIFEST).read_text())
    assert set(manifest["artifacts"]) == set(cli.ARTIFACTS)
    assert manifest["config"]["seed"] == 1 and "output_dir" not in manifest["config"]
    comp = json.loads((tmp_path / "all" / cli.COMPARISON).read_text())
    assert [r["approach"] for r in comp["rows"]] == ["classical", "full-quantum", "surrogate"]
    assert all({"approach", "accuracy", "auc"} <= set(r) for r in comp["rows"])


def test_compare_shares_split_and_counts_runs(tmp_path):
    cfg = load_config(small_config(tmp_path))
    comp = compare_pipelines(load_dataset(cfg.dataset_path, "label"), cfg)
    assert len({r.split_hash for r in comp.rows}) == 1
    assert comp.row("full-quantum").quantum_executions == 60
    assert comp.row("surrogate").quantum_executions == 10
    assert comp.row("classical").quantum_executions == 0


def test_full_subsample_with_interpolating_lambda(tmp_path):
    # M equal to the training set: surrogate and full quantum see the same features
    cfg_path = small_config(tmp_path, n_samples=100, subsample__size=80,
                            surrogate__cross_validate=False, surrogate__lambda=1e-10,
                            surrogate__degree=3)
    cfg = load_config(cfg_path)
    comp = compare_pipelines(load_dataset(cfg.dataset_path, "label"), cfg)
    gap = abs(comp.row("full-quantum").accuracy - comp.row("surrogate").accuracy)
    assert gap <= 0.02
    assert comp.row("full-quantum").accuracy >= comp.row("classical").accuracy


def test_demo_config_is_bundled():
    cfg = load_config(cli.demo_config_path())
    assert cfg.subsample_size == 100
    assert load_dataset(cfg.dataset_path, cfg.label_column).n_samples == 500
