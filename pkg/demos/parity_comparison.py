"""
Classical, full-quantum and surrogate pipelines
===============================================

Labels of the bundled dataset are the product of two input signs, which a
linear model on raw inputs cannot represent. The two-body feature Z0*Z1
exposes it directly.
"""

from qfsurrogate.cli import demo_config_path
from qfsurrogate.dataset import load_dataset
from qfsurrogate.pipeline import compare_pipelines, load_config

cfg = load_config(demo_config_path())
ds = load_dataset(cfg.dataset_path, cfg.label_column)
print(f"{ds.n_samples} rows, {ds.n_features} inputs, classes {ds.class_counts()}")

comparison = compare_pipelines(ds, cfg)
print(comparison.to_text())
