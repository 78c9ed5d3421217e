"""Quantum feature surrogates.

Simulate a digitized counterdiabatic quantum feature map on a representative
subsample, distil it into a closed-form Ridge surrogate and replay that
surrogate classically over the whole dataset.
"""

__version__ = "0.1.0"

from .dataset import Dataset, SplitSpec, load_dataset, make_parity_dataset, normalize, split
from .downstream import evaluate, train_classifier
from .hamiltonian import (
    CouplingGraph,
    Schedule,
    build_hamiltonian,
    build_topology,
    enumerate_subsets,
    estimate_coefficients,
)
from .pipeline import PipelineConfig, compare_pipelines
from .qsim import (
    FeatureLayout,
    QuantumConfig,
    evolve,
    extract_batch,
    extract_features,
    ground_state_fidelity,
)
from .subsample import SubsampleSpec, select_subsample
from .surrogate import (
    LiftSpec,
    coverage_flag,
    fit_ridge,
    fit_ridge_cv,
    load_model,
    predict,
    save_model,
)

__all__ = [
    "CouplingGraph",
    "Dataset",
    "FeatureLayout",
    "LiftSpec",
    "PipelineConfig",
    "QuantumConfig",
    "Schedule",
    "SplitSpec",
    "SubsampleSpec",
    "build_hamiltonian",
    "build_topology",
    "compare_pipelines",
    "coverage_flag",
    "enumerate_subsets",
    "estimate_coefficients",
    "evaluate",
    "evolve",
    "extract_batch",
    "extract_features",
    "fit_ridge",
    "fit_ridge_cv",
    "ground_state_fidelity",
    "load_dataset",
    "load_model",
    "make_parity_dataset",
    "normalize",
    "predict",
    "save_model",
    "select_subsample",
    "split",
    "train_classifier",
]
