"""Data ingestion, nested cross-validation, experiments, result files, and the CLI."""

from .cv import CvPlan, ExperimentResult, FoldError, contiguous_folds, derive_seed, nested_cv
from .experiments import (rerun_sensor_cell, run_cauchy_experiment, run_gm_demo,
                          run_sensor_experiment)
from .io import (Dataset, DataFormatError, load_model, load_series, read_roc_csv, save_model,
                 segment, write_roc_csv)

__all__ = [
    "CvPlan", "DataFormatError", "Dataset", "ExperimentResult", "FoldError", "contiguous_folds",
    "derive_seed", "load_model", "load_series", "nested_cv", "read_roc_csv", "rerun_sensor_cell",
    "run_cauchy_experiment", "run_gm_demo", "run_sensor_experiment", "save_model", "segment",
    "write_roc_csv",
]
