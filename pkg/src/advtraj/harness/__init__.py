"""Data generation, detection-dataset construction, and experiments."""

from .bundle import DetectionBundle, build_bundle
from .data import (
    Dataset,
    SyntheticSpec,
    gen_synthetic,
    load_idx,
    read_dataset_csv,
    write_dataset_csv,
)
from .experiments import (
    DetectorSettings,
    ExperimentReport,
    run_ood,
    run_seen,
    run_unseen,
)

__all__ = [
    "Dataset",
    "DetectionBundle",
    "DetectorSettings",
    "ExperimentReport",
    "SyntheticSpec",
    "build_bundle",
    "gen_synthetic",
    "load_idx",
    "read_dataset_csv",
    "run_ood",
    "run_seen",
    "run_unseen",
    "write_dataset_csv",
]
