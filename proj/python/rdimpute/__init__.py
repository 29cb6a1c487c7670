"""Multiple imputation for clinical trials with administrative study withdrawals."""

from ._core import (
    ConfigError,
    GenParams,
    ImputationError,
    IngestError,
    SubjectRecord,
    SurvivalError,
    TrialDataset,
    ValidationError,
    __version__,
    analyze,
    conditional_disc_probability,
    generate_trial,
    generate_truth,
    load_dataset,
    pool_rubin,
    preset_params,
    read_dataset_csv,
    simulate,
)

__all__ = [
    "ConfigError",
    "GenParams",
    "ImputationError",
    "IngestError",
    "SubjectRecord",
    "SurvivalError",
    "TrialDataset",
    "ValidationError",
    "__version__",
    "analyze",
    "conditional_disc_probability",
    "generate_trial",
    "generate_truth",
    "load_dataset",
    "pool_rubin",
    "preset_params",
    "read_dataset_csv",
    "simulate",
]
