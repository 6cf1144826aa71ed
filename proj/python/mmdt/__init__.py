from ._core import (
    BudgetError,
    ConfigError,
    DataError,
    Dataset,
    DimensionError,
    Domain,
    Error,
    FitResult,
    FormatError,
    Loss,
    LowRankTransform,
    Model,
    Regularizer,
    SolverConfig,
    SolverError,
    fit,
    joint_objective,
    load_dataset,
    solve_transform,
    synthetic_pair,
    train_one_vs_all,
    transfer_new_category,
    transform_dual_objective,
)

__all__ = [
    "BudgetError",
    "ConfigError",
    "DataError",
    "Dataset",
    "DimensionError",
    "Domain",
    "Error",
    "FitResult",
    "FormatError",
    "Loss",
    "LowRankTransform",
    "Model",
    "Regularizer",
    "SolverConfig",
    "SolverError",
    "fit",
    "joint_objective",
    "load_dataset",
    "solve_transform",
    "synthetic_pair",
    "train_one_vs_all",
    "transfer_new_category",
    "transform_dual_objective",
]
