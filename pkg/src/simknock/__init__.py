"""Simultaneous knockoffs: FDR-controlled discovery of features that matter in every study."""
from importlib import resources

from .baselines import (
    Method,
    MethodResult,
    derive_seed,
    run_intersection,
    run_method,
    run_pooling,
    run_simultaneous,
)
from .combiners import CombinerSpec, FilterStats, combine
from .diagnostics import KlReport, kl_hat_gaussian, kl_report
from .errors import KnockoffError, NumericalError, ValidationError
from .filter import SelectionReport, knockoff_threshold, select
from .knockoffs import (
    Construction,
    DesignMatrix,
    GaussianModel,
    KnockoffCopy,
    construct,
    construct_fixed_x,
    construct_model_x_gaussian,
    construct_second_order,
    equicorrelated_s,
)
from .simulation import MCResult, Scenario, Setting, SimConfig, run_grid
from .stats import (
    Experiment,
    Family,
    LassoFit,
    ZStats,
    abs_coef_stats,
    lasso_fit,
    path_entry_stats,
)

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Filesystem path of a bundled data file such as ``fixture_study1.csv``."""
    return str(resources.files(__name__) / "data" / name)


__all__ = [
    "CombinerSpec", "Construction", "DesignMatrix", "Experiment", "Family", "FilterStats",
    "GaussianModel", "KlReport", "KnockoffCopy", "KnockoffError", "LassoFit", "MCResult",
    "Method", "MethodResult", "NumericalError", "Scenario", "SelectionReport", "Setting",
    "SimConfig", "ValidationError", "ZStats", "abs_coef_stats", "combine", "construct",
    "construct_fixed_x", "construct_model_x_gaussian", "construct_second_order", "data_path",
    "derive_seed", "equicorrelated_s", "kl_hat_gaussian", "kl_report", "knockoff_threshold",
    "lasso_fit", "path_entry_stats", "run_grid", "run_intersection", "run_method",
    "run_pooling", "run_simultaneous", "select",
]
