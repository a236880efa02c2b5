"""Scale-invariant ergodic coverage planning (C++ core)."""

from ._core import (
    DynamicsModel,
    SolverConfig,
    SolverReport,
    __version__,
    anneal_sequence,
    compute_extent,
    coverage,
    emmd,
    load_samples,
    log_emmd,
    normalize,
    plan,
    tsp_nearest_neighbor,
)

__all__ = [
    "DynamicsModel",
    "SolverConfig",
    "SolverReport",
    "__version__",
    "anneal_sequence",
    "compute_extent",
    "coverage",
    "emmd",
    "load_samples",
    "log_emmd",
    "normalize",
    "plan",
    "tsp_nearest_neighbor",
]
