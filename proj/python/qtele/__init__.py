"""Photonic quantum teleportation simulator."""

from ._qtele import (
    CalibrationError,
    ConfigError,
    LinkBudget,
    ValidationError,
    __version__,
    crossover_db,
    fidelity,
    find_fourfolds,
    fit,
    mle_state,
    predict,
    process_matrix,
    read_tags,
    run_cli,
    snr,
    state,
    teleport,
    trace_distance,
)

__all__ = [
    "CalibrationError",
    "ConfigError",
    "LinkBudget",
    "ValidationError",
    "__version__",
    "crossover_db",
    "fidelity",
    "find_fourfolds",
    "fit",
    "mle_state",
    "predict",
    "process_matrix",
    "read_tags",
    "run_cli",
    "snr",
    "state",
    "teleport",
    "trace_distance",
]
