"""Python bindings for the blowup library."""

import json

from ._blowup import (
    BudgetError,
    DomainError,
    Error,
    IoError,
    NumericError,
    StructuralError,
    ValidationError,
    compute_A,
    compute_B,
    critical_lambda,
    eval_kernel,
    eval_U,
    find_blowup_point,
    moment,
    moments,
    sphere_area,
)
from ._blowup import run as _run

__all__ = [
    "BudgetError",
    "DomainError",
    "Error",
    "IoError",
    "NumericError",
    "StructuralError",
    "ValidationError",
    "compute_A",
    "compute_B",
    "critical_lambda",
    "eval_kernel",
    "eval_U",
    "find_blowup_point",
    "moment",
    "moments",
    "run",
    "sphere_area",
]


def run(command, **config):
    """Run a CLI subcommand in-process; keyword arguments are config fields."""
    return _run(command, json.dumps(config))
