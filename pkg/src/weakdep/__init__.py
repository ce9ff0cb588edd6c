"""Computational laboratory for weakly dependent partial sums.

Tools for building stationary causal processes (linear, Holder
functionals, the doubling map, matrix random walks), measuring their
physical dependence coefficients, long-run and partial-sum variances,
Kolmogorov distances to the normal, convergence-rate fits, and
conditional block decompositions.
"""

from .errors import (
    ConfigError,
    DegenerateVarianceError,
    InternalConsistencyError,
    LayoutError,
    ModelMismatchError,
    PreconditionError,
    WeakdepError,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "WeakdepError",
    "PreconditionError",
    "DegenerateVarianceError",
    "LayoutError",
    "ModelMismatchError",
    "InternalConsistencyError",
    "ConfigError",
]
