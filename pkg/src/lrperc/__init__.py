"""Long-range bond percolation on Z^d: kernels, counter-based marks, the
coupled exploration process, exact enumeration, and Monte Carlo estimators."""

__version__ = "0.1.0"

from .errors import (
    BracketingError,
    FitError,
    InternalConsistencyError,
    KernelError,
    PercolationError,
    SizeError,
    ValidationError,
)
from .lattice import (
    Ball,
    DifferenceSet,
    Kernel,
    PolynomialPhiKernel,
    ScaledKernel,
    SpaceTimeBox,
    TableKernel,
    delta_of,
    nearest_neighbour,
    override,
)
from .marks import GENERATOR_VERSION, MarkField
from .exploration import AssertLevel, Termination, run as explore
from .coupling import check_containment, compute_q, realize_coupled
from .oracle import bfs_cluster, enumerate_exact, exact_domination_check
from .montecarlo import estimate_decay, estimate_susceptibility, estimate_theta

__all__ = [
    "AssertLevel", "Ball", "BracketingError", "DifferenceSet", "FitError", "GENERATOR_VERSION",
    "InternalConsistencyError", "Kernel", "KernelError", "MarkField", "PercolationError",
    "PolynomialPhiKernel", "ScaledKernel", "SizeError", "SpaceTimeBox", "TableKernel",
    "Termination", "ValidationError", "bfs_cluster", "check_containment", "compute_q",
    "delta_of", "enumerate_exact", "estimate_decay", "estimate_susceptibility",
    "estimate_theta", "exact_domination_check", "explore", "nearest_neighbour", "override",
    "realize_coupled",
]
