"""Edge-preserving Tikhonov reconstruction with AMG-preconditioned FGMRES."""

from . import amg, driver, export, krylov, lcurve, operators, problems, sparse
from .driver import RunConfig, run
from .problems import make_problem
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = [
    "amg",
    "driver",
    "export",
    "krylov",
    "lcurve",
    "operators",
    "problems",
    "sparse",
    "RunConfig",
    "run",
    "make_problem",
    "SparseMatrix",
]
