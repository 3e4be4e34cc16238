"""
hodg - discontinuous Galerkin solvers for high-order time-dependent PDEs

Modal Legendre DG schemes that rewrite u_t + d^n u = 0 (and its
nonlinear fourth- and odd-order variants, and the 2D biharmonic
equation) into a lower-order system with ultra-weak derivative blocks.
"""

__version__ = "1.0.0"
__author__ = "hodg Development Team"

from .core import StudyRunner, error_norms
from .models import ConvergenceTable, ProblemSpec, StudyConfig
from .problems import get_problem

__all__ = ["StudyRunner", "error_norms", "ConvergenceTable", "ProblemSpec",
           "StudyConfig", "get_problem"]
