"""Finite-window numerics for commutator equations, similarity and nearness.

Submodules:

* :mod:`commlab.linalg` -- operator norms, spectral radius, guarded solves
* :mod:`commlab.operators` -- truncated shifts, block operators, power profiles
* :mod:`commlab.sylvester` -- ``X = TZ - ZV`` solvers, growth tests, certificates
* :mod:`commlab.perturbation` -- zero-product perturbations and polynomial bounds
* :mod:`commlab.nearness` -- weighted quadratic nearness and the renormed form
* :mod:`commlab.car` -- CAR generators and Foguel-Hankel operators
* :mod:`commlab.specdoc`, :mod:`commlab.runner`, :mod:`commlab.cli` -- batch front end
"""

from .linalg import DEFAULT_TOL, ToleranceConfig, operator_norm, spectral_radius
from .operators import (
    BetaSequence,
    BlockUpper,
    WindowedOperator,
    assemble_R,
    finite,
    power_profile,
    truncated_shift,
    weighted_shift,
)
from .sylvester import certify_similarity, partial_sum_solution, solve_sylvester_direct

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "ToleranceConfig",
    "operator_norm",
    "spectral_radius",
    "BetaSequence",
    "BlockUpper",
    "WindowedOperator",
    "assemble_R",
    "finite",
    "power_profile",
    "truncated_shift",
    "weighted_shift",
    "certify_similarity",
    "partial_sum_solution",
    "solve_sylvester_direct",
]
