"""Optimal control of semilinear parabolic equations with pointwise state bounds.

Finite-difference discretisation, exact discrete adjoints, a Moreau-Yosida
penalty path, and numerical probes of first- and second-order optimality.
"""

from .grid import SpaceTimeGrid, SpatialGrid, TimeGrid, inner_product_Q, lp_norm
from .problem import (Bilateral, CubicOdd, ExpWeighted, LinearRate, ProblemSpec, QuadraticCost,
                      UpperOnly, Zero, ZeroCost, validate)

__all__ = [
    "Bilateral", "CubicOdd", "ExpWeighted", "LinearRate", "ProblemSpec", "QuadraticCost",
    "SpaceTimeGrid", "SpatialGrid", "TimeGrid", "UpperOnly", "Zero", "ZeroCost",
    "inner_product_Q", "lp_norm", "validate",
]
__version__ = "0.1.0"
