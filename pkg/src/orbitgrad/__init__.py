"""Gradient-based constellation design toolkit.

Smooth, differentiable stand-ins for coverage and revisit metrics are
composed with a two-body propagator so orbital elements can be optimized
with first-order methods; simulated annealing, genetic and differential
evolution baselines run against the same problems.
"""

from orbitgrad.constants import MU_EARTH, OMEGA_EARTH, R_EARTH

__version__ = "0.1.0"

__all__ = ["MU_EARTH", "OMEGA_EARTH", "R_EARTH", "__version__"]
