"""nhk: tools for Hamiltonizing nonholonomic mechanical systems with symmetry.

The package assembles the almost-Poisson brackets of reduced constrained
mechanics, tests and solves the reducing-multiplier conditions that turn
them into genuine Poisson brackets after a quasivelocity rescaling,
performs Routh reduction along conserved momenta, builds conditionally
variational Lagrangians, and numerically verifies that original and
Hamiltonized flows trace the same trajectories.
"""

__version__ = "0.1.0"
