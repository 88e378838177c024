"""Numerical laboratory for directed polymers in random environment.

Submodules: walks (heat kernels, collision sums, escape probabilities),
disorder (families, seed-keyed fields, tilts), partition (transfer-matrix
partition functions), chaos (multilinear expansion, influences), moments
(second/fractional moments, thresholds, tail checks), scaling (intermediate
disorder, averaged fields), heavytail (phase diagram, order statistics,
variational solvers), hierarchy (diamond lattices and trees), harness + cli
(declarative seeded experiments).
"""

__version__ = "0.1.0"
