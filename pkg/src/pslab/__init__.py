"""Numerical laboratory for boundary-driven semiclassical pseudospectra.

Subpackages map one-to-one onto the pipeline: geometry (domains, boundary
classification), hull (relative convex hulls), wkb (boundary quasimode
construction), operators (finite-difference discretization), spectral
(sigma_min scans, eigenvalues, pseudomode localization), sde (first-exit
Monte Carlo), evolution (semilinear blow-up runs), cli (experiment runner).
"""

__version__ = "0.1.0"
