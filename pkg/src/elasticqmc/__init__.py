"""Higher-order QMC finite element solvers for parametric linear elasticity.

Subpackages and modules
-----------------------
mesh, coeff, fem
    Uniform triangulations, affine-parametric Lame fields and the P1/P2
    Galerkin discretisation.
qmc
    Polynomial arithmetic over Z_b, interlaced polynomial lattice rules and
    their component-by-component construction.
estimators
    Tensor, sparse-grid and direct QMC estimators with a deterministic
    parallel sweep.
experiments, cli
    Example presets, the reference cache and the command-line driver.
"""

__version__ = "0.1.0"
