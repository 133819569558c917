"""Existence criteria and spectral solvers for lap(u) = C - h exp(u) on S^2,
with the ocean-gyre model as the worked specialization."""

from .criteria import CriteriaReport, KernelTriple, Verdict, WField, classify, kw_kernels, kw_residuals, w_matrix
from .grid import ScalarField, SphericalGrid, build_grid, grad_dot, integrate, mean
from .gyre import GyreParams, GyreVerdict, RegionVerdict, corollary7_bound, gap_closed, kernels_closed, to_elliptic
from .harmonics import SpectralCoeffs, analyze, degree1_basis, inv_laplacian, laplacian, synthesize
from .solver import Solution, SolverConfig, functional_J, gyre_solve, solve

__version__ = "0.1.0"
