import math
import warnings

import numpy as np
import pytest

from kwsphere.criteria import kw_kernels
from kwsphere.grid import FOUR_PI, ScalarField, build_grid, integrate
from kwsphere.gyre import GyreParams, to_elliptic
from kwsphere.harmonics import degree1_basis, inv_laplacian, laplacian, real_harmonic
from kwsphere.solver import (
    SolverConfig,
    constant_solution,
    constraint_tolerance,
    functional_J,
    gyre_solve,
    singular_shift,
    solve,
    u_sing,
)

from .conftest import random_bandlimited


def manufactured(u_star: ScalarField, C: float) -> ScalarField:
    """Curvature for which ``u_star`` solves ``lap(u) = C - h exp(u)``."""
    return (C - laplacian(u_star)) * ScalarField(u_star.grid, np.exp(-u_star.values))


def test_config_validation():
    for bad in (dict(tol=0), dict(damping=0), dict(damping=1.5), dict(max_iters=0),
                dict(initial_guess="random")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_manufactured_solution(grid64):
    u_star = 0.3 * degree1_basis(grid64)[1]
    sol = solve(manufactured(u_star, 1.0), 1.0)
    assert sol.converged, sol.message
    assert np.max(np.abs(sol.u.values - u_star.values)) < 1e-8
    assert sol.residual_maxnorm <= 1e-10
    assert abs(sol.constraint_residual) <= constraint_tolerance(1.0)


@pytest.mark.parametrize("C", [-1.5, 0.7, 2.6])
def test_manufactured_other_C(grid64, C):
    F = degree1_basis(grid64)
    u_star = 0.4 * F[0] - 0.3 * real_harmonic(grid64, 2, 1)
    sol = solve(manufactured(u_star, C), C)
    assert sol.converged, sol.message
    assert sol.iterations <= 15
    assert np.max(np.abs(sol.u.values - u_star.values)) < 1e-8


def test_C0_collapse_is_not_convergence(grid64):
    F = degree1_basis(grid64)
    u_star = 0.4 * F[0] - 0.3 * real_harmonic(grid64, 2, 1)
    h = manufactured(u_star, 0.0)
    # From a constant the linearized constraint only lowers the mean, and
    # u -> -inf satisfies the absolute residual test trivially.
    sol = solve(h, 0.0)
    assert not sol.converged and "collapsed" in sol.message
    sol = solve(h, 0.0, SolverConfig(initial_guess=0.1 * F[0]))
    assert sol.converged
    assert np.max(np.abs(sol.u.values - u_star.values)) < 1e-8


def test_exact_root_from_zero(grid16):
    h = ScalarField(grid16, np.full(grid16.shape, 1.3))
    sol = solve(h, 1.3, SolverConfig(initial_guess="zero"))
    assert sol.converged and sol.iterations <= 2
    assert np.max(np.abs(sol.u.values)) < 1e-12


def test_auto_guess_constant_case(grid16):
    h = ScalarField(grid16, np.full(grid16.shape, 2.0))
    sol = solve(h, 0.5)
    assert sol.converged
    assert np.allclose(sol.u.values, math.log(0.25), atol=1e-12)


def test_field_initial_guess(grid16):
    u_star = 0.2 * degree1_basis(grid16)[0]
    h = manufactured(u_star, 1.0)
    sol = solve(h, 1.0, SolverConfig(initial_guess=u_star))
    assert sol.converged and sol.iterations == 0
    with pytest.raises(ValueError):
        solve(h, 1.0, SolverConfig(initial_guess=build_grid(8, 16).field(np.zeros((8, 16)))))


def test_C2_obstruction_failure(grid64):
    C, h = to_elliptic(GyreParams(-1, 1, 2, 0.5), grid64)
    sol = solve(h, C)
    assert not sol.converged or np.linalg.norm(sol.kw_residuals) > 1e-3
    assert sol.message


def test_zero_h_rejected(grid16):
    with pytest.raises(ValueError):
        solve(ScalarField(grid16, np.zeros(grid16.shape)), 1.0)


def test_functional_J_examples(grid64):
    zero = ScalarField(grid64, np.zeros(grid64.shape))
    assert functional_J(zero, 1.7) == 0.0
    F1 = degree1_basis(grid64)[0]
    assert functional_J(F1, 0.0) == pytest.approx(4 * math.pi / 3, rel=1e-12)
    k = ScalarField(grid64, np.full(grid64.shape, -0.8))
    assert functional_J(k, 1.5) == pytest.approx(1.5 * -0.8 * FOUR_PI, rel=1e-14)


def test_constant_solution():
    assert constant_solution(GyreParams(-1, 1, 1, 0)) == 0.0
    psi = constant_solution(GyreParams(-2, 1, 1, 0))
    assert psi == pytest.approx(math.log(0.5))
    # Residual of lap(psi) = c exp(d psi) + g for a constant.
    assert -2 * math.exp(psi) + 1 == pytest.approx(0.0, abs=1e-15)
    assert constant_solution(GyreParams(1, 1, 1, 0)) is None
    assert constant_solution(GyreParams(-1, 2, 3, 0)) == pytest.approx(math.log(3) / 2)


@pytest.mark.parametrize("params", [(1, 1, -1, 0.5), (-1, 1, 1, 0.5), (-1, 1, 2.5, 0.1)])
def test_gyre_solve_exists_regions(grid64, params):
    gs = gyre_solve(GyreParams(*params), grid64)
    assert gs.converged, gs.elliptic.message
    assert gs.residual_maxnorm < 1e-8
    C = gs.params.C
    sol = gs.elliptic
    assert abs(sol.constraint_residual) <= 1e-6 * max(1.0, FOUR_PI * abs(C))
    assert np.linalg.norm(gs.kw_residuals) < 1e-6
    k = kw_kernels(to_elliptic(gs.params, grid64)[1], C)
    weight = integrate(ScalarField(grid64, np.exp(sol.u.values) * sum(np.abs(f.values) for f in k)))
    assert np.linalg.norm(gs.kw_residuals) <= 1e-6 * weight
    meta = gs.metadata()
    assert meta["converged"] and meta["psi_residual_maxnorm"] == gs.residual_maxnorm


@pytest.mark.parametrize("params", [(-1, 1, -1, 0.5), (1, 1, 1, 0.5), (-1, 1, 2, 0.5)])
def test_gyre_solve_no_solution_regions(grid64, params):
    gs = gyre_solve(GyreParams(*params), grid64)
    assert not gs.converged or np.linalg.norm(gs.kw_residuals) > 1e-3


def test_quadratic_convergence(grid64):
    F = degree1_basis(grid64)
    u_star = 0.8 * F[2] + 0.2 * real_harmonic(grid64, 2, -2)
    sol = solve(manufactured(u_star, 1.2), 1.2, SolverConfig(initial_guess="zero"))
    assert sol.converged
    r = sol.history
    pairs = [(a, b) for a, b in zip(r, r[1:]) if a < 1e-2 and b > 1e-12]
    assert pairs, r
    for a, b in pairs:
        assert b <= 50 * a * a, r


def test_determinism(grid64):
    C, h = to_elliptic(GyreParams(-1, 1, 1, 0.5), grid64)
    a, b = solve(h, C), solve(h, C)
    assert np.array_equal(a.u.values, b.u.values)
    assert a.history == b.history


def test_J_local_minimum(grid64, rng):
    C, h = to_elliptic(GyreParams(-1, 1, 1, 0.5), grid64)
    sol = solve(h, C)
    assert sol.converged and math.isfinite(sol.J_value)
    for _ in range(5):
        delta = random_bandlimited(grid64, 6, rng, zero_mean=True)
        delta = (1e-3 / np.max(np.abs(delta.values))) * delta
        v = sol.u + delta
        # Re-impose int h exp(v) = 4 pi C with a constant shift.
        s = math.log(FOUR_PI * C / integrate(h * ScalarField(grid64, np.exp(v.values))))
        assert functional_J(v + s, C) >= sol.J_value - 1e-8


def test_u_sing_laplacian_fd():
    hstep = 1e-4
    for C0 in (-1.0, 0.5, 2.0):
        for pole in ("south", "north"):
            for t in np.linspace(math.pi / 4, 3 * math.pi / 4, 5):
                u = lambda tt: u_sing(tt, C0, pole)
                d2 = (u(t + hstep) - 2 * u(t) + u(t - hstep)) / hstep**2
                d1 = (u(t + hstep) - u(t - hstep)) / (2 * hstep)
                assert d2 + d1 / math.tan(t) == pytest.approx(C0, abs=1e-6)


def test_u_sing_total_laplacian_symbolic():
    sympy = pytest.importorskip("sympy")
    t, C0 = sympy.symbols("theta C0", positive=True)
    u = -C0 * sympy.log(1 + sympy.cos(t))
    lap = sympy.simplify(sympy.diff(sympy.sin(t) * sympy.diff(u, t), t) / sympy.sin(t))
    assert sympy.simplify(lap - C0) == 0
    total = sympy.integrate(2 * sympy.pi * lap * sympy.sin(t), (t, 0, sympy.pi))
    assert sympy.simplify(total - 4 * sympy.pi * C0) == 0


def test_singular_shift(grid64):
    _, h = to_elliptic(GyreParams(-1, 1, 1.5, 0.4), grid64)
    C1, h1 = singular_shift(h, 1.5, 0.0)
    assert C1 == 1.5 and np.array_equal(h1.values, h.values)
    C1, h1 = singular_shift(h, 1.5, 0.5, "south")
    x = grid64.x[:, None]
    assert C1 == 1.0
    assert np.allclose(h1.values, h.values / np.sqrt(1 + x), rtol=1e-15)
    _, hn = singular_shift(h, 1.5, -1.0, "north")
    assert np.allclose(hn.values, h.values * (1 - x), rtol=1e-15)
    with pytest.warns(RuntimeWarning):
        singular_shift(h, 1.5, 20.0, "south")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        singular_shift(h, 1.5, 1.0, "south")
    with pytest.raises(ValueError):
        singular_shift(h, 1.5, 1.0, "east")


def test_shifted_problem_reproduces_singular_solution(grid64):
    # If v solves the shifted equation then v + u_sing solves the original
    # one away from the pole; check through the residual identity.
    C0 = -0.5
    _, h = to_elliptic(GyreParams(-1, 1, 1.0, 0.3), grid64)
    C1, h1 = singular_shift(h, 1.0, C0, "south")
    sol = solve(h1, C1)
    assert sol.converged
    us = u_sing(grid64.thetas, C0, "south")[:, None]
    # h exp(v + u_sing) = h1 exp(v) pointwise.
    lhs = h.values * np.exp(sol.u.values + us)
    assert np.allclose(lhs, h1.values * np.exp(sol.u.values), rtol=1e-13)


def test_inv_laplacian_preconditioner_consistency(grid16, rng):
    f = random_bandlimited(grid16, 10, rng, zero_mean=True)
    assert np.max(np.abs(laplacian(inv_laplacian(f)).values - f.values)) < 1e-11
