"""Spectral Newton solver for ``lap(u) = C - h exp(u)`` on S^2.

The unknown is stored as real harmonic coefficients up to degree ``L``.
Each Newton step solves the linearization ``lap(d) + q d = -R`` with
``q = h exp(u)`` after splitting ``d`` into its mean and a zero-mean part:
the mean is eliminated through the linearized integral constraint
``int q d = -int R`` and the zero-mean part is found by preconditioned
GMRES. Non-convergence is reported, never raised.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import criteria
from .grid import FOUR_PI, ScalarField, atomic_write_text, grad_dot, integrate, write_field
from .gyre import GyreParams, to_elliptic
from .harmonics import get_plan, laplacian

__all__ = [
    "SolverConfig",
    "Solution",
    "GyreSolution",
    "solve",
    "gyre_solve",
    "functional_J",
    "constant_solution",
    "u_sing",
    "singular_shift",
    "write_solution",
]

log = logging.getLogger(__name__)

# |u| beyond this means the iteration is leaving any solvable regime.
U_LIMIT = 40.0
_MIN_STEP = 1.0 / 1024
# A root with max|h exp(u)| this close to the tolerance is the trivial
# asymptote, not a solution.
COLLAPSE_FACTOR = 100.0


@dataclass(frozen=True)
class SolverConfig:
    """Newton solver settings.

    ``L=None`` uses the full bandwidth of the grid. ``initial_guess`` is
    ``"auto"`` (constraint-consistent constant when one exists, else 0),
    ``"zero"``, a float constant, or a :class:`ScalarField`.
    """

    L: int | None = None
    max_iters: int = 50
    tol: float = 1e-10
    damping: float = 1.0
    initial_guess: object = "auto"
    gmres_rtol: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        g = self.initial_guess
        if not (g in ("auto", "zero") if isinstance(g, str)
                else isinstance(g, (int, float, ScalarField))):
            raise ValueError(f"unsupported initial_guess {g!r}")


@dataclass
class Solution:
    u: ScalarField
    C: float
    residual_maxnorm: float
    kw_residuals: np.ndarray
    constraint_residual: float
    J_value: float
    iterations: int
    converged: bool
    message: str = ""
    history: list[float] = field(default_factory=list)

    def metadata(self) -> dict:
        return {
            "C": self.C,
            "residual_maxnorm": self.residual_maxnorm,
            "kw_residuals": [float(r) for r in self.kw_residuals],
            "constraint_residual": self.constraint_residual,
            "J_value": self.J_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
        }


def functional_J(u: ScalarField, C: float) -> float:
    """``int (|grad u|^2 / 2 + C u)`` over the sphere."""
    return integrate(0.5 * grad_dot(u, u) + C * u)


def constraint_tolerance(C: float) -> float:
    return 1e-6 * max(1.0, FOUR_PI * abs(C))


class _Newton:
    """Coefficient-space bookkeeping for one solve."""

    def __init__(self, h: ScalarField, C: float, L: int):
        self.h = h
        self.C = C
        self.grid = h.grid
        self.plan = get_plan(h.grid, L)
        self.L = L
        self.l_idx, self.m_idx = np.tril_indices(L + 1)
        self.eig = -(self.l_idx * (self.l_idx + 1.0))
        # Flat layout: cosine entries for m >= 0, then sine entries for m > 0.
        self.sin_mask = self.m_idx > 0
        self.flat_eig = np.concatenate([self.eig, self.eig[self.sin_mask]])
        self.n = self.flat_eig.size

    def flatten(self, A, B):
        return np.concatenate([A[self.l_idx, self.m_idx],
                               B[self.l_idx[self.sin_mask], self.m_idx[self.sin_mask]]])

    def unflatten(self, x):
        A = np.zeros((self.L + 1, self.L + 1))
        B = np.zeros_like(A)
        k = self.l_idx.size
        A[self.l_idx, self.m_idx] = x[:k]
        B[self.l_idx[self.sin_mask], self.m_idx[self.sin_mask]] = x[k:]
        return A, B

    def synth(self, x):
        return self.plan.synthesize(*self.unflatten(x))

    def lap(self, x):
        return self.synth(self.flat_eig * x)

    def analyze(self, values):
        return self.flatten(*self.plan.analyze(values))

    def integrate(self, values):
        return integrate(ScalarField(self.grid, values))

    def residual(self, x):
        u = self.synth(x)
        umax = float(np.max(np.abs(u)))
        if umax > U_LIMIT:
            return u, None, umax
        return u, self.lap(x) - self.C + self.h.values * np.exp(u), umax

    def newton_step(self, u, R, rtol):
        """Solve ``lap(d) + q d = -R`` (degree <= L part); return ``(d, ok)``."""
        q = self.h.values * np.exp(u)
        Q = self.integrate(q)
        qbar = Q / FOUR_PI
        diag = self.flat_eig + qbar
        small = np.abs(diag) < 0.1 * np.maximum(1.0, -self.flat_eig)
        diag = np.where(small, np.where(self.flat_eig == 0, 1.0, self.flat_eig), diag)
        split = abs(Q) > 1e-8 * self.integrate(np.abs(q))
        if split:
            # Zero-mean unknowns only; the mean follows from the constraint row.
            keep = self.flat_eig != 0
            intR = self.integrate(R)

            def embed(y):
                x = np.zeros(self.n)
                x[keep] = y
                return x

            def matvec(y):
                x = embed(y)
                v = self.synth(x)
                qv = q * v
                r = self.lap(x) + qv - q * (self.integrate(qv) / Q)
                return self.analyze(r)[keep]

            rhs = -self.analyze(R - q * (intR / Q))[keep]
            pre = diag[keep]
        else:
            keep = np.ones(self.n, dtype=bool)

            def embed(y):
                return y

            def matvec(y):
                return self.analyze(self.lap(y) + q * self.synth(y))

            rhs = -self.analyze(R)
            pre = diag

        m = int(keep.sum())
        op = LinearOperator((m, m), matvec=matvec, dtype=float)
        prec = LinearOperator((m, m), matvec=lambda y: y / pre, dtype=float)
        y, info = gmres(op, rhs, rtol=rtol, atol=0.0, restart=min(m, 120),
                        maxiter=20, M=prec)
        rel = np.linalg.norm(matvec(y) - rhs) / max(np.linalg.norm(rhs), 1e-300)
        x = embed(y)
        if split:
            v = self.synth(x)
            dbar = -(intR + self.integrate(q * v)) / Q
            x[0] = dbar * math.sqrt(FOUR_PI)  # Y_00 = 1/sqrt(4 pi)
        ok = np.all(np.isfinite(x)) and rel < 1e-6
        return x, ok, info, rel


def _initial_coeffs(nt: _Newton, h: ScalarField, C: float, guess) -> np.ndarray:
    if isinstance(guess, ScalarField):
        if guess.grid != h.grid:
            raise ValueError("initial guess lives on a different grid")
        return nt.analyze(guess.values)
    x = np.zeros(nt.n)
    if isinstance(guess, str):
        if guess == "zero":
            return x
        H = integrate(h)
        if C != 0 and C * H > 0:
            x[0] = math.log(FOUR_PI * C / H) * math.sqrt(FOUR_PI)
        return x
    x[0] = float(guess) * math.sqrt(FOUR_PI)
    return x


def solve(h: ScalarField, C: float, cfg: SolverConfig | None = None) -> Solution:
    """Newton iteration for ``lap(u) = C - h exp(u)``.

    Returns a :class:`Solution` in every case; ``converged`` is true only
    when the max-norm residual is below ``cfg.tol`` and the integral
    constraint ``int h exp(u) = 4 pi C`` holds to 1e-6 relative.
    """
    cfg = cfg or SolverConfig()
    C = float(C)
    if not np.any(h.values != 0):
        raise ValueError("h must not vanish identically")
    L = h.grid.lmax if cfg.L is None else cfg.L
    nt = _Newton(h, C, L)
    x = _initial_coeffs(nt, h, C, cfg.initial_guess)
    u, R, umax = nt.residual(x)
    history = []
    message = ""
    it = 0
    if R is None:
        return _finish(nt, u, None, it, False, f"initial guess has |u|={umax:.3g} > {U_LIMIT}", history)

    while True:
        rmax = float(np.max(np.abs(R)))
        history.append(rmax)
        he = h.values * np.exp(u)
        constraint = nt.integrate(he) - FOUR_PI * C
        if rmax <= cfg.tol and abs(constraint) <= constraint_tolerance(C):
            if np.max(np.abs(he)) <= COLLAPSE_FACTOR * cfg.tol:
                # u -> -inf satisfies the residual test trivially when C = 0.
                message = (f"iteration {it}: h exp(u) collapsed below "
                           f"{COLLAPSE_FACTOR * cfg.tol:.1e}; spurious root at u = -inf")
                break
            return _finish(nt, u, R, it, True, "converged", history)
        if it >= cfg.max_iters:
            message = f"no convergence after {it} iterations (residual {rmax:.3e})"
            break
        it += 1
        dx, ok, info, rel = nt.newton_step(u, R, cfg.gmres_rtol)
        step = cfg.damping if ok else 0.5 * cfg.damping
        r2 = math.sqrt(nt.integrate(R * R))
        accepted = False
        blew_up = False
        while step >= _MIN_STEP:
            x_try = x + step * dx
            u_try, R_try, umax = nt.residual(x_try)
            if R_try is None:
                blew_up = True
            elif math.sqrt(nt.integrate(R_try * R_try)) < (1 - 1e-4 * step) * r2:
                accepted = True
                break
            step *= 0.5
        log.debug("iter %d: residual %.3e, gmres info %d rel %.1e, step %.4g",
                  it, rmax, info, rel, step)
        if not accepted:
            if blew_up:
                message = f"iteration {it}: |u| exceeded {U_LIMIT}; aborted"
            else:
                message = f"iteration {it}: line search failed (residual {rmax:.3e})"
            break
        x, u, R = x_try, u_try, R_try

    return _finish(nt, u, R, it, False, message, history)


def _finish(nt, u_vals, R, iterations, converged, message, history) -> Solution:
    h, C = nt.h, nt.C
    u = ScalarField(nt.grid, u_vals)
    rmax = float(np.max(np.abs(R))) if R is not None else math.inf
    constraint = nt.integrate(h.values * np.exp(u_vals)) - FOUR_PI * C
    return Solution(
        u=u,
        C=C,
        residual_maxnorm=rmax,
        kw_residuals=criteria.kw_residuals(u, h, C),
        constraint_residual=float(constraint),
        J_value=functional_J(u, C),
        iterations=iterations,
        converged=converged,
        message=message,
        history=history,
    )


def write_solution(sol: Solution, path) -> None:
    """Write ``u`` as a field file and its metadata to ``<path>.json``."""
    write_field(sol.u, path)
    atomic_write_text(f"{path}.json", json.dumps(sol.metadata(), indent=2) + "\n")


def constant_solution(p: GyreParams) -> float | None:
    """Constant solution ``ln(-g/c)/d`` of the non-rotating model, if any."""
    if p.g / p.c >= 0:
        return None
    return math.log(-p.g / p.c) / p.d


@dataclass
class GyreSolution:
    """Gyre solve result; ``psi`` is the stream function, ``elliptic`` the ``u`` solve."""

    params: GyreParams
    psi: ScalarField
    residual_maxnorm: float
    elliptic: Solution

    @property
    def converged(self) -> bool:
        return self.elliptic.converged

    @property
    def kw_residuals(self) -> np.ndarray:
        return self.elliptic.kw_residuals

    def metadata(self) -> dict:
        p = self.params
        meta = self.elliptic.metadata()
        meta.update({
            "c": p.c, "d": p.d, "g": p.g, "omega": p.omega,
            "psi_residual_maxnorm": self.residual_maxnorm,
        })
        return meta


def gyre_solve(p: GyreParams, grid, cfg: SolverConfig | None = None) -> GyreSolution:
    """Solve ``lap(psi) - 2 w cos t = c exp(d psi) + g`` through the elliptic form."""
    C, h = to_elliptic(p, grid)
    sol = solve(h, C, cfg)
    F1 = grid.x[:, None]
    psi = ScalarField(grid, sol.u.values / p.d - p.omega * F1)
    with np.errstate(over="ignore"):
        res = (laplacian(psi).values - 2 * p.omega * F1
               - p.c * np.exp(p.d * psi.values) - p.g)
    rmax = float(np.max(np.abs(res))) if np.all(np.isfinite(res)) else math.inf
    return GyreSolution(p, psi, rmax, sol)


# -- integrable point singularities ------------------------------------------

def _pole_sign(pole: str) -> int:
    # u_sing = -C0 ln(1 + cos t) blows up at the south pole, ln(1 - cos t) at the north.
    if pole == "south":
        return 1
    if pole == "north":
        return -1
    raise ValueError(f"pole must be 'north' or 'south', got {pole!r}")


def u_sing(theta, C0: float, pole: str = "south"):
    """Logarithmic point singularity with ``lap(u_sing) = C0`` off the pole."""
    return -C0 * np.log1p(_pole_sign(pole) * np.cos(theta))


def singular_shift(h: ScalarField, C: float, C0: float, pole: str = "south"):
    """Absorb a point singularity into ``(C, h)``.

    Returns ``(C - C0, h / (1 +- cos t)**C0)``. Positive ``C0`` makes the
    new curvature singular at the pole, negative ``C0`` makes it vanish
    there.
    """
    s = _pole_sign(pole)
    base = 1.0 + s * h.grid.x[:, None]
    h_new = ScalarField(h.grid, h.values / base**C0)
    big = float(np.max(np.abs(h_new.values)))
    if big > 1e12:
        warnings.warn(f"shifted curvature reaches {big:.3g} near the {pole} pole",
                      RuntimeWarning, stacklevel=2)
    return C - C0, h_new
