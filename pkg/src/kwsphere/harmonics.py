"""Real spherical-harmonic transforms on Gauss-Legendre grids.

Convention: orthonormal real harmonics without the Condon-Shortley phase,

    Y_l0      = P_l0(cos t)
    Y_l,+m    = sqrt(2) P_lm(cos t) cos(m p)
    Y_l,-m    = sqrt(2) P_lm(cos t) sin(m p)

where ``P_lm`` are the associated Legendre functions normalized so that
each ``Y`` has unit L2 norm on the sphere. Transforms are direct (no fast
Legendre transform); O(L^3) is fine at L <= 64.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, SphericalGrid, atomic_write_text, mean

__all__ = [
    "SpectralCoeffs",
    "TransformPlan",
    "get_plan",
    "legendre_table",
    "analyze",
    "synthesize",
    "laplacian",
    "inv_laplacian",
    "gradient",
    "degree1_basis",
    "real_harmonic",
    "pole_values",
    "write_coeffs",
    "read_coeffs",
]


def legendre_table(L: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized associated Legendre functions and their theta-derivatives.

    Parameters
    ----------
    L : int
        Maximum degree.
    x : ndarray
        Points ``cos(theta)`` strictly inside (-1, 1).

    Returns
    -------
    P, dP : ndarray, shape (L+1, L+1, len(x))
        ``P[m, l]`` is the normalized function of degree ``l`` and order
        ``m`` (zero for ``l < m``); ``dP[m, l]`` is its derivative with
        respect to theta.
    """
    # Extended precision keeps high-degree values accurate near the poles;
    # the float64 recurrence loses ~1e-13 there.
    ld = np.longdouble
    x = np.asarray(x, dtype=ld)
    s = np.sqrt((1 - x) * (1 + x))
    n = x.size
    P = np.zeros((L + 1, L + 1, n), dtype=ld)
    dP = np.zeros_like(P)
    pmm = np.full(n, 1 / np.sqrt(4 * np.pi * ld(1)))
    for m in range(L + 1):
        if m > 0:
            pmm = np.sqrt(ld(2 * m + 1) / (2 * m)) * s * pmm
        P[m, m] = pmm
        if m + 1 <= L:
            P[m, m + 1] = np.sqrt(ld(2 * m + 3)) * x * pmm
        for l in range(m + 2, L + 1):
            a = np.sqrt(ld(4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(ld((2 * l + 1) * ((l - 1) ** 2 - m * m))
                        / ((2 * l - 3) * (l * l - m * m)))
            P[m, l] = a * x * P[m, l - 1] - b * P[m, l - 2]
        # (1 - x^2) d/dx P_l = -l x P_l + (l + m) P_{l-1}, renormalized.
        for l in range(m, L + 1):
            term = l * x * P[m, l]
            if l > m:
                term = term - np.sqrt(ld((2 * l + 1) * (l * l - m * m))
                                      / (2 * l - 1)) * P[m, l - 1]
            dP[m, l] = term / s
    P, dP = P.astype(float), dP.astype(float)
    return P, dP


class TransformPlan:
    """Precomputed tables for degree-``L`` transforms on one grid."""

    def __init__(self, grid: SphericalGrid, L: int):
        if L < 0 or L > grid.lmax:
            raise ValueError(
                f"degree L={L} not supported on {grid!r} (max {grid.lmax})")
        self.grid = grid
        self.L = L
        P, dP = legendre_table(L, grid.x)
        m = np.arange(L + 1)
        scale = np.where(m == 0, 1.0, math.sqrt(2.0))
        # Fold the sqrt(2) of the real basis into the tables.
        self.P = P * scale[:, None, None]
        self.dP = dP * scale[:, None, None]
        self.mP_over_s = self.P * (m[:, None, None] / grid.sin_theta)
        mphi = np.outer(m, grid.phis)
        self.cos = np.cos(mphi)
        self.sin = np.sin(mphi)
        self.wP = self.P * grid.lat_weights * (2.0 * np.pi / grid.nlon)
        self.ell = np.arange(L + 1)
        for arr in (self.P, self.dP, self.mP_over_s, self.cos, self.sin,
                    self.wP):
            arr.setflags(write=False)

    def analyze(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ring_c = values @ self.cos.T
        ring_s = values @ self.sin.T
        A = np.einsum("mlj,jm->lm", self.wP, ring_c)
        B = np.einsum("mlj,jm->lm", self.wP, ring_s)
        B[:, 0] = 0.0
        return A, B

    def _synth(self, table, A, B, odd=False):
        Gc = np.einsum("mlj,lm->jm", table, A)
        Gs = np.einsum("mlj,lm->jm", table, B)
        if odd:
            return Gs @ self.cos - Gc @ self.sin
        return Gc @ self.cos + Gs @ self.sin

    def synthesize(self, A, B) -> np.ndarray:
        return self._synth(self.P, A, B)

    def gradient(self, A, B) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(d/dtheta, (1/sin theta) d/dphi)`` on the grid."""
        return self._synth(self.dP, A, B), self._synth(self.mP_over_s, A, B, odd=True)


@functools.lru_cache(maxsize=32)
def get_plan(grid: SphericalGrid, L: int) -> TransformPlan:
    return TransformPlan(grid, L)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Real harmonic coefficients up to degree ``L``.

    ``coeffs`` is flat of length ``(L+1)**2`` with ``(l, m)`` stored at
    ``l*l + l + m``; negative ``m`` are the sine terms.
    """

    L: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size != (self.L + 1) ** 2:
            raise ValueError(f"expected {(self.L + 1) ** 2} coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @staticmethod
    def index(l: int, m: int) -> int:
        if abs(m) > l:
            raise IndexError(f"|m| > l for (l, m) = ({l}, {m})")
        return l * l + l + m

    def __getitem__(self, lm):
        l, m = lm
        return float(self.coeffs[self.index(l, m)])

    @classmethod
    def zeros(cls, L: int) -> "SpectralCoeffs":
        return cls(L, np.zeros((L + 1) ** 2))

    @classmethod
    def from_arrays(cls, A: np.ndarray, B: np.ndarray) -> "SpectralCoeffs":
        L = A.shape[0] - 1
        l, m = np.tril_indices(L + 1)
        c = np.zeros((L + 1) ** 2)
        c[l * l + l + m] = A[l, m]
        pos = m > 0
        c[l[pos] * l[pos] + l[pos] - m[pos]] = B[l[pos], m[pos]]
        return cls(L, c)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.L
        A = np.zeros((L + 1, L + 1))
        B = np.zeros((L + 1, L + 1))
        l, m = np.tril_indices(L + 1)
        A[l, m] = self.coeffs[l * l + l + m]
        pos = m > 0
        B[l[pos], m[pos]] = self.coeffs[l[pos] * l[pos] + l[pos] - m[pos]]
        return A, B

    def degrees(self) -> np.ndarray:
        """Degree ``l`` of every flat entry."""
        return np.floor(np.sqrt(np.arange(self.coeffs.size))).astype(int)


def analyze(f: ScalarField, L: int | None = None) -> SpectralCoeffs:
    """Project ``f`` onto harmonics of degree <= ``L`` using grid quadrature."""
    L = f.grid.lmax if L is None else L
    plan = get_plan(f.grid, L)
    return SpectralCoeffs.from_arrays(*plan.analyze(f.values))


def synthesize(c: SpectralCoeffs, grid: SphericalGrid) -> ScalarField:
    plan = get_plan(grid, c.L)
    return ScalarField(grid, plan.synthesize(*c.to_arrays()))


def _scaled(f: ScalarField, factor_of_l, L=None) -> ScalarField:
    plan = get_plan(f.grid, f.grid.lmax if L is None else L)
    A, B = plan.analyze(f.values)
    fac = factor_of_l(plan.ell)[:, None]
    return ScalarField(f.grid, plan.synthesize(A * fac, B * fac))


def laplacian(f: ScalarField, L: int | None = None) -> ScalarField:
    """Surface Laplacian: coefficient of degree l scaled by -l(l+1).

    ``L`` defaults to the grid's full bandwidth. Rounding noise in the
    top degrees is amplified by ``L**2``, so pass a smaller ``L`` when the
    input is known to be band-limited well below it.
    """
    return _scaled(f, lambda l: -l * (l + 1.0), L)


def inv_laplacian(f: ScalarField, L: int | None = None) -> ScalarField:
    """Zero-mean solution ``g`` of ``laplacian(g) = f``.

    Raises ``ValueError`` if ``f`` has a mean above 1e-10 (relative to
    ``max(1, max|f|)``), since such an ``f`` is not in the range.
    """
    scale = max(1.0, float(np.max(np.abs(f.values))))
    if abs(mean(f)) > 1e-10 * scale:
        raise ValueError(f"inv_laplacian needs a zero-mean field, mean={mean(f):.3e}")

    def inv(l):
        out = np.zeros(l.shape)
        out[1:] = -1.0 / (l[1:] * (l[1:] + 1.0))
        return out

    return _scaled(f, inv, L)


def gradient(f: ScalarField, L: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Spectral ``(d f/d theta, (1/sin theta) d f/d phi)`` at the nodes."""
    L = f.grid.lmax if L is None else L
    plan = get_plan(f.grid, L)
    return plan.gradient(*plan.analyze(f.values))


def pole_values(f: ScalarField, L: int | None = None) -> tuple[float, float]:
    """Values of the band-limited interpolant of ``f`` at the two poles.

    The grid never samples the poles; only zonal (``m = 0``) harmonics are
    nonzero there, with ``Y_l0 = sqrt((2l+1)/(4 pi))`` at the north pole and
    ``(-1)**l`` times that at the south pole.
    """
    L = f.grid.lmax if L is None else L
    A, _ = get_plan(f.grid, L).analyze(f.values)
    l = np.arange(L + 1)
    y = np.sqrt((2 * l + 1) / (4 * np.pi))
    zonal = A[:, 0]
    return float(np.dot(zonal, y)), float(np.dot(zonal, y * (-1.0) ** l))


def degree1_basis(grid: SphericalGrid) -> tuple[ScalarField, ScalarField, ScalarField]:
    """``cos t``, ``sin t cos p``, ``sin t sin p`` sampled on ``grid``."""
    s = grid.sin_theta[:, None]
    F1 = ScalarField(grid, np.broadcast_to(grid.x[:, None], grid.shape))
    F2 = ScalarField(grid, s * np.cos(grid.phis)[None, :])
    F3 = ScalarField(grid, s * np.sin(grid.phis)[None, :])
    return F1, F2, F3


def real_harmonic(grid: SphericalGrid, l: int, m: int) -> ScalarField:
    """Orthonormal real harmonic ``Y_lm`` (sine type for ``m < 0``)."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid harmonic indices (l, m) = ({l}, {m})")
    c = np.zeros((l + 1) ** 2)
    c[SpectralCoeffs.index(l, m)] = 1.0
    return synthesize(SpectralCoeffs(l, c), grid)


# -- coefficient file format -------------------------------------------------

def format_coeffs(c: SpectralCoeffs) -> str:
    lines = [f"sphcoef v1 L={c.L}"]
    for l in range(c.L + 1):
        for m in range(-l, l + 1):
            lines.append(f"{l} {m} {c[l, m]:.17g}")
    return "\n".join(lines) + "\n"


def write_coeffs(c: SpectralCoeffs, path) -> None:
    atomic_write_text(path, format_coeffs(c))


def parse_coeffs(text: str) -> SpectralCoeffs:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[:2] != ["sphcoef", "v1"] or not head[2].startswith("L="):
        raise ValueError("bad coefficient header")
    L = int(head[2][2:])
    c = np.zeros((L + 1) ** 2)
    for ln in lines[1:]:
        l_s, m_s, v_s = ln.split()
        l, m = int(l_s), int(m_s)
        if l > L:
            raise ValueError(f"degree {l} exceeds declared L={L}")
        c[SpectralCoeffs.index(l, m)] = float(v_s)
    return SpectralCoeffs(L, c)


def read_coeffs(path) -> SpectralCoeffs:
    with open(path, encoding="utf-8") as fh:
        return parse_coeffs(fh.read())
