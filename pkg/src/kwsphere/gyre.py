"""The ocean-gyre model ``lap(psi) - 2 w cos(t) = c exp(d psi) + g``.

Substituting ``psi = u/d - w cos(t)`` and multiplying by ``d`` gives
``lap(u) = C - h exp(u)`` with ``C = g d`` and the axisymmetric candidate
curvature ``h = -c d exp(-w d cos(t))``. Everything in this module is
closed form in ``C``, ``varpi = w d`` and ``cos(t)``.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .criteria import KernelTriple
from .grid import ScalarField, SphericalGrid, atomic_write_text
from .harmonics import degree1_basis

__all__ = [
    "GyreParams",
    "GyreVerdict",
    "RegionVerdict",
    "SweepResult",
    "to_elliptic",
    "h_omega",
    "kernels_closed",
    "gap_closed",
    "theta_delta",
    "eigen_closed",
    "discriminant_closed",
    "range2_bound",
    "corollary7_bound",
    "classify",
    "sweep",
]

# C values this close to a regime boundary are snapped onto it.
_SNAP = 1e-12


@dataclass(frozen=True)
class GyreParams:
    c: float
    d: float
    g: float
    omega: float

    def __post_init__(self):
        if self.d == 0:
            raise ValueError("d must be nonzero")
        if self.c == 0:
            raise ValueError("c must be nonzero (h would vanish identically)")

    @property
    def C(self) -> float:
        return self.g * self.d

    @property
    def varpi(self) -> float:
        return self.omega * self.d

    @property
    def kappa(self) -> float | None:
        """``varpi / (C - 2)``; ``None`` at ``C = 2``."""
        return None if self.C == 2 else self.varpi / (self.C - 2)

    @property
    def cd(self) -> float:
        return self.c * self.d


def h_omega(p: GyreParams, theta):
    return -p.c * p.d * np.exp(-p.varpi * np.cos(theta))


def to_elliptic(p: GyreParams, grid: SphericalGrid) -> tuple[float, ScalarField]:
    """Return ``(C, h)`` of the equivalent equation ``lap(u) = C - h exp(u)``."""
    h = -p.c * p.d * np.exp(-p.varpi * grid.x)
    return p.C, ScalarField(grid, np.broadcast_to(h[:, None], grid.shape))


def kernels_closed(p: GyreParams, grid: SphericalGrid) -> KernelTriple:
    """Kazdan-Warner kernels of ``h_omega`` in closed form.

    ``f1 = h [(C-2) cos t - varpi sin^2 t]`` and
    ``f2,3 = h (C - 2 + varpi cos t) F2,3``. Pole values of
    ``|f1|+|f2|+|f3|`` are attached exactly.
    """
    C, w = p.C, p.varpi
    x = grid.x[:, None]
    h = h_omega(p, grid.thetas)[:, None]
    _, F2, F3 = degree1_basis(grid)
    f1 = h * ((C - 2) * x - w * (1 - x * x))
    common = h * (C - 2 + w * x)
    poles = (abs(float(h_omega(p, 0.0)) * (C - 2)),
             abs(float(h_omega(p, math.pi)) * (C - 2)))
    return KernelTriple(
        ScalarField(grid, np.broadcast_to(f1, grid.shape)),
        ScalarField(grid, common * F2.values),
        ScalarField(grid, common * F3.values),
        C=C,
        pole_sums=poles,
    )


def gap_closed(p: GyreParams) -> float:
    return abs(p.cd) * abs(p.C - 2) * math.exp(-abs(p.varpi))


def theta_delta(C, varpi, theta):
    """The auxiliary quantities ``Theta`` and ``Delta`` of the W+W^T spectrum."""
    w = varpi
    ct = np.cos(theta)
    Theta = 8 + 4 * C * (C - 3) + 2 * w**2 + 2 * w * (2 * ct - w * np.cos(2 * theta))
    Delta = (
        8 * (6 - 5 * C + C**2) ** 2
        + 8 * (7 + C * (C - 5)) * w**2
        + w * (
            4 * (w**2 - 4 * (C - 3) * (C - 2)) * ct
            - w * (
                4 * (w**2 + 12 + 2 * C * (C - 5)) * np.cos(2 * theta)
                + w * (4 * np.cos(3 * theta) - w * np.cos(4 * theta))
            )
        )
        + 3 * w**4
    )
    return Theta, Delta


def eigen_closed(theta, p: GyreParams, tol: float = 1e-9):
    """Eigenvalues ``(lambda0, lambda_plus, lambda_minus)`` of ``W + W^T``.

    They depend on colatitude only. ``2*Delta`` must be non-negative for a
    real symmetric matrix; values below ``-tol * Theta**2`` raise
    ``ValueError`` and smaller negative rounding is clipped to zero.
    """
    C, w = p.C, p.varpi
    h = h_omega(p, theta)
    Theta, Delta = theta_delta(C, w, theta)
    two_delta = 2 * np.asarray(Delta, dtype=float)
    if np.any(two_delta < -tol * np.maximum(1.0, np.asarray(Theta) ** 2)):
        raise ValueError("negative discriminant in closed-form eigenvalues")
    root = np.sqrt(np.maximum(two_delta, 0.0))
    lam0 = 2 * h * (C - 2 + w * np.cos(theta))
    return lam0, 0.25 * h * (Theta + root), 0.25 * h * (Theta - root)


def discriminant_closed(C, varpi, X):
    """Factored form of ``Theta**2 - 2*Delta`` in ``X = cos(theta)``."""
    return 64 * (C - 2) ** 2 * (C - 2 + varpi * X) + 16 * varpi**2 * (4 * C - 9) * (1 - X**2)


def _sqrt(q):
    """Square root, exact for ``Fraction`` perfect squares."""
    if isinstance(q, Fraction):
        rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if rn * rn == q.numerator and rd * rd == q.denominator:
            return Fraction(rn, rd)
        return math.sqrt(q)
    return math.sqrt(q)


def range2_bound(C):
    """``2 (C-2)^{3/2} sqrt(11-5C) / (9-4C)``, defined for ``2 <= C <= 11/5``."""
    if not 2 <= C <= Fraction(11, 5):
        raise ValueError(f"range2 bound needs 2 <= C <= 11/5, got {C}")
    return 2 * _sqrt((C - 2) ** 3 * (11 - 5 * C)) / (9 - 4 * C)


def corollary7_bound(C):
    """Largest ``|varpi|`` for which ``W + W^T`` stays positive definite.

    Piecewise in ``C`` on (2, 4): the interior-minimum bound up to 13/6,
    then ``C - 2``. Both branches equal 1/6 at ``C = 13/6``; pass a
    ``Fraction`` to get that exactly.
    """
    if not 2 < C < 4:
        raise ValueError(f"bound defined for 2 < C < 4, got {C}")
    if C <= Fraction(13, 6):
        return range2_bound(C)
    return C - 2


class GyreVerdict(str, enum.Enum):
    EXISTS = "EXISTS"
    NO_SOLUTION = "NO_SOLUTION"
    EXISTS_SUFFICIENT = "EXISTS_SUFFICIENT"
    UNKNOWN = "UNKNOWN"

    @property
    def exit_code(self) -> int:
        return {"EXISTS": 0, "EXISTS_SUFFICIENT": 0, "NO_SOLUTION": 1}.get(self.value, 2)


@dataclass(frozen=True)
class RegionVerdict:
    """Outcome of the parameter-space classification.

    ``margin`` is the distance from ``(C, varpi)`` to the nearest boundary
    of the region that produced the verdict (vertical distance for the
    curved ``|varpi| = bound(C)`` boundary).
    """

    verdict: GyreVerdict
    rule: str
    bound_value: float | None
    margin: float
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "rule": self.rule,
            "bound": self.bound_value,
            "margin": self.margin,
            "notes": list(self.notes),
        }


def _snap(C: float) -> float:
    for edge in (0.0, 2.0, 4.0):
        if abs(C - edge) <= _SNAP:
            return edge
    return C


def classify(p: GyreParams) -> RegionVerdict:
    C = _snap(p.C)
    w = p.varpi
    cd = p.cd
    V = GyreVerdict
    if C > 0 and cd > 0:
        # h < 0 everywhere, so int h exp(u) = 4 pi C > 0 is impossible.
        return RegionVerdict(V.NO_SOLUTION, "C>0, cd>0: integral constraint fails",
                             _bound_or_none(C), C)
    if w == 0:
        return _classify_static(C, cd)
    if C < 0:
        if cd > 0:
            return RegionVerdict(V.EXISTS, "C<0, cd>0", None, -C)
        return RegionVerdict(V.NO_SOLUTION, "C<0, cd<0", None, -C)
    if C == 0:
        return RegionVerdict(V.NO_SOLUTION, "C=0", None, 0.0)
    if C < 2:
        return RegionVerdict(V.EXISTS, "0<C<2, cd<0", None, min(C, 2 - C))
    if C == 2:
        return RegionVerdict(V.NO_SOLUTION, "C=2, varpi!=0: Kazdan-Warner obstruction", None, 0.0)
    if C < 4:
        bound = float(corollary7_bound(C))
        margin = min(C - 2, 4 - C, abs(bound - abs(w)))
        if abs(w) < bound:
            return RegionVerdict(V.EXISTS_SUFFICIENT, "2<C<4, cd<0, |varpi|<bound", bound, margin)
        return RegionVerdict(V.UNKNOWN, "2<C<4, cd<0, |varpi|>=bound", bound, margin)
    return RegionVerdict(V.UNKNOWN, "C>=4", None, C - 4)


def _bound_or_none(C):
    return float(corollary7_bound(C)) if 2 < C < 4 else None


def _classify_static(C: float, cd: float) -> RegionVerdict:
    """``omega = 0``: ``h = -cd`` is constant."""
    V = GyreVerdict
    if C == 0:
        return RegionVerdict(V.NO_SOLUTION, "omega=0, C=0: constant h cannot integrate to zero", None, 0.0)
    if C < 0:
        if cd > 0:
            return RegionVerdict(V.EXISTS, "omega=0, C<0, cd>0: constant solution", None, -C)
        return RegionVerdict(V.NO_SOLUTION, "omega=0, C<0, cd<0", None, -C)
    notes = []
    if C == 2:
        notes.append("g=2/d: constant-curvature case, non-constant solutions also exist")
    elif C < 2:
        notes.append("0<C<2: only the constant solution exists")
    return RegionVerdict(V.EXISTS, "omega=0, C>0, cd<0: constant solution",
                         _bound_or_none(C), abs(C), tuple(notes))


@dataclass
class SweepResult:
    """Verdicts on a ``(C, varpi)`` lattice; ``cells[i][j]`` is at ``(Cs[i], varpis[j])``."""

    Cs: np.ndarray
    varpis: np.ndarray
    cells: list[list[RegionVerdict]]

    def verdict_grid(self) -> np.ndarray:
        return np.array([[c.verdict.value for c in row] for row in self.cells])

    def rows(self):
        for C, row in zip(self.Cs, self.cells):
            for w, cell in zip(self.varpis, row):
                yield float(C), float(w), cell

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("C,varpi,verdict,rule,bound,margin\n")
        for C, w, cell in self.rows():
            bound = "" if cell.bound_value is None else repr(cell.bound_value)
            rule = cell.rule.replace('"', "'")
            out.write(f'{C!r},{w!r},{cell.verdict.value},"{rule}",{bound},{cell.margin!r}\n')
        return out.getvalue()

    def to_svg(self, cell_px: int = 3) -> str:
        nC, nV = len(self.Cs), len(self.varpis)
        width, height = nC * cell_px, nV * cell_px
        cls = {"EXISTS": "exists", "EXISTS_SUFFICIENT": "exists",
               "NO_SOLUTION": "none", "UNKNOWN": "unknown"}
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            "<style>.exists{fill:#2e8b57}.none{fill:#b22222}.unknown{fill:#c8c8c8}</style>",
        ]
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                # varpi increases upward.
                y = (nV - 1 - j) * cell_px
                parts.append(f'<rect class="{cls[cell.verdict.value]}" x="{i * cell_px}" '
                             f'y="{y}" width="{cell_px}" height="{cell_px}"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    def write_svg(self, path) -> None:
        atomic_write_text(path, self.to_svg())


def sweep(C_range, varpi_range, resolution, cd_sign: float = -1.0) -> SweepResult:
    """Classify every cell of an evenly spaced ``(C, varpi)`` lattice.

    ``resolution`` is the number of points per axis, either one integer
    or a pair ``(nC, nvarpi)``; each must be at least 2. Cells use
    ``d = 1``, ``c = cd_sign``, ``g = C`` and ``omega = varpi``.
    """
    nC, nV = (resolution, resolution) if np.ndim(resolution) == 0 else resolution
    if nC < 2 or nV < 2:
        raise ValueError("resolution must be >= 2 per axis")
    if not all(map(math.isfinite, (*C_range, *varpi_range))):
        raise ValueError("ranges must be finite")
    if cd_sign == 0:
        raise ValueError("cd_sign must be nonzero")
    Cs = np.linspace(C_range[0], C_range[1], int(nC))
    ws = np.linspace(varpi_range[0], varpi_range[1], int(nV))
    cells = [[classify(GyreParams(float(np.sign(cd_sign)), 1.0, float(C), float(w)))
              for w in ws] for C in Cs]
    return SweepResult(Cs, ws, cells)
