"""Existence tests for ``lap(u) = C - h exp(u)`` on the unit sphere.

The Kazdan-Warner kernels

    f_i = grad h . grad F_i + (C - 2) h F_i,       F_i degree-1 harmonics,

must integrate to zero against ``exp(u)`` for any solution ``u``. For
``2 <= C < 4`` existence follows when every kernel changes sign, the sum
``|f_1| + |f_2| + |f_3|`` is bounded away from zero, and the symmetric part
of the pointwise matrix

    W_ij = grad F_i . grad f_j + (C - 2) F_i f_j

is uniformly definite. Below ``C = 2`` the classical sign/mean conditions
on ``h`` decide existence outright.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    ScalarField,
    SphericalGrid,
    field_max,
    field_min,
    grad_dot,
    integrate,
    mean,
)
from .harmonics import degree1_basis, pole_values

__all__ = [
    "KernelTriple",
    "WField",
    "SignChange",
    "Gap",
    "Definiteness",
    "Definite",
    "Verdict",
    "CriteriaReport",
    "kw_kernels",
    "kw_residuals",
    "w_matrix",
    "sign_change",
    "gap",
    "definiteness",
    "classify",
]

DEFAULT_MARGIN = 1e-8
# exp(u) overflows a double just above u = 709.78.
EXP_LIMIT = 700.0


@dataclass(frozen=True)
class KernelTriple:
    """Kernels ``f_1, f_2, f_3`` built from some ``h`` at a given ``C``.

    ``pole_sums`` optionally carries values of ``|f1|+|f2|+|f3|`` at the
    north and south poles, which the grid never samples.
    """

    f1: ScalarField
    f2: ScalarField
    f3: ScalarField
    C: float
    pole_sums: tuple[float, float] | None = None

    def __post_init__(self):
        if not (self.f1.grid == self.f2.grid == self.f3.grid):
            raise ValueError("kernels must share one grid")

    @property
    def grid(self) -> SphericalGrid:
        return self.f1.grid

    def __iter__(self):
        return iter((self.f1, self.f2, self.f3))

    def __getitem__(self, i):
        return (self.f1, self.f2, self.f3)[i]


@dataclass(frozen=True)
class WField:
    """The nine entries ``W[i][j]`` of the pointwise 3x3 matrix."""

    entries: tuple
    C: float

    def __post_init__(self):
        g = self.entries[0][0].grid
        if any(e.grid != g for row in self.entries for e in row):
            raise ValueError("W entries must share one grid")

    @property
    def grid(self) -> SphericalGrid:
        return self.entries[0][0].grid

    def stack(self) -> np.ndarray:
        """Array of shape ``(nlat*nlon, 3, 3)`` in row-major node order."""
        return np.stack(
            [np.stack([e.flat for e in row], axis=-1) for row in self.entries],
            axis=-2,
        )

    def symmetric_part(self) -> np.ndarray:
        """``W + W^T`` per node, shape ``(nlat*nlon, 3, 3)``."""
        w = self.stack()
        return w + np.swapaxes(w, -1, -2)


def kw_kernels(h: ScalarField, C: float) -> KernelTriple:
    """Kernels ``f_i = grad h . grad F_i + (C - 2) h F_i``.

    Pole values of ``|f1|+|f2|+|f3|`` are attached from the spectral
    interpolant, since the gap is often attained at a pole.
    """
    F = degree1_basis(h.grid)
    fs = [grad_dot(h, Fi) + (C - 2.0) * (h * Fi) for Fi in F]
    poles = np.sum([np.abs(pole_values(fi)) for fi in fs], axis=0)
    return KernelTriple(*fs, C=float(C), pole_sums=(float(poles[0]), float(poles[1])))


def kw_residuals(u: ScalarField, h: ScalarField, C: float,
                 kernels: KernelTriple | None = None) -> np.ndarray:
    """Weighted kernel integrals ``int exp(u) f_i``, i = 1, 2, 3.

    All three vanish for a genuine solution of ``lap(u) = C - h exp(u)``.
    """
    umax = float(np.max(u.values))
    if umax > EXP_LIMIT:
        raise OverflowError(f"exp(u) overflows: max(u) = {umax:.6g} > {EXP_LIMIT}")
    k = kw_kernels(h, C) if kernels is None else kernels
    eu = np.exp(u.values)
    return np.array([integrate(ScalarField(u.grid, eu * fi.values)) for fi in k])


def w_matrix(h: ScalarField, C: float, kernels: KernelTriple | None = None) -> WField:
    k = kw_kernels(h, C) if kernels is None else kernels
    F = degree1_basis(h.grid)
    entries = tuple(
        tuple(grad_dot(Fi, fj) + (C - 2.0) * (Fi * fj) for fj in k) for Fi in F
    )
    return WField(entries, float(C))


@dataclass(frozen=True)
class SignChange:
    changes: bool
    min: float
    max: float


def _threshold(scale: float, margin: float | None) -> float:
    return (DEFAULT_MARGIN if margin is None else margin) * scale


def sign_change(f: ScalarField, margin: float | None = None) -> SignChange:
    """Whether ``f`` takes values beyond ``+-margin`` of both signs.

    ``margin`` is relative to ``max|f|`` (default 1e-8), so a field that is
    zero up to rounding never counts as changing sign.
    """
    if margin is not None and margin < 0:
        raise ValueError("margin must be >= 0")
    lo, hi = float(f.values.min()), float(f.values.max())
    thr = _threshold(max(abs(lo), abs(hi)), margin)
    return SignChange(lo < -thr and hi > thr, lo, hi)


def _fixed_sign(s: SignChange, margin: float | None) -> bool:
    thr = _threshold(max(abs(s.min), abs(s.max)), margin)
    return s.min > thr or s.max < -thr


@dataclass(frozen=True)
class Gap:
    alpha: float
    node: int | str
    theta: float
    phi: float


def gap(k: KernelTriple) -> Gap:
    """Minimum of ``|f1| + |f2| + |f3|`` over the grid and attached pole values.

    ``node`` is the row-major grid index, or ``"north"``/``"south"`` when an
    exact pole value is the minimum.
    """
    total = ScalarField(k.grid, sum(np.abs(fi.values) for fi in k))
    alpha, idx = field_min(total)
    th, ph = k.grid.node(idx)
    best = Gap(alpha, idx, th, ph)
    if k.pole_sums is not None:
        for name, theta, val in (("north", 0.0, k.pole_sums[0]),
                                 ("south", math.pi, k.pole_sums[1])):
            if val < best.alpha:
                best = Gap(float(val), name, theta, 0.0)
    return best


class Definite(str, enum.Enum):
    POSITIVE = "PositiveDefinite"
    NEGATIVE = "NegativeDefinite"
    INDEFINITE = "Indefinite"


@dataclass(frozen=True)
class Definiteness:
    """Definiteness of ``W + W^T`` over the grid.

    ``lambda_min``/``lambda_max`` are the extreme eigenvalues over all
    nodes, with the nodes attaining them. ``worst_margin`` is how far the
    binding eigenvalue clears the threshold (negative when it does not).
    """

    kind: Definite
    lambda_min: float
    min_node: int
    lambda_max: float
    max_node: int
    threshold: float
    worst_margin: float


def definiteness(w: WField, margin: float | None = None) -> Definiteness:
    if margin is not None and margin < 0:
        raise ValueError("margin must be >= 0")
    eig = np.linalg.eigvalsh(w.symmetric_part())
    lo, hi = eig[:, 0], eig[:, -1]
    i_lo, i_hi = int(np.argmin(lo)), int(np.argmax(hi))
    lam_min, lam_max = float(lo[i_lo]), float(hi[i_hi])
    thr = _threshold(float(np.max(np.abs(eig))), margin)
    pos_margin = lam_min - thr
    neg_margin = -lam_max - thr
    if pos_margin > 0:
        kind, worst = Definite.POSITIVE, pos_margin
    elif neg_margin > 0:
        kind, worst = Definite.NEGATIVE, neg_margin
    else:
        kind, worst = Definite.INDEFINITE, max(pos_margin, neg_margin)
    return Definiteness(kind, lam_min, i_lo, lam_max, i_hi, thr, worst)


class Verdict(str, enum.Enum):
    EXISTS_LEMMA2 = "ExistsByLemma2"
    EXISTS_LEMMA3 = "ExistsByLemma3"
    EXISTS_LEMMA45 = "ExistsByLemma45"
    NO_SOLUTION = "NoSolution"
    NO_SOLUTION_KW = "NoSolutionKW"
    SUFFICIENT_THM1 = "SufficientByThm1"
    INCONCLUSIVE = "Inconclusive"

    @property
    def exists(self) -> bool:
        return self in (Verdict.EXISTS_LEMMA2, Verdict.EXISTS_LEMMA3,
                        Verdict.EXISTS_LEMMA45, Verdict.SUFFICIENT_THM1)

    @property
    def exit_code(self) -> int:
        if self.exists:
            return 0
        if self in (Verdict.NO_SOLUTION, Verdict.NO_SOLUTION_KW):
            return 1
        return 2


@dataclass
class CriteriaReport:
    C: float
    regime: str
    verdict: Verdict
    rule: str
    h_max: float
    h_max_node: int
    h_min: float
    h_mean: float
    sign_changes: list[SignChange]
    gap: Gap
    definiteness: Definiteness
    notes: list[str] = field(default_factory=list)

    @property
    def h_positive_somewhere(self) -> bool:
        return self.h_max > 0

    def to_dict(self) -> dict:
        d = self.definiteness
        return {
            "C": self.C,
            "regime": self.regime,
            "verdict": self.verdict.value,
            "rule": self.rule,
            "h": {
                "positive_somewhere": self.h_positive_somewhere,
                "max": self.h_max,
                "max_node": self.h_max_node,
                "min": self.h_min,
                "mean": self.h_mean,
            },
            "sign_change": [
                {"kernel": f"f{i + 1}", "changes": s.changes, "min": s.min, "max": s.max}
                for i, s in enumerate(self.sign_changes)
            ],
            "gap": {"alpha": self.gap.alpha, "node": self.gap.node,
                    "theta": self.gap.theta, "phi": self.gap.phi},
            "definiteness": {
                "kind": d.kind.value,
                "lambda_min": d.lambda_min,
                "min_node": d.min_node,
                "lambda_max": d.lambda_max,
                "max_node": d.max_node,
                "threshold": d.threshold,
                "worst_margin": d.worst_margin,
            },
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def classify(h: ScalarField, C: float, margin: float | None = None,
             kernels: KernelTriple | None = None) -> CriteriaReport:
    """Decide what is known about solvability of ``lap(u) = C - h exp(u)``.

    Parameters
    ----------
    h : ScalarField
        Candidate curvature; must not vanish identically.
    C : float
        The constant on the right-hand side.
    margin : float, optional
        Relative margin for all strict sign tests (default 1e-8).
    kernels : KernelTriple, optional
        Precomputed kernels for ``(h, C)``, e.g. closed forms carrying exact
        pole values.

    Returns
    -------
    CriteriaReport
        All sub-results plus the verdict. For ``2 <= C < 4`` the verdict is
        sufficient-only: failure of the definiteness test yields
        ``Inconclusive``, never a non-existence claim.
    """
    C = float(C)
    if not math.isfinite(C):
        raise ValueError("C must be finite")
    hmax_abs = float(np.max(np.abs(h.values)))
    if hmax_abs == 0.0:
        raise ValueError("h must not vanish identically")
    tol = _threshold(hmax_abs, margin)
    h_max, h_max_node = field_max(h)
    h_min, _ = field_min(h)
    h_mean = mean(h)

    k = kw_kernels(h, C) if kernels is None else kernels
    changes = [sign_change(fi, margin) for fi in k]
    g = gap(k)
    total_scale = float(np.max(sum(np.abs(fi.values) for fi in k)))
    d = definiteness(w_matrix(h, C, kernels=k), margin)
    notes: list[str] = []

    def report(regime, verdict, rule):
        return CriteriaReport(C, regime, verdict, rule, h_max, h_max_node,
                              h_min, h_mean, changes, g, d, notes)

    if C < 0:
        regime = "C<0"
        if h_max <= 0 and h_min < -tol:
            return report(regime, Verdict.EXISTS_LEMMA2, "C<0: h<=0 and negative somewhere")
        notes.append(f"necessary condition mean(h)<0: mean(h)={h_mean:.6g}")
        if h_mean > tol:
            return report(regime, Verdict.NO_SOLUTION, "C<0: mean(h) >= 0 violates the necessary condition")
        return report(regime, Verdict.INCONCLUSIVE, "C<0: h changes sign; existence depends on C")

    if C == 0:
        regime = "C=0"
        if h_mean < -tol and h_max > tol:
            return report(regime, Verdict.EXISTS_LEMMA3, "C=0: mean(h)<0 and h positive somewhere")
        if h_mean > tol or h_max < -tol:
            return report(regime, Verdict.NO_SOLUTION, "C=0: requires mean(h)<0 and h positive somewhere")
        return report(regime, Verdict.INCONCLUSIVE, "C=0: mean(h) or max(h) indistinguishable from 0")

    # C > 0 from here on: int h exp(u) = 4 pi C > 0 needs h > 0 somewhere.
    if h_max < -tol or (h_max <= 0 and h_min < -tol):
        regime = "0<C<2" if C < 2 else ("2<=C<4" if C < 4 else "C>=4")
        return report(regime, Verdict.NO_SOLUTION, "C>0: h<=0 everywhere, integral constraint cannot hold")

    if C < 2:
        regime = "0<C<2"
        if h_max > tol:
            return report(regime, Verdict.EXISTS_LEMMA45, "0<C<2: h positive somewhere")
        return report(regime, Verdict.INCONCLUSIVE, "0<C<2: max(h) indistinguishable from 0")

    if C >= 4:
        notes.append("C>=4 lies outside the range covered by the existence criteria")
        return report("C>=4", Verdict.INCONCLUSIVE, "C>=4: no criterion available")

    regime = "2<=C<4"
    if C == 2:
        fixed = [i + 1 for i, s in enumerate(changes) if _fixed_sign(s, margin)]
        if fixed:
            notes.append(f"kernels of fixed sign: {fixed}")
            return report("C=2", Verdict.NO_SOLUTION_KW,
                          f"C=2: kernel f{fixed[0]} has fixed sign, weighted integral cannot vanish")
        regime = "C=2"

    failed = []
    if not h_max > tol:
        failed.append("h not positive somewhere")
    failed += [f"f{i + 1} does not change sign" for i, s in enumerate(changes) if not s.changes]
    if not g.alpha > _threshold(total_scale, margin):
        failed.append("gap not positive")
    if d.kind is Definite.INDEFINITE:
        failed.append("W+W^T not uniformly definite")
    if not failed:
        return report(regime, Verdict.SUFFICIENT_THM1,
                      f"2<=C<4: kernels change sign, gap={g.alpha:.6g}, W+W^T {d.kind.value}")
    notes.extend(failed)
    return report(regime, Verdict.INCONCLUSIVE, "2<=C<4: sufficient conditions not met")
