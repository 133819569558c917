# %% [markdown]
# # Where does the gyre model have solutions?
#
# The stream-function equation ``lap(psi) - 2 omega cos t = c exp(d psi) + g``
# becomes ``lap(u) = C - h exp(u)`` with ``C = g d`` and ``varpi = omega d``.
# Existence depends on the sign of ``c d``, on ``C`` and, for ``2 < C < 4``,
# on how large ``|varpi|`` is compared to a bound that depends on ``C``.

# %%
import pathlib
from fractions import Fraction

import numpy as np

from kwsphere import build_grid
from kwsphere.criteria import definiteness, w_matrix
from kwsphere.gyre import GyreParams, classify, corollary7_bound, eigen_closed, sweep, to_elliptic

for params in [(1, 1, -1, 0.5), (-1, 1, 1, 0.5), (-1, 1, 2, 0.5),
               (-1, 1, 2.5, 0.1), (-1, 1, 2.5, 0.9), (-1, 1, 5, 0.1)]:
    rv = classify(GyreParams(*params))
    print(f"{str(params):22s} {rv.verdict.value:18s} {rv.rule}")

# %% [markdown]
# The bound is piecewise. Both pieces meet at ``C = 13/6``, where each
# equals 1/6 exactly. The other display of this bound, which multiplies
# by ``9 - 4C`` instead of dividing, would give 1/54 there.

# %%
print("bound(13/6) =", corollary7_bound(Fraction(13, 6)))
for C in (2.05, 2.1, 2.2, 2.5, 3.0, 3.5):
    print(f"  C = {C:4}: |varpi| < {float(corollary7_bound(C)):.5f}")

# %% [markdown]
# The bound is where ``W + W^T`` stops being positive definite. The closed
# eigenvalues and a node-by-node eigensolve agree on that.

# %%
grid = build_grid(64, 128)
C = 2.5
b = float(corollary7_bound(C))
for factor in (0.9, 1.1):
    p = GyreParams(-1, 1, C, factor * b)
    Ce, h = to_elliptic(p, grid)
    d = definiteness(w_matrix(h, Ce))
    lam0, lam_p, lam_m = eigen_closed(grid.thetas, p)
    print(f"|varpi| = {factor} x bound: {d.kind.value:16s} "
          f"min eigenvalue numeric {d.lambda_min:+.4f}, closed {min(lam0.min(), lam_m.min()):+.4f}")

# %% [markdown]
# A sweep tabulates the verdict over a ``(C, varpi)`` lattice and renders
# a small SVG map.

# %%
out = pathlib.Path(__file__).resolve().parent / "_output"
out.mkdir(exist_ok=True)
res = sweep((-1, 4.5), (-2, 2), (111, 81))
res.write_csv(out / "gyre_regions.csv")
res.write_svg(out / "gyre_regions.svg")
verdicts, counts = np.unique(res.verdict_grid(), return_counts=True)
print(dict(zip(verdicts.tolist(), counts.tolist())))
print("wrote", out / "gyre_regions.csv", "and", out / "gyre_regions.svg")
