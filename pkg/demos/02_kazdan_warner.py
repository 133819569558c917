# %% [markdown]
# # The Kazdan-Warner obstruction
#
# Any solution of ``lap(u) = C - h exp(u)`` must satisfy, for each degree-1
# harmonic ``F_i``,
#
#     int exp(u) f_i = 0,   f_i = grad h . grad F_i + (C - 2) h F_i.
#
# At ``C = 2`` the second term disappears. If some kernel keeps one sign the
# weighted integral cannot vanish for any ``u``, so no solution exists.

# %%
import math

import numpy as np

from kwsphere import build_grid
from kwsphere.criteria import classify, kw_kernels, kw_residuals, sign_change
from kwsphere.gyre import GyreParams, to_elliptic
from kwsphere.harmonics import degree1_basis

grid = build_grid(64, 128)

# %% [markdown]
# The classic example is ``h = cos t``: its first kernel is ``sin^2 t`` and
# the residual at ``u = 0`` is ``8 pi / 3``.

# %%
h = degree1_basis(grid)[0]
r = kw_residuals(grid.field(np.zeros(grid.shape)), h, 2.0)
print("residuals at u = 0:", r, " 8 pi / 3 =", 8 * math.pi / 3)
print("verdict:", classify(h, 2.0).verdict.value)

# %% [markdown]
# The gyre curvature ``h = -c d exp(-varpi cos t)`` behaves the same way.
# Its first kernel is ``-h varpi sin^2 t``, whose sign is that of ``c omega``.
# Random fields ``u`` cannot make the first residual vanish.

# %%
p = GyreParams(c=1.0, d=1.0, g=2.0, omega=1.0)
C, h = to_elliptic(p, grid)
k = kw_kernels(h, C)
s = sign_change(k.f1)
print(f"f1 range: [{s.min:.4f}, {s.max:.4f}]  changes sign: {s.changes}")

rng = np.random.default_rng(0)
for trial in range(4):
    u = grid.evaluate(lambda t, ph: rng.uniform(-1, 1) * np.cos(t)
                      + rng.uniform(-1, 1) * np.sin(t) * np.cos(2 * ph))
    print(f"  trial {trial}: r1 = {kw_residuals(u, h, C, kernels=k)[0]:.4f}")

# %% [markdown]
# Away from ``C = 2`` the kernels of a curvature with ``c d < 0`` change
# sign. There the residuals are an a-posteriori check on numerical
# solutions rather than an obstruction.

# %%
C, h = to_elliptic(GyreParams(c=-1.0, d=1.0, g=2.5, omega=0.1), grid)
print([sign_change(f).changes for f in kw_kernels(h, C)])
report = classify(h, C)
print(report.verdict.value, "-", report.rule)
print("notes:", report.notes)
