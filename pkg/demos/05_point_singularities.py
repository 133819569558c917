# %% [markdown]
# # Integrable point singularities
#
# ``u_sing = -C0 log(1 + cos t)`` has Laplacian ``C0`` away from the south
# pole. Adding it to a solution shifts ``C`` by ``C0``. The price is a
# curvature ``h / (1 + cos t)^C0``, which is singular at the pole when
# ``C0 > 0`` and vanishes there when ``C0 < 0``.

# %%
import math
import warnings

import numpy as np

from kwsphere import build_grid
from kwsphere.gyre import GyreParams, to_elliptic
from kwsphere.solver import singular_shift, solve, u_sing

for C0 in (-1.0, 0.5, 2.0):
    t, eps = math.pi / 3, 1e-4
    u = lambda tt: u_sing(tt, C0)
    lap = ((u(t + eps) - 2 * u(t) + u(t - eps)) / eps**2
           + (u(t + eps) - u(t - eps)) / (2 * eps) / math.tan(t))
    print(f"C0 = {C0:+.1f}: finite-difference Laplacian at t = pi/3 -> {lap:.8f}")

# %% [markdown]
# With ``C0 < 0`` the shifted curvature stays smooth. The shifted problem
# can be solved, and ``v + u_sing`` solves the original one away from the
# pole.

# %%
grid = build_grid(64, 128)
C, h = to_elliptic(GyreParams(-1, 1, 1.0, 0.3), grid)
C1, h1 = singular_shift(h, C, -0.5)
sol = solve(h1, C1)
print(f"shifted C = {C1}, converged: {sol.converged}, residual {sol.residual_maxnorm:.1e}")

# %% [markdown]
# Large positive ``C0`` makes the curvature blow up near the pole; the
# shift warns when grid values exceed 1e12.

# %%
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    singular_shift(h, C, 20.0)
print([str(w.message) for w in caught])
