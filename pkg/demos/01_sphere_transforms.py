# %% [markdown]
# # Fields on the sphere and their harmonic transforms
#
# Everything in the package lives on a Gauss-Legendre grid: Gauss nodes in
# ``x = cos(theta)`` times a uniform ring in longitude. The poles are never
# sampled, and surface integrals of band-limited fields are exact up to
# rounding.

# %%
import math

import numpy as np

from kwsphere import build_grid, integrate
from kwsphere.grid import grad_dot
from kwsphere.harmonics import analyze, degree1_basis, inv_laplacian, laplacian, real_harmonic

grid = build_grid(64, 128)
print(grid, "supports degrees up to", grid.lmax)
print("total weight - 4 pi =", grid.weights.sum() - 4 * math.pi)

# %% [markdown]
# The three degree-1 harmonics ``F1 = cos t``, ``F2 = sin t cos p`` and
# ``F3 = sin t sin p`` are eigenfunctions of the Laplacian with eigenvalue -2.
# They are mutually orthogonal with squared norm 4 pi / 3.

# %%
F = degree1_basis(grid)
gram = np.array([[integrate(a * b) for b in F] for a in F])
print("Gram matrix / (4 pi / 3):\n", np.round(gram / (4 * math.pi / 3), 14))
for i, Fi in enumerate(F, 1):
    err = np.max(np.abs(laplacian(Fi).values + 2 * Fi.values))
    print(f"max |lap F{i} + 2 F{i}| = {err:.1e}")

# %% [markdown]
# Analysis recovers expansion coefficients. ``cos^2 t = 1/3 + (2/3) P2``
# has only two nonzero coefficients in the orthonormal real basis.

# %%
c = analyze(grid.evaluate(lambda t, p: np.cos(t) ** 2))
nonzero = [(l, m, c[l, m]) for l in range(grid.lmax + 1) for m in range(-l, l + 1)
           if abs(c[l, m]) > 1e-12]
for l, m, v in nonzero:
    print(f"  (l={l}, m={m:+d}) -> {v:.15f}")
print("expected:", math.sqrt(4 * math.pi) / 3, 2 / 3 * math.sqrt(4 * math.pi / 5))

# %% [markdown]
# Gradients are spectral too. Integrating ``|grad f|^2`` reproduces the
# weighted coefficient sum ``sum l(l+1) c_lm^2``.

# %%
f = 0.7 * real_harmonic(grid, 3, -2) + 0.2 * F[0] + real_harmonic(grid, 5, 4)
coef = analyze(f)
l = coef.degrees()
print("energy (quadrature):", integrate(grad_dot(f, f)))
print("energy (spectrum):  ", float(np.sum(l * (l + 1) * coef.coeffs ** 2)))

# %% [markdown]
# The inverse Laplacian is defined on zero-mean fields.

# %%
g = inv_laplacian(-2 * F[0])
print("inv_laplacian(-2 F1) - F1:", np.max(np.abs(g.values - F[0].values)))
