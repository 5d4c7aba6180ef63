"""The 1-instanton: action, self-duality and the two gauges.

The eps-scaled instanton A = I/eps has eps^2 YM_eps(A) = 8 pi^2 for every
center and scale.  Chart 1 is regular at the center, chart 2 at infinity,
and they differ by the gauge transformation (x - p)/|x - p|.
"""

import numpy as np

from ymbubble import gluing, instanton

EIGHT_PI2 = 8 * np.pi ** 2

for lam in (0.05, 0.1, 0.2):
    params = instanton.InstantonParams((0.1, 0.0, -0.2, 0.0), lam)
    S = instanton.instanton_action(params)
    print(f"lam = {lam:4}: action {S:.12f}  (8 pi^2 = {EIGHT_PI2:.12f})")

params = instanton.InstantonParams((0.1, 0.0, -0.2, 0.0), 0.1)
print("ASD fraction ||F-||^2/||F||^2:", instanton.asd_ratio(params))

rng = np.random.default_rng(0)
x = params.center + 0.1 * rng.normal(size=(1000, 4))
print("chart relation residual:", np.max(np.abs(instanton.gluing_residual(params, x))))

# the energy density sits at the bubble scale: half the action lies inside |x - p| < lam
from ymbubble.quadrature import r4_quadrature
quad = r4_quadrature(params.center, params.lam)
dens = instanton.action_density(params, quad.nodes)
inside = np.linalg.norm(quad.nodes - params.center, axis=1) < params.lam
print("fraction of action inside B_lam(p):", quad.weights[inside] @ dens[inside] / EIGHT_PI2)

# the eps-coupled action of I/eps is the same number
eps = 0.02
A = lambda y: tuple(t / eps for t in instanton.eval_I1(params, y))
print("eps^2 YM_eps(I/eps):", eps ** 2 * gluing.ym_action(A, eps, quad))
