"""Boundary data, the linear solution and the small solution.

The built-in family is a linear potential sum c[a,j,k] x^j dx^k e_a plus an
optional quadratic perturbation.  The linear problem is solved by Galerkin
projection; the coupled problem by Picard iteration, whose distance from the
linear solution grows linearly in eps.
"""

import numpy as np

from ymbubble import harmonic, reduced
from ymbubble.config import boundary_family

A0 = boundary_family({"family": "linear", "c_seed": 3})
base = harmonic.solve_D0(A0)
print("linear solve residuals:", base.residuals)

eps_list = [0.02, 0.04, 0.08]
norms = []
for eps in eps_list:
    s = harmonic.small_solution_picard(eps, A0, tol=1e-12, base=base)
    norms.append(s.l21_norm())
    print(f"eps = {eps}: {s.iterations} Picard steps, ||A_eps - A_0|| = {norms[-1]:.6e}")
print("log-log slope:", np.polyfit(np.log(eps_list), np.log(norms), 1)[0])

try:
    harmonic.small_solution_picard(0.2, A0, base=base, eps_max=0.1)
except harmonic.NonContraction as e:
    print("beyond the guard:", e)

# the moment matrix of a purely linear background does not depend on p
for p in ([0, 0, 0, 0], [0.2, 0.1, 0, 0]):
    r = reduced.moment_report(base, np.array(p, dtype=float))
    print(f"p = {p}: F = {r.F:.3f}, det M = {r.detM:.3f}, mu = {np.round(r.mu, 3)}")
