"""Energy of the glued connection A(q) and the reduced functional.

J = eps^2 YM_eps(A(q)) splits as 8 pi^2 + (small-solution energy) +
(2 lam^4 F(p) - 4 eps lam^2 T(g)) + r1, and r1 shrinks like eps^3.  The
gauge rotation g is chosen to maximize T at the bubble point.
"""

import numpy as np

from ymbubble import cli, gluing
from ymbubble.config import load_config

cfg = load_config()
A0, base = cli.background(cfg)
g = cli.fixture_gauge(cfg, base)
print("bubble point p =", cfg.fixture["p"], " optimal g =", np.round(g, 4))

eps_list = [0.04, 0.02, 0.01, 0.005]
r1 = []
for eps in eps_list:
    q = cfg.fixture_q(eps, g)
    rep = gluing.j_eps(q, cli.small_potential(cfg, eps, A0, base), base)
    r1.append(rep.r1)
    print(f"eps = {eps:5}: J = {rep.J:.8f} = 8pi^2 + {rep.small_energy:.6f} + ({rep.reduced:.6f}) + r1 {rep.r1:+.3e};"
          f" charge {rep.chern:.10f}")
print("slope of |r1|:", np.polyfit(np.log(eps_list), np.log(np.abs(r1)), 1)[0])
