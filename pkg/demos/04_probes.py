"""Second variation and first variation at A(q).

The modified Hessian (second variation plus ||d*a||^2) is sampled on random
bump variations made orthogonal to the eight parameter directions.  The
gradient is sampled on the same kind of variations and compared with
sqrt(eps).  Small sample counts keep this demo short; the CLI `probe`
command runs the full sweep.
"""

import numpy as np

from ymbubble import cli, gluing
from ymbubble.config import load_config

cfg = load_config()
A0, base = cli.background(cfg)
g = cli.fixture_gauge(cfg, base)

for eps in (0.02, 0.01):
    At = gluing.build_glued(cfg.fixture_q(eps, g), cli.small_potential(cfg, eps, A0, base))
    h = gluing.hessian_positivity_probe(At, n_samples=10, seed=0, zero_mode_check=False)
    print(f"eps = {eps}: min Rayleigh quotient on the frame complement {h['min_quotient']:.4f}")
    print("  parameter directions:", {k: round(v, 4) for k, v in h["frame_quotients"].items()})
    ge = gluing.gradient_envelope(At, n_samples=6, seed=0)
    print(f"  sampled gradient sup {ge['sup']:.4f}, divided by sqrt(eps): {ge['sup'] / np.sqrt(eps):.4f}")
