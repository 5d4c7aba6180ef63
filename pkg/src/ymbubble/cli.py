"""Batch entry point: ``python3 -m ymbubble <command> [flags]``.

Commands: ``instanton-check``, ``landscape``, ``expansion-study``, ``probe``,
``small-solution``.  Each writes its CSV/JSON outputs and a ``manifest.json``
into ``--out``.  Exit codes: 0 pass, 1 tolerance failure, 2 configuration
error, 3 solver failure.
"""

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__, algebra, fieldcache, gluing, harmonic, instanton, reduced
from .config import ConfigError, load_config
from .parallel import set_threads
from .quadrature import ball_quadrature, bubble_ball_quadrature, r4_quadrature, sphere_rule

EXIT_PASS, EXIT_TOL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


# ---------------------------------------------------------------- shared plumbing

def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_manifest(out, cfg, command, grids, outputs):
    """Config hash, grid hashes, seed, versions and output digests."""
    man = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "grid_hashes": grids,
        "seed": cfg.seed,
        "versions": {"ymbubble": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "outputs": {name: _sha(Path(out) / name) for name in outputs},
    }
    write_json(Path(out) / "manifest.json", man)
    return man


def _sphere(v):
    return sphere_rule(*v)


def reduced_quad(cfg):
    g = cfg.grids
    return ball_quadrature(nr=g["reduced_nr"], sphere=_sphere(g["reduced_sphere"]))


def bubble_quad(cfg, q):
    g = cfg.grids
    return bubble_ball_quadrature(q.center, q.lam, n_per=g["bubble_n_per"], n_outer=g["bubble_n_outer"],
                                  sphere=_sphere(g["bubble_sphere"]))


def background(cfg):
    """Boundary data and the linear solve."""
    A0 = cfg.boundary_data()
    base = harmonic.solve_D0(A0, degree=cfg.grids["galerkin_degree"], fit_degree=cfg.grids["fit_degree"])
    return A0, base


def small_potential(cfg, eps, A0, base, tol=1e-12):
    """``A_eps`` as a PolyForm, through the field cache."""
    grid = base.space.quad.digest()
    key = fieldcache.entry_key(grid, fieldcache.boundary_hash(A0), eps, tol, "picard")
    hit = fieldcache.load_polyform(grid, key)
    if hit is not None:
        return hit
    sol = harmonic.small_solution_picard(eps, A0, tol=tol, base=base, eps_max=cfg.eps_max)
    fieldcache.store_polyform(grid, key, sol.potential)
    return sol.potential


def fixture_gauge(cfg, base):
    g = cfg.fixture.get("g", "optimal")
    if isinstance(g, str):
        M, F = reduced.moment_matrix(base, np.asarray(cfg.fixture["p"], dtype=float), reduced_quad(cfg), with_F=True)
        return reduced.optimal_bubble(F, M, 1.0)["g"]
    return list(g)


# ---------------------------------------------------------------- commands

def cmd_instanton_check(cfg, out):
    """Self-duality, gluing relation and the 8 pi^2 action of the eps-scaled instanton."""
    tol = cfg.tolerances
    g = cfg.grids
    rng = np.random.default_rng(cfg.seed)
    qkw = dict(n_per=g["instanton_n_per"], n_outer=g["instanton_n_outer"], sphere=_sphere(g["instanton_sphere"]))
    eps = 0.01

    def action(lam):
        params = instanton.InstantonParams((0.1, -0.05, 0.0, 0.2), lam)
        quad = r4_quadrature(params.center, lam, **qkw)
        A = lambda x: tuple(algebra.phi_eps(1 / eps, t) for t in instanton.eval_I1(params, x))
        return eps ** 2 * gluing.ym_action(A, eps, quad), params, quad

    S, params, quad = action(0.1)
    S_small, _, _ = action(0.05)
    S_big, _, _ = action(0.2)
    asd = instanton.asd_ratio(params, quad)
    x = params.center + rng.normal(size=(1000, 4)) * params.lam
    glue = float(np.max(np.abs(instanton.gluing_residual(params, x))))
    exact = 8 * np.pi ** 2
    rep = {
        "action": S, "exact": exact, "action_rel_error": abs(S - exact) / exact,
        "asd_ratio": asd, "gluing_residual": glue,
        "scale_invariance": {"lam=0.05": S_small, "lam=0.2": S_big, "diff": abs(S_small - S_big)},
        "nodes": quad.n,
    }
    checks = {
        "action": rep["action_rel_error"] <= tol["instanton_action_rel"],
        "self_duality": asd <= tol["asd_ratio"],
        "gluing": glue <= tol["gluing_residual"],
        "scale_invariance": abs(S_small - S_big) / exact <= tol["instanton_action_rel"],
    }
    rep["checks"] = checks
    rep["pass"] = all(checks.values())
    write_json(Path(out) / "instanton_check.json", rep)
    grids = {"r4": quad.digest()}
    return rep, grids, ["instanton_check.json"], EXIT_PASS if rep["pass"] else EXIT_TOL


def cmd_landscape(cfg, out):
    """Landscape CSV of F, M, mu, det M and the G functions; critical points JSON."""
    _, base = background(cfg)
    quad = reduced_quad(cfg)
    g = cfg.grids
    reports, crit, info = reduced.landscape_scan(base, radius=g["landscape_radius"], n=g["landscape_n"],
                                                 which_G="G1", quad=quad)
    reduced.write_landscape_csv(Path(out) / "landscape.csv", reports)
    reduced.write_critical_json(Path(out) / "critical_points.json", crit, info)
    grids = {"reduced": quad.digest(), "galerkin": base.space.quad.digest()}
    return {"n_points": len(reports), "n_critical": len(crit), "info": info}, grids, \
        ["landscape.csv", "critical_points.json"], EXIT_PASS


EXPANSION_COLUMNS = ["eps", "lambda", "J", "term1", "term2", "term3", "r1", "chern", "min_rayleigh"]


def log_slope(eps, values):
    return float(np.polyfit(np.log(eps), np.log(np.abs(values)), 1)[0])


def cmd_expansion_study(cfg, out, eps_list=None):
    """Energy expansion per eps with the fitted slope of |r1|."""
    eps_list = list(cfg.eps_list if eps_list is None else eps_list)
    if len(eps_list) < 3:
        raise ConfigError("expansion study needs at least three eps values")
    A0, base = background(cfg)
    gq = fixture_gauge(cfg, base)
    rq = ball_quadrature(nr=24, sphere=sphere_rule(14, 14, 28))
    rows, reports, grids = [], [], {"galerkin": base.space.quad.digest(), "reduced": rq.digest()}
    for eps in eps_list:
        As = small_potential(cfg, eps, A0, base)
        q = cfg.fixture_q(eps, gq)
        q.check(cfg.D1, cfg.D2, cfg.d0, cfg.lam0)
        quad = bubble_quad(cfg, q)
        grids[f"bubble eps={eps!r}"] = quad.digest()
        rep = gluing.j_eps(q, As, base, quad=quad, reduced_quad=rq, D1=cfg.D1, D2=cfg.D2, d0=cfg.d0, lam0=cfg.lam0)
        reports.append(rep)
        row = rep.row()
        row["min_rayleigh"] = ""
        rows.append(row)
    with open(Path(out) / "expansion.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=EXPANSION_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if v != "" else "") for k, v in r.items()})
    slope = log_slope(eps_list, [r.r1 for r in reports])
    ok = slope >= cfg.tolerances["r1_slope"]
    summary = {"slope": slope, "pass": bool(ok), "g": gq, "reports": [json.loads(r.to_json()) for r in reports]}
    write_json(Path(out) / "expansion.json", summary)
    return summary, grids, ["expansion.csv", "expansion.json"], EXIT_PASS if ok else EXIT_TOL


def cmd_probe(cfg, out):
    """Hessian positivity on the frame complement and the gradient envelope."""
    A0, base = background(cfg)
    gq = fixture_gauge(cfg, base)
    hess, grad, grids = {}, {}, {}
    for eps in cfg.probe_eps:
        q = cfg.fixture_q(eps, gq).check(cfg.D1, cfg.D2, cfg.d0, cfg.lam0)
        At = gluing.build_glued(q, small_potential(cfg, eps, A0, base))
        quad = gluing.probe_quadrature(q)
        grids[f"probe eps={eps!r}"] = quad.digest()
        r = gluing.hessian_positivity_probe(At, n_samples=cfg.n_probe, seed=cfg.seed, quad=quad)
        fq = r["frame_quotients"]
        r["near_kernel"] = {k: bool(v * 10 <= r["min_quotient"]) for k, v in fq.items()}
        hess[repr(eps)] = r
    for eps in cfg.eps_list:
        q = cfg.fixture_q(eps, gq).check(cfg.D1, cfg.D2, cfg.d0, cfg.lam0)
        At = gluing.build_glued(q, small_potential(cfg, eps, A0, base))
        ge = gluing.gradient_envelope(At, n_samples=cfg.n_gradient, seed=cfg.seed)
        ge["C"] = ge["sup"] / np.sqrt(eps)
        grad[repr(eps)] = ge
    Cs = [v["C"] for v in grad.values()]
    spread = max(Cs) / min(Cs)
    positive = all(v["min_quotient"] > 0 for v in hess.values())
    ok = positive and spread < cfg.tolerances["envelope_ratio"]
    rep = {"hessian": hess, "gradient": grad, "envelope_spread": spread, "all_positive": positive, "pass": ok}
    write_json(Path(out) / "probe.json", rep)
    return rep, grids, ["probe.json"], EXIT_PASS if ok else EXIT_TOL


def cmd_small_solution(cfg, out):
    """Picard runs over the configured eps list and the fitted O(eps) slope."""
    A0, base = background(cfg)
    runs = []
    for eps in cfg.small_eps_list:
        s = harmonic.small_solution_picard(eps, A0, tol=1e-12, base=base, eps_max=cfg.eps_max)
        runs.append({"eps": eps, "iterations": s.iterations, "l21_norm": s.l21_norm(), "history": s.history})
    zero = harmonic.small_solution_picard(0.0, A0, base=base, eps_max=cfg.eps_max)
    same = bool(np.array_equal(zero.potential.coef, base.potential.coef))
    slope = log_slope([r["eps"] for r in runs], [r["l21_norm"] for r in runs])
    lo, hi = cfg.tolerances["small_slope"]
    ok = lo <= slope <= hi and same
    rep = {"runs": runs, "slope": slope, "eps0_identical": same, "d0_residuals": base.residuals, "pass": ok}
    write_json(Path(out) / "small_solution.json", rep)
    grids = {"galerkin": base.space.quad.digest()}
    return rep, grids, ["small_solution.json"], EXIT_PASS if ok else EXIT_TOL


COMMANDS = {
    "instanton-check": cmd_instanton_check,
    "landscape": cmd_landscape,
    "expansion-study": cmd_expansion_study,
    "probe": cmd_probe,
    "small-solution": cmd_small_solution,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="python3 -m ymbubble", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--out", help="output directory (default: config out_dir)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for chunked reductions")
    ap.add_argument("--seed", type=int, help="random seed for probes and sampled checks")
    ap.add_argument("--tolerance-profile", choices=["default", "strict"])
    return ap


def run(command, cfg, out, threads=1):
    """Run one command; returns ``(report, exit_code)``."""
    set_threads(threads)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with threadpool_limits(limits=1):
        rep, grids, outputs, code = COMMANDS[command](cfg, out)
    write_manifest(out, cfg, command, grids, outputs)
    return rep, code


def main(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.time()
    try:
        cfg = load_config(args.config, seed=args.seed, tolerance_profile=args.tolerance_profile)
        out = args.out or cfg.out_dir
        rep, code = run(args.command, cfg, out, args.threads)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (harmonic.SolverError, np.linalg.LinAlgError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except gluing.Inadmissible as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    status = {EXIT_PASS: "PASS", EXIT_TOL: "FAIL (tolerance)"}[code]
    print(f"{args.command}: {status} in {time.time() - t0:.1f}s -> {out}")
    return code
