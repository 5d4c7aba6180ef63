"""Finite-dimensional reduction data: F(p), M(A0, p), the mu spectrum and G-functions.

Inner product bookkeeping.  ``F(p) = int |(dh_p)^-|^2`` uses the su(2) form
(factor 2).  The moment matrix ``m_ij = int ((dA_0,j)^-, (dh_p,i)^-)`` pairs
real-valued 2-forms (no factor 2).  With ``R`` the rotation of ``g``, the
rotation pairing is then

    T(g) = int ((dA_0)^-, g (dh_p)^- g^-1) = 2 tr(R M),

and minimizing ``2 lam^4 F - 4 eps lam^2 T`` over ``lam`` and ``g`` gives
``-2 eps^2 T*^2 / F`` with ``T* = 2 (sqrt mu1 + sqrt mu2 +- sqrt mu3)``, that
is ``-8 eps^2 G_1^{sign det M}``.
"""

from dataclasses import dataclass, field, asdict
import csv
import json

import numpy as np
from scipy import optimize

from . import algebra
from .forms import asd, d_of_jac
from .harmonic import h_p_field
from .parallel import chunk_map
from .quadrature import ball_quadrature, sphere_rule

G_NAMES = ("G1+", "G1-", "G2+", "G2-", "G3-", "G1_0", "G2_0")
F0_EXACT = 24 * np.pi ** 2  # F at the center: |Im(dxbar ^ dx)|^2 = 48 times vol(B^4)


def default_quadrature():
    return ball_quadrature(nr=12, sphere=sphere_rule(10, 10, 20))


def _check_p(p, d0):
    p = np.asarray(p, dtype=float)
    if d0 is not None and np.linalg.norm(p) > 1 - d0 + 1e-12:
        raise ValueError(f"|p| = {np.linalg.norm(p):.4g} exceeds 1 - d0 = {1 - d0}")
    if np.linalg.norm(p) >= 1:
        raise ValueError("p must lie inside the unit ball")
    return p


def asd_dh_p(p, x):
    """``(dh_p)^-`` at points ``x``, shape (N, 6, 3)."""
    _, jac = h_p_field(p)(x)
    return asd(d_of_jac(jac))


def big_F(p, quad=None, d0=None):
    """``F(p) = int_{B^4} |(dh_p)^-|^2`` with the su(2) inner product."""
    p = _check_p(p, d0)
    quad = quad or default_quadrature()
    x, w = quad.nodes, quad.weights
    parts = chunk_map(lambda s: w[s] @ (2 * np.sum(asd_dh_p(p, x[s]) ** 2, axis=(1, 2))), len(w))
    return float(sum(parts))


class _CurvatureTable:
    """``(dA_0)^-`` cached at the nodes of one quadrature."""

    def __init__(self, sol, quad):
        self.quad = quad
        if sol is None:
            self.asd = np.zeros((quad.n, 6, 3))
        else:
            self.asd = asd(sol.curvature(quad.nodes))


_TABLES = {}


def _table(sol, quad):
    key = (id(sol), quad.digest())
    if key not in _TABLES:
        _TABLES[key] = _CurvatureTable(sol, quad)
    return _TABLES[key]


def moment_matrix(sol, p, quad=None, d0=None, with_F=False):
    """``m_ij = int ((dA_0,j)^-, (dh_p,i)^-)``; ``sol`` is a linear-problem solution.

    ``sol=None`` is accepted as flat data (``A0 = 0``), which gives the zero
    matrix.  With ``with_F`` the same pass also returns ``F(p)``.
    """
    p = _check_p(p, d0)
    quad = quad or default_quadrature()
    tab = _table(sol, quad)
    x, w = quad.nodes, quad.weights

    def part(s):
        h = asd_dh_p(p, x[s])
        Mp = np.einsum("n,npi,npj->ij", w[s], h, tab.asd[s])
        Fp = w[s] @ (2 * np.sum(h ** 2, axis=(1, 2)))
        return Mp, Fp

    parts = chunk_map(part, len(w))
    M = sum(q[0] for q in parts)
    F = float(sum(q[1] for q in parts))
    return (M, F) if with_F else M


def mu_spectrum(M):
    """Descending eigenvalues of ``M^T M``, clipped at zero."""
    M = np.asarray(M, dtype=float)
    s = np.linalg.svd(M, compute_uv=False)
    return np.sort(s ** 2)[::-1]


def g_functions(mu, detM, F):
    """The seven concentration functions at one point."""
    if not F > 0:
        raise ValueError("F must be positive")
    a, b, c = np.sqrt(np.clip(np.asarray(mu, dtype=float), 0, None))
    return {
        "G1+": (a + b + c) ** 2 / F,
        "G1-": (a + b - c) ** 2 / F,
        "G2+": (a - b - c) ** 2 / F,
        "G2-": (a - b + c) ** 2 / F,
        "G3-": (-a + b + c) ** 2 / F,
        "G1_0": (a + b) ** 2 / F,
        "G2_0": (a - b) ** 2 / F,
    }


def g1_signed(G, detM):
    """``G_1^+`` where ``det M >= 0`` and ``G_1^-`` otherwise."""
    return G["G1+"] if detM >= 0 else G["G1-"]


@dataclass
class MomentReport:
    p: list
    F: float
    M: list
    mu: list
    detM: float
    G: dict

    def to_row(self):
        row = {f"p{k}": self.p[k] for k in range(4)}
        row["F"] = self.F
        for i in range(3):
            for j in range(3):
                row[f"m{i + 1}{j + 1}"] = self.M[i][j]
        for i in range(3):
            row[f"mu{i + 1}"] = self.mu[i]
        row["detM"] = self.detM
        row.update(self.G)
        return row


def moment_report(sol, p, quad=None, d0=None):
    M, F = moment_matrix(sol, p, quad, d0, with_F=True)
    mu = mu_spectrum(M)
    det = float(np.linalg.det(M))
    return MomentReport(list(map(float, p)), F, M.tolist(), mu.tolist(), det, g_functions(mu, det, F))


# ---------------------------------------------------------------- rotation optimization

def so3_linear_max(N):
    """Maximize ``tr(N^T R)`` over rotations; returns (value, R).

    With ``N = U S V^T`` the maximizer is ``U diag(1, 1, d) V^T`` where ``d``
    fixes the determinant, so the value is ``s1 + s2 + d s3``.
    """
    N = np.asarray(N, dtype=float)
    U, s, Vt = np.linalg.svd(N)
    d = np.sign(np.linalg.det(U @ Vt))
    d = 1.0 if d == 0 else d
    R = U @ np.diag([1.0, 1.0, d]) @ Vt
    return float(s[0] + s[1] + d * s[2]), R


def rotation_pairing(M, R):
    """``T(g) = 2 tr(R M)`` for ``R = rotation_of(g)``."""
    return float(2 * np.trace(np.asarray(R) @ np.asarray(M)))


def rotation_pairing_direct(sol, p, g, quad=None):
    """``int ((dA_0)^-, g (dh_p)^- g^-1)`` by quadrature; the two-route check of :func:`rotation_pairing`."""
    quad = quad or default_quadrature()
    tab = _table(sol, quad)
    x, w = quad.nodes, quad.weights
    h = asd_dh_p(np.asarray(p, dtype=float), x)
    gh = algebra.adjoint(np.asarray(g, dtype=float), h)
    return float(w @ (2 * np.sum(tab.asd * gh, axis=(1, 2))))


def reduced_energy(lam, F, T, eps):
    """``2 lam^4 F - 4 eps lam^2 T``."""
    return 2 * lam ** 4 * F - 4 * eps * lam ** 2 * T


def optimal_bubble(F, M, eps, D1=0.5, D2=2.0):
    """Optimal scale, gauge rotation and reduced energy at one point.

    ``T`` is maximized over rotations, then ``2 lam^4 F - 4 eps lam^2 T`` is
    minimized in closed form: ``lam*^2 = eps T / F``, value ``-2 eps^2 T^2 / F``.
    ``T <= 0`` has no interior minimum and is reported as the no-bubble case.
    """
    if not F > 0:
        raise ValueError("F must be positive")
    val, R = so3_linear_max(np.asarray(M).T)
    T = 2 * val
    g = algebra.quat_of_rotation(R)
    if T <= 0:
        return {"lam": 0.0, "lam2": 0.0, "g": g.tolist(), "R": R.tolist(), "T": T, "value": 0.0,
                "in_window": False, "no_bubble": True}
    lam2 = eps * T / F
    return {"lam": float(np.sqrt(lam2)), "lam2": float(lam2), "g": g.tolist(), "R": R.tolist(), "T": float(T),
            "value": float(-2 * eps ** 2 * T ** 2 / F), "in_window": bool(D1 * eps < lam2 < D2 * eps),
            "no_bubble": False}


def golden_bubble(F, T, eps, lam_max=1.0, n_coarse=400):
    """Golden-section minimization of the reduced energy in ``lam`` on ``(0, lam_max]``.

    A coarse scan picks the bracketing triple, so nothing from the closed form
    is reused; this is the independent check of :func:`optimal_bubble`.
    """
    f = lambda l: reduced_energy(l, F, T, eps)
    grid = np.linspace(0.0, lam_max, n_coarse + 1)
    k = int(np.argmin([f(l) for l in grid]))
    k = min(max(k, 1), n_coarse - 1)
    res = optimize.minimize_scalar(f, bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden",
                                   options={"xtol": 1e-12})
    return float(res.x), float(res.fun)


# ---------------------------------------------------------------- landscape

@dataclass
class CriticalPoint:
    p0: list
    which_G: str
    value: float
    hessian_eigs: list
    classification: str
    theorem_case: list
    grad_norm: float
    mu: list = field(default_factory=list)
    detM: float = 0.0
    status: str = "ok"


def _evaluate_G(sol, p, which, quad):
    r = moment_report(sol, p, quad)
    if which == "G1":
        return g1_signed(r.G, r.detM), r
    return r.G[which], r


def scan_grid(radius, n):
    t = np.linspace(-radius, radius, n)
    P = np.stack(np.meshgrid(t, t, t, t, indexing="ij"), -1).reshape(-1, 4)
    return P[np.linalg.norm(P, axis=-1) <= radius + 1e-12]


def theorem_cases(mu, detM, which, classification, gap=1e-6):
    """Which hypothesis clauses hold at a critical point of ``which``.

    Strict inequalities closer than the relative ``gap`` are reported as
    indeterminate rather than decided.
    """
    s = np.sqrt(np.clip(mu, 0, None))
    scale = max(mu[0], 1e-300)

    def gt(a, b, sc=scale):
        d = a - b
        if abs(d) <= gap * sc:
            return None
        return d > 0

    sdet = 0 if abs(detM) <= gap * max(s[0], 1e-300) ** 3 else int(np.sign(detM))
    nondeg = classification in ("max", "min", "saddle")
    out = []

    def add(label, conds):
        if any(c is None for c in conds):
            out.append(label + " indeterminate")
        elif all(conds):
            out.append(label)

    if sdet > 0:
        if which in ("G1+", "G1") and classification == "max":
            out.append("Theorem 1 (1)")
        if which in ("G1+", "G1") and nondeg:
            out.append("Theorem 3 (1)(a)")
        if which == "G2+" and nondeg:
            add("Theorem 3 (1)(b)", [gt(s[0], s[1] + s[2], s[0])])
    elif sdet < 0:
        if which in ("G1-", "G1") and classification == "max":
            out.append("Theorem 1 (2)")
        if which in ("G1-", "G1") and nondeg:
            add("Theorem 3 (2)(a)", [gt(mu[1], mu[2])])
        if which == "G2-" and nondeg:
            add("Theorem 3 (2)(b)", [gt(mu[0], mu[1]), gt(mu[1], mu[2])])
        if which == "G3-" and nondeg:
            add("Theorem 3 (2)(c)", [gt(mu[0], mu[1]), gt(s[1] + s[2], s[0], s[0])])
    else:
        if which == "G1_0" and nondeg:
            add("Theorem 3 (3)(a)", [gt(mu[1], 0.0)])
        if which == "G2_0" and nondeg:
            add("Theorem 3 (3)(b)", [gt(mu[0], mu[1]), gt(mu[1], 0.0)])
    return out


def _fd_hessian(f, x, h):
    n = len(x)
    H = np.zeros((n, n))
    f0 = f(x)
    E = np.eye(n) * h
    for i in range(n):
        H[i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h ** 2
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h * h)
    return H


def _fd_grad(f, x, h):
    return np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(len(x))])


def landscape_scan(sol, radius=0.7, n=7, which_G="G1", quad=None, fd_step=1e-3, refine=True,
                   degenerate_tol=1e-14):
    """Evaluate G on a grid in ``B_radius``, refine local extrema and classify them.

    Returns ``(reports, critical_points, info)``.
    """
    quad = quad or default_quadrature()
    P = scan_grid(radius, n)
    reports = [moment_report(sol, p, quad) for p in P]
    vals = np.array([g1_signed(r.G, r.detM) if which_G == "G1" else r.G[which_G] for r in reports])
    info = {"n_points": len(P), "radius": radius, "which_G": which_G, "degenerate": False}
    if np.max(np.abs(vals)) <= degenerate_tol:
        info["degenerate"] = True
        return reports, [], info
    h = 2 * radius / (n - 1)
    crit = []
    seeds = []
    for k, p in enumerate(P):
        nb = np.all(np.abs(P - p) <= h * 1.0001, axis=-1)
        nb[k] = False
        if not nb.any():
            continue
        if vals[k] >= vals[nb].max() or vals[k] <= vals[nb].min():
            seeds.append((k, 1.0 if vals[k] >= vals[nb].max() else -1.0))

    def f(x):
        return _evaluate_G(sol, x, which_G, quad)[0]

    for k, sign in seeds:
        x0 = P[k]
        status = "ok"
        if refine:
            try:
                res = optimize.minimize(lambda x: -sign * f(x), x0, method="BFGS",
                                        jac=lambda x: -sign * _fd_grad(f, x, fd_step),
                                        options={"gtol": 1e-9, "maxiter": 200})
                x0 = res.x
            except ValueError:
                status = "left domain"
            if np.linalg.norm(x0) > radius:
                status = "left domain"
        if status != "ok":
            crit.append(CriticalPoint(x0.tolist(), which_G, float("nan"), [], "degenerate", [], float("nan"),
                                      status=status))
            continue
        val, rep = _evaluate_G(sol, x0, which_G, quad)
        g = _fd_grad(f, x0, fd_step)
        H = _fd_hessian(f, x0, fd_step)
        ev = np.linalg.eigvalsh(H)
        tol = 1e-6 * max(np.max(np.abs(ev)), 1e-300)
        if np.all(ev < -tol):
            cls = "max"
        elif np.all(ev > tol):
            cls = "min"
        elif np.all(np.abs(ev) > tol):
            cls = "saddle"
        else:
            cls = "degenerate"
        cases = theorem_cases(np.array(rep.mu), rep.detM, which_G, cls)
        crit.append(CriticalPoint(x0.tolist(), which_G, float(val), ev.tolist(), cls, cases,
                                  float(np.linalg.norm(g)), rep.mu, rep.detM))
    # merge duplicates found from neighbouring seeds
    merged = []
    for c in crit:
        if c.status == "ok" and any(np.linalg.norm(np.subtract(c.p0, m.p0)) < 1e-4 for m in merged if m.status == "ok"):
            continue
        merged.append(c)
    return reports, merged, info


def write_landscape_csv(path, reports):
    rows = [r.to_row() for r in reports]
    if not rows:
        rows = []
    cols = [f"p{k}" for k in range(4)] + ["F"] + [f"m{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)] \
        + ["mu1", "mu2", "mu3", "detM"] + list(G_NAMES)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: repr(float(r[k])) for k in cols})


def write_critical_json(path, crit, info):
    with open(path, "w") as fh:
        json.dump({"info": info, "critical_points": [asdict(c) for c in crit]}, fh, indent=2)
