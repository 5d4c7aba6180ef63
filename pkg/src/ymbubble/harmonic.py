"""Harmonic extensions on B^4 and the boundary value problems for small solutions.

Three pieces live here:

* Poisson extension of arbitrary boundary data on S^3 (truncated zonal
  series or the direct kernel), plus closed forms for the two extensions the
  gluing construction needs, ``h_p`` and ``h_{lam,p}``.
* A Galerkin solver for the linear Dirichlet problem ``d*dA = 0`` with
  prescribed tangential trace, whose curvature ``dA`` is the object the
  reduction consumes.
* Picard iteration for the small solution of the coupled problem at
  coupling ``eps``.

The closed forms come from the Kelvin transform.  On ``|x| = 1`` one has
``|x - p|^2 = D(x)`` with ``D = 1 - 2 x.p + |p|^2 |x|^2``, and
``Im(conj(x - p|x|^2) dx) / D^2`` is componentwise harmonic.  For
``h_{lam,p}`` the boundary data split into ``(x - p)_k / (c - 2 x.p)`` pieces,
each extended through a point charge outside the ball plus a radial
correction integral.
"""

from dataclasses import dataclass, field
import hashlib

import numpy as np
from scipy.special import roots_legendre

from . import algebra
from .forms import (PAIRS, asd, d_of_jac, d2_jac_of_hess, full2, wedge_bracket,
                    cov_grad_arrays, curvature_arrays, d3_of_jac2)
from .instanton import QR, InstantonParams, eval_I2
from .parallel import chunk_map, ordered_sum
from .polyforms import PolyForm, exponents, monomials
from .quadrature import AREA_S3, ball_quadrature, sphere_rule


class NearBoundaryError(ValueError):
    """Kernel evaluation requested too close to the sphere."""


class SolverError(RuntimeError):
    """A linear or fixed-point solve failed."""


class NonContraction(SolverError):
    """Picard updates grew for three consecutive iterations."""


# ---------------------------------------------------------------- boundary data

@dataclass
class BoundaryForm:
    """Im H-valued 1-form data at the nodes of a sphere rule.

    ``values`` has shape (n, 4, 3): all four components, so the same object
    carries full Dirichlet data (for componentwise harmonic extension) or
    tangential data after :meth:`tangential`.
    """

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    def tangential(self):
        n = self.nodes
        normal = np.einsum("nk,nka->na", n, self.values)
        return BoundaryForm(n, self.weights, self.values - n[:, :, None] * normal[:, None, :])

    def digest(self):
        h = hashlib.sha256()
        for a in (self.nodes, self.weights, self.values):
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()

    def sup(self):
        return float(np.max(np.abs(self.values)))


def boundary_from_field(fn, sphere=None):
    sphere = sphere or sphere_rule(12, 12, 24)
    v, _ = fn(sphere.nodes)
    return BoundaryForm(sphere.nodes, sphere.weights, v)


def h_p_boundary(p, sphere=None):
    """``Im(conj(x - p) dx) / |x - p|^4`` at the sphere nodes."""
    sphere = sphere or sphere_rule(12, 12, 24)
    x = sphere.nodes
    y = x - np.asarray(p, dtype=float)
    s = np.sum(y * y, axis=-1)
    v = np.einsum("nm,kma->nka", y, QR) / s[:, None, None] ** 2
    return BoundaryForm(x, sphere.weights, v)


def h_lambda_p_boundary(lam, p, sphere=None):
    """The chart-2 instanton potential sampled on the sphere."""
    sphere = sphere or sphere_rule(12, 12, 24)
    v, _ = eval_I2(InstantonParams(tuple(p), lam), sphere.nodes)
    return BoundaryForm(sphere.nodes, sphere.weights, v)


# ---------------------------------------------------------------- Poisson extension

@dataclass
class HarmonicField:
    """A componentwise harmonic 1-form with an evaluator for values and jacobian."""

    evaluate: object
    boundary: BoundaryForm = None
    residual: float = 0.0
    info: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.evaluate(x)


def _zonal_series(x, zeta, L):
    """Truncated Poisson kernel sum_l (l+1) Z_l / 2pi^2 and its x-gradient.

    ``Z_l(x, zeta) = |x|^l U_l(x.zeta/|x|)`` by the three-term recurrence.
    """
    s = x @ zeta.T  # (N, M)
    q = np.sum(x * x, axis=-1)[:, None]
    z_prev = np.ones_like(s)
    z = 2 * s
    g_prev = np.zeros(s.shape + (4,))
    g = 2 * np.broadcast_to(zeta[None], s.shape + (4,)).copy()
    K = z_prev + 2 * z
    G = 2 * g
    for l in range(1, L):
        z_next = 2 * s * z - q * z_prev
        g_next = 2 * zeta[None] * z[..., None] + 2 * s[..., None] * g - 2 * x[:, None, :] * z_prev[..., None] - q[..., None] * g_prev
        z_prev, z = z, z_next
        g_prev, g = g, g_next
        K = K + (l + 2) * z
        G = G + (l + 2) * g
    if L == 0:
        K, G = np.ones_like(s), np.zeros(s.shape + (4,))
    return K / AREA_S3, G / AREA_S3


def _kernel(x, zeta):
    d = x[:, None, :] - zeta[None, :, :]
    d2 = np.sum(d * d, axis=-1)
    q = np.sum(x * x, axis=-1)[:, None]
    P = (1 - q) / (AREA_S3 * d2 ** 2)
    G = (-2 * x[:, None, :] / d2[..., None] ** 2 - 4 * (1 - q)[..., None] * d / d2[..., None] ** 3) / AREA_S3
    return P, G


def poisson_extend(bdry, method="series", degree=24, delta_near=0.05, chunk=256):
    """Componentwise harmonic extension of full 1-form boundary data.

    ``method="series"`` sums the zonal expansion of the Poisson kernel up to
    ``degree``; it reproduces boundary polynomials of degree <= ``degree``
    exactly when the sphere rule integrates degree ``2 * degree``.
    ``method="kernel"`` applies ``(1 - |x|^2)/(2 pi^2 |x - zeta|^4)`` directly
    and refuses targets with ``|x| >= 1 - delta_near``.
    """
    zeta, w, b = bdry.nodes, bdry.weights, bdry.values
    wb = w[:, None, None] * b

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if method == "kernel" and np.any(np.linalg.norm(x, axis=-1) >= 1 - delta_near):
            raise NearBoundaryError(f"kernel quadrature unreliable for |x| >= {1 - delta_near}")

        def part(s):
            if method == "series":
                K, G = _zonal_series(x[s], zeta, degree)
            elif method == "kernel":
                K, G = _kernel(x[s], zeta)
            else:
                raise ValueError(f"unknown method {method!r}")
            val = np.einsum("nm,mka->nka", K, wb)
            jac = np.einsum("nmi,mka->nika", G, wb)
            return val, jac

        parts = chunk_map(part, len(x), chunk)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    return HarmonicField(evaluate, bdry, info={"method": method, "degree": degree})


# ---------------------------------------------------------------- closed forms

def h_p_field(p):
    """Closed-form componentwise harmonic extension of the ``h_p`` boundary data."""
    p = np.asarray(p, dtype=float)
    pp = p @ p

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        q = np.sum(x * x, axis=-1)
        u = x - p[None] * q[:, None]
        D = 1 - 2 * x @ p + pp * q
        L = np.einsum("nm,kma->nka", u, QR)
        val = L / D[:, None, None] ** 2
        # d_mu u_k = delta_mu,k - 2 p_k x_mu
        du = np.eye(4)[None] - 2 * x[:, :, None] * p[None, None, :]
        dD = -2 * p[None] + 2 * pp * x
        jac = np.einsum("nim,kma->nika", du, QR)
        jac = jac / D[:, None, None, None] ** 2 - 2 * dD[:, :, None, None] * val[:, None] / D[:, None, None, None]
        return val, jac

    return HarmonicField(evaluate, info={"closed_form": "h_p", "p": p.tolist()})


_GL_T, _GL_W = roots_legendre(20)
_GL_T = 0.5 * (_GL_T + 1)
_GL_W = 0.5 * _GL_W


def _charge_extension(x, p, c):
    """Harmonic extension of ``(x - p)_k / (c - 2 x.p)`` from S^3, k = 0..3.

    Returns values (N, 4) and gradients (N, 4 [mu], 4 [k]).
    """
    pn = np.linalg.norm(p)
    q2 = np.sum(x * x, axis=-1)
    y = x - p[None]
    if pn < 1e-14:
        return y / c, np.broadcast_to(np.eye(4) / c, (len(x), 4, 4)).copy()
    ratio = c / pn
    tau = 0.5 * (ratio + np.sqrt(ratio * ratio - 4))
    kap = tau / pn
    q = tau * p / pn
    d = x - q[None]
    d2 = np.sum(d * d, axis=-1)
    u = 1 / d2
    du = -2 * d / d2[:, None] ** 2
    # v_k = -int_0^1 t (t x - q)_k / |t x - q|^4 dt and its gradient
    z = _GL_T[None, :, None] * x[:, None, :] - q[None, None, :]  # (N, T, 4)
    z2 = np.sum(z * z, axis=-1)
    v = -np.einsum("t,ntk->nk", _GL_W * _GL_T, z / z2[..., None] ** 2)
    wt = (_GL_W * _GL_T ** 2)[None] / z2 ** 2
    dv = -np.sum(wt, axis=1)[:, None, None] * np.eye(4)[None] + 4 * np.matmul(np.transpose((wt / z2)[..., None] * z, (0, 2, 1)), z)
    val = kap * (y * u[:, None] + (1 - q2)[:, None] * v)
    grad = kap * (np.eye(4)[None] * u[:, None, None] + du[:, :, None] * y[:, None, :]
                  - 2 * x[:, :, None] * v[:, None, :] + (1 - q2)[:, None, None] * dv)
    return val, grad


def h_lambda_p_field(lam, p, chunk=4096):
    """Closed-form harmonic extension of the chart-2 instanton trace on S^3.

    On the sphere ``lam^2 / (|y|^2 (lam^2 + |y|^2)) = 1/(a - 2x.p) - 1/(b - 2x.p)``
    with ``a = 1 + |p|^2`` and ``b = a + lam^2``.
    """
    p = np.asarray(p, dtype=float)
    a = 1 + p @ p
    b = a + lam ** 2

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))

        def part(s):
            va, ga = _charge_extension(x[s], p, a)
            vb, gb = _charge_extension(x[s], p, b)
            H, dH = va - vb, ga - gb
            Q = np.transpose(QR, (1, 0, 2)).reshape(4, 12)
            val = (H @ Q).reshape(len(H), 4, 3)
            jac = (dH.reshape(-1, 4) @ Q).reshape(len(H), 4, 4, 3)
            return val, jac

        parts = chunk_map(part, len(x), chunk)
        return np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts])

    return HarmonicField(evaluate, info={"closed_form": "h_lambda_p", "lam": lam, "p": p.tolist()})


def check_h_scaling(p, lams, d0=0.5, sphere=None, n_interior=200, seed=0):
    """Log-log slope of ``sup |h_{lam,p} - lam^2 h_p|`` over ``B_{1 - d0/2}`` against ``lam``.

    The difference is componentwise harmonic, so its supremum sits on the
    sphere of radius ``1 - d0/2``; a few interior points are added anyway.
    """
    lams = np.asarray(lams, dtype=float)
    if len(lams) < 2 or np.ptp(np.log(lams)) == 0:
        raise ValueError("the fit needs at least two distinct lambdas")
    sphere = sphere or sphere_rule(10, 10, 20)
    rad = 1 - d0 / 2
    rng = np.random.default_rng(seed)
    inner = rng.normal(size=(n_interior, 4))
    inner *= (rad * rng.uniform(size=n_interior) ** 0.25 / np.linalg.norm(inner, axis=-1))[:, None]
    pts = np.concatenate([rad * sphere.nodes, inner])
    hp, _ = h_p_field(p)(pts)
    sups = []
    for lam in lams:
        hl, _ = h_lambda_p_field(lam, p)(pts)
        sups.append(np.max(np.abs(hl - lam ** 2 * hp)))
    sups = np.array(sups)
    slope = np.polyfit(np.log(lams), np.log(sups), 1)[0]
    return float(slope), sups


# ---------------------------------------------------------------- Galerkin solver

def _antisym_pairs(jac):
    """2-form pair components from a (..., 4, 4, ...) jacobian block."""
    return jac[..., PAIRS_I, PAIRS_J, :] - jac[..., PAIRS_J, PAIRS_I, :]


PAIRS_I = np.array([p[0] for p in PAIRS])
PAIRS_J = np.array([p[1] for p in PAIRS])


@dataclass
class GalerkinSpace:
    """Orthonormal polynomial 1-forms with zero tangential trace on S^3.

    Generators are ``(1 - |x|^2) x^m dx^mu`` and ``x^m (x . dx)``.  The
    stiffness matrix ``K_ab = int (d phi_a, d phi_b)`` is singular along exact
    forms; its pseudo-inverse picks the solution L^2-orthogonal to them,
    which is the Coulomb gauge.  Monomial tables at the quadrature nodes are
    kept so weak integrals reduce to small matrix products.
    """

    degree: int
    coef: np.ndarray  # (nb, m, 4) over monomials of degree + 2
    quad: object
    K: np.ndarray
    Kpinv: np.ndarray
    rank: int
    M: np.ndarray
    dM: np.ndarray

    @property
    def mono_degree(self):
        return self.degree + 2

    @property
    def nb(self):
        return self.coef.shape[0]

    def form(self, c):
        """PolyForm ``sum_b c[b, a] phi_b e_a``."""
        coef = np.tensordot(self.coef, c, axes=(0, 0))  # (m, 4, 3)
        return PolyForm(coef, self.mono_degree)

    def weak_pairing(self, G=None, S=None):
        """``int (G, d phi_b) + int (S, phi_b)`` with real components, per Lie direction.

        ``G`` is a 2-form (N, 6, 3) and ``S`` a 1-form (N, 4, 3) at the nodes.
        """
        w = self.quad.weights
        m = self.M.shape[1]
        R = np.zeros((m, 4, 3))
        if G is not None:
            Gf = full2(G) * w[:, None, None, None]  # [n, k, v, a]
            R += np.tensordot(self.dM, Gf, axes=([0, 1], [0, 1]))
        if S is not None:
            R += np.tensordot(self.M, S * w[:, None, None], axes=(0, 0))
        return self.coef.reshape(self.nb, -1) @ R.reshape(-1, 3)


_SPACE_CACHE = {}


def galerkin_space(degree=4, quad=None, rtol=1e-10):
    """Build (and memoize) the zero-trace polynomial space of a given degree."""
    key = (degree, None if quad is None else quad.digest())
    if key in _SPACE_CACHE:
        return _SPACE_CACHE[key]
    quad = quad or ball_quadrature(nr=degree + 4, sphere=sphere_rule(degree + 4, degree + 4, 2 * degree + 8))
    md = degree + 2
    E = exponents(md)
    m = len(E)
    idx = {tuple(e): k for k, e in enumerate(E)}
    gens = []
    for e in exponents(degree):
        for mu in range(4):
            g = np.zeros((m, 4))
            g[idx[tuple(e)], mu] += 1.0
            for j in range(4):
                f = list(e)
                f[j] += 2
                g[idx[tuple(f)], mu] -= 1.0
            gens.append(g)
    for e in exponents(degree - 1):
        g = np.zeros((m, 4))
        for mu in range(4):
            f = list(e)
            f[mu] += 1
            g[idx[tuple(f)], mu] += 1.0
        gens.append(g)
    gens = np.array(gens)
    x, w = quad.nodes, quad.weights
    M, dM = monomials(x, md, 1)
    Gm = (M * w[:, None]).T @ M
    gram = sum(gens[:, :, v] @ Gm @ gens[:, :, v].T for v in range(4))
    s, U = np.linalg.eigh(gram)
    keep = s > rtol * s.max()
    T = U[:, keep] / np.sqrt(s[keep])
    coef = np.tensordot(T, gens, axes=(0, 0))  # (nb, m, 4)
    # stiffness of monomial forms: delta_vv' S[m,m'] - P[v',m; v,m']
    dMf = dM.reshape(len(x), 4 * m)
    P = (dMf * w[:, None]).T @ dMf
    P = P.reshape(4, m, 4, m)
    S = np.einsum("kmkn->mn", P)
    Kmono = np.einsum("vw,mn->mvnw", np.eye(4), S) - np.transpose(P, (1, 2, 3, 0))
    C = coef.reshape(coef.shape[0], -1)
    K = C @ Kmono.reshape(4 * m, 4 * m) @ C.T
    K = 0.5 * (K + K.T)
    ev, V = np.linalg.eigh(K)
    pos = ev > 1e-10 * ev.max()
    Kpinv = (V[:, pos] / ev[pos]) @ V[:, pos].T
    space = GalerkinSpace(degree, coef, quad, K, Kpinv, int(pos.sum()), M, dM)
    _SPACE_CACHE[key] = space
    return space


def fit_extension(bdry, degree=4):
    """Polynomial 1-form whose tangential trace fits ``bdry`` in least squares."""
    z, w = bdry.nodes, bdry.weights
    M = monomials(z, degree)
    tb = bdry.tangential().values  # (n, 4, 3)
    m = M.shape[1]
    # unknown coef[m, nu] per Lie direction; tangential projection P = I - z z^T
    P = np.eye(4)[None] - z[:, :, None] * z[:, None, :]
    A = np.einsum("nm,nkv->nkmv", M, P).reshape(len(z) * 4, m * 4)
    sw = np.sqrt(np.repeat(w, 4))
    coef = np.empty((m, 4, 3))
    for a in range(3):
        sol, *_ = np.linalg.lstsq(A * sw[:, None], tb[:, :, a].reshape(-1) * sw, rcond=None)
        coef[:, :, a] = sol.reshape(m, 4)
    return PolyForm(coef, degree)


@dataclass
class D0Solution:
    """Solution of the linear problem: the potential and its residual report."""

    potential: PolyForm
    extension: PolyForm
    space: GalerkinSpace
    residuals: dict

    def curvature(self, x):
        """``dA`` at points ``x`` as a (N, 6, 3) array."""
        _, jac = self.potential(x)
        return d_of_jac(jac)


def _as_extension(A0, fit_degree):
    if isinstance(A0, PolyForm):
        return A0
    if isinstance(A0, BoundaryForm):
        return fit_extension(A0, fit_degree)
    if hasattr(A0, "extension"):
        return A0.extension()
    raise TypeError("boundary data must be a PolyForm, a BoundaryForm or expose extension()")


def solve_D0(A0, degree=4, quad=None, fit_degree=4):
    """Minimize ``int |dA|^2`` over potentials with tangential trace ``A0``.

    ``A0`` may be a :class:`PolyForm` (its own trace is used), a
    :class:`BoundaryForm` (fitted by a polynomial extension first) or any
    object with an ``extension()`` method returning a PolyForm.  The
    minimizer is unique up to exact forms; only its curvature is used
    downstream.
    """
    E = _as_extension(A0, fit_degree)
    space = galerkin_space(degree, quad)
    _, jE = E(space.quad.nodes)
    b = space.weak_pairing(G=d_of_jac(jE))
    c = -space.Kpinv @ b
    if not np.all(np.isfinite(c)):
        raise SolverError("linear solve produced non-finite coefficients")
    A = E + space.form(c)
    res = d0_residuals(A, E, space.quad)
    return D0Solution(A, E, space, res)


def d0_residuals(A, E, quad, sphere=None):
    """Closedness and coclosedness of ``dA`` in L^2(B^4) and the trace mismatch on S^3."""
    x, w = quad.nodes, quad.weights
    H = A.hessian(x)
    jac2 = d2_jac_of_hess(H)
    closed = d3_of_jac2(jac2)
    W = full2(jac2)
    codiff = -np.einsum("nllka->nka", W)
    sphere = sphere or sphere_rule(8, 8, 16)
    z = sphere.nodes
    diff = A.values(z) - E.values(z)
    normal = np.einsum("nk,nka->na", z, diff)
    tang = diff - z[:, :, None] * normal[:, None, :]
    return {
        "closed": float(np.sqrt(w @ np.sum(closed ** 2, axis=(1, 2)))),
        "coclosed": float(np.sqrt(w @ np.sum(codiff ** 2, axis=(1, 2)))),
        "trace": float(np.sqrt(sphere.weights @ np.sum(tang ** 2, axis=(1, 2)))),
    }


def dirichlet_energy(A, quad=None):
    """``int |dA|^2`` with the su(2) factor."""
    quad = quad or ball_quadrature(nr=10, sphere=sphere_rule(8, 8, 16))
    _, jac = A(quad.nodes)
    dA = d_of_jac(jac)
    return float(quad.weights @ (2 * np.sum(dA ** 2, axis=(1, 2))))


def harmonic_energy_extension(A0, fit_degree=4, quad=None):
    """Energy of the componentwise harmonic extension of the tangential data (zero normal part).

    Used as the comparison in the minimization property of :func:`solve_D0`.
    """
    E = _as_extension(A0, fit_degree)
    sphere = sphere_rule(12, 12, 24)
    v = E.values(sphere.nodes)
    normal = np.einsum("nk,nka->na", sphere.nodes, v)
    tang = v - sphere.nodes[:, :, None] * normal[:, None, :]
    field_ = poisson_extend(BoundaryForm(sphere.nodes, sphere.weights, tang), degree=fit_degree + 4)
    quad = quad or ball_quadrature(nr=10, sphere=sphere_rule(8, 8, 16))
    _, jac = field_(quad.nodes)
    dA = d_of_jac(jac)
    return float(quad.weights @ (2 * np.sum(dA ** 2, axis=(1, 2))))


# ---------------------------------------------------------------- Picard iteration

@dataclass
class SmallSolution:
    potential: PolyForm
    base: D0Solution
    eps: float
    iterations: int
    history: list
    omega: PolyForm

    def l21_norm(self, quad=None):
        """Discrete ``(||grad w||^2 + ||w||^2)^(1/2)`` of ``w = A_eps - A_0``."""
        quad = quad or self.base.space.quad
        v, j = self.omega(quad.nodes)
        w = quad.weights
        return float(np.sqrt(w @ (2 * np.sum(j ** 2, axis=(1, 2, 3))) + w @ (2 * np.sum(v ** 2, axis=(1, 2)))))


def picard_source(space, A_vals, A_jac, eps):
    """Weak nonlinear term ``(1/2) int ([A,A], d eta) + int (F_A, [A, eta])``.

    Returned per basis function and Lie direction with the su(2) factor 2
    removed, matching the real stiffness matrix.
    """
    half = 0.5 * wedge_bracket(A_vals, A_vals)
    F = d_of_jac(A_jac) + eps * half
    S = np.sum(algebra.bracket(full2(F), A_vals[:, :, None, :]), axis=1)  # sum_j [F_jk, A_j]
    return space.weak_pairing(G=half, S=S)


def small_solution_picard(eps, A0, tol=1e-10, base=None, degree=4, eps_max=0.1, max_iter=60):
    """Small solution ``A_eps = A_0 + w`` by Picard iteration on the weak equations.

    Each step solves ``K c = -eps N(A_0 + w)`` in the zero-trace space; the
    pseudo-inverse keeps ``w`` in the Coulomb gauge.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps > eps_max:
        raise NonContraction(f"eps = {eps} exceeds the configured eps_max = {eps_max}")
    base = base or solve_D0(A0, degree=degree)
    space = base.space
    c = np.zeros((space.nb, 3))
    if eps == 0:
        return SmallSolution(base.potential, base, 0.0, 0, [], space.form(c))
    x = space.quad.nodes
    v0, j0 = base.potential(x)
    history = []
    grow = 0
    for it in range(1, max_iter + 1):
        om = space.form(c)
        ov = np.einsum("nm,mva->nva", space.M, om.coef)
        oj = np.einsum("nkm,mva->nkva", space.dM, om.coef)
        N = picard_source(space, v0 + ov, j0 + oj, eps)
        c_new = -eps * space.Kpinv @ N
        step = float(np.sqrt(np.sum((c_new - c) ** 2)))
        history.append(step)
        c = c_new
        if not np.all(np.isfinite(c)):
            raise NonContraction(f"non-finite iterate at eps = {eps}")
        if len(history) > 1 and history[-1] > history[-2]:
            grow += 1
            if grow >= 3:
                raise NonContraction(f"updates grew three times in a row at eps = {eps}")
        else:
            grow = 0
        if step < tol:
            break
    else:
        raise NonContraction(f"no convergence in {max_iter} iterations at eps = {eps}")
    omega = space.form(c)
    return SmallSolution(base.potential + omega, base, eps, it, history, omega)


def small_solution_rate(A0, eps_list=(0.02, 0.04, 0.08), degree=4, tol=1e-12):
    """Fit the log-log slope of ``||A_eps - A_0||_{L^2_1}`` against eps."""
    if len(eps_list) < 2:
        raise ValueError("need at least two eps values")
    base = solve_D0(A0, degree=degree)
    norms, iters = [], []
    for e in eps_list:
        s = small_solution_picard(e, A0, tol=tol, base=base)
        norms.append(s.l21_norm())
        iters.append(s.iterations)
    slope = np.polyfit(np.log(eps_list), np.log(norms), 1)[0]
    return float(slope), np.array(norms), iters
