"""The glued connection A(q), its energy expansion, charge, gradient and Hessian probes.

Everything is computed for ``At = eps A(q)``, an ordinary su(2) connection:
``F_At = eps F^eps_A``, ``d_At = d^eps_A`` and ``J = int |F_At|^2``.  In this
picture the bubble is ``O(1)`` and the background is ``eps`` times the small
solution.

Two gauges are used.  Inside ``B_{lam/4}(p)`` (chart 1)::

    At_1 = g I1 g^-1

and on ``B^4 \\ {p}`` (chart 2)::

    At_2 = eps (1 - beta_lam) A_small + g I2 g^-1 - (1 - beta_{lam/4}) g h_{lam,p} g^-1

They differ by ``T = g g12 g^-1``.  Gauge-invariant densities are evaluated
in chart 1 for ``|x - p| < lam/4`` and chart 2 elsewhere, and every test
form is expressed in the same gauge as the connection at each node.
"""

from dataclasses import dataclass, asdict, field
import json
import threading

import numpy as np

from . import algebra
from .forms import (asd, cov_codiff1_arrays, cov_codiff2_arrays, cov_grad_arrays, chern_density_arrays, curvature_arrays,
                    d_of_jac, full2, wedge_bracket, PAIRS)
from .harmonic import h_lambda_p_field
from .instanton import QL, QR, InstantonParams, eval_I1, eval_I2, radial_scaled
from .parallel import chunk_map, ordered_sum
from .quadrature import ball_quadrature, bubble_ball_quadrature, region_masks, sphere_rule
from . import reduced

EIGHT_PI2 = 8 * np.pi ** 2


class Inadmissible(ValueError):
    """Bubble parameters outside the admissible window."""


class TraceViolation(ValueError):
    """A variation with nonzero tangential trace on the boundary sphere."""


# ---------------------------------------------------------------- cutoff

def _f(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m])
    return out


def _f1(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > 0
    out[m] = np.exp(-1.0 / s[m]) / s[m] ** 2
    return out


def _f2(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = s > 0
    sm = s[m]
    out[m] = np.exp(-1.0 / sm) * (1.0 / sm ** 4 - 2.0 / sm ** 3)
    return out


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1; value, first and second derivative."""
    a, b = _f(s), _f(1 - s)
    a1, b1 = _f1(s), -_f1(1 - s)
    a2, b2 = _f2(s), _f2(1 - s)
    D = a + b
    S = a / D
    N = a1 * b - a * b1
    S1 = N / D ** 2
    N1 = a2 * b - a * b2
    D1 = 2 * D * (a1 + b1)
    S2 = (N1 * D ** 2 - N * D1) / D ** 4
    return S, S1, S2


def beta_profile(t):
    """``beta(t)``: 1 for t <= 1, 0 for t >= 2, smooth and nonincreasing between."""
    S, S1, S2 = smooth_step(2.0 - np.asarray(t, dtype=float))
    return S, -S1, S2


def cutoff_beta(lam, p, x, derivs=0):
    """``beta((x - p)/lam)`` and optionally its gradient and hessian."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x - np.asarray(p, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    b, b1, b2 = beta_profile(r / lam)
    if derivs == 0:
        return b
    rs = np.where(r > 0, r, 1.0)
    u = y / rs[:, None]
    grad = (b1 / lam)[:, None] * u
    if derivs == 1:
        return b, grad
    hess = (b2 / lam ** 2)[:, None, None] * u[:, :, None] * u[:, None, :] \
        + (b1 / (lam * rs))[:, None, None] * (np.eye(4)[None] - u[:, :, None] * u[:, None, :])
    return b, grad, hess


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class GlueParams:
    p: tuple
    g: tuple
    lam: float
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        g = algebra.renormalize(np.asarray(self.g, dtype=float))
        object.__setattr__(self, "g", tuple(float(v) for v in g))

    @property
    def center(self):
        return np.array(self.p)

    @property
    def quat(self):
        return np.array(self.g)

    @property
    def R(self):
        return algebra.rotation_of(self.quat)

    def check(self, D1=0.5, D2=2.0, d0=0.5, lam0=0.24):
        """Raise :class:`Inadmissible` unless ``D1 eps < lam^2 < D2 eps`` and the bubble fits."""
        if not 0 < 2 * lam0 < d0 < 1:
            raise Inadmissible("need 0 < 2 lam0 < d0 < 1")
        if not 0 < D1 < D2:
            raise Inadmissible("need 0 < D1 < D2")
        if np.linalg.norm(self.center) >= 1 - d0:
            raise Inadmissible(f"|p| must be below 1 - d0 = {1 - d0}")
        if not 0 < self.lam < lam0:
            raise Inadmissible(f"lam must lie in (0, {lam0})")
        if not D1 * self.eps < self.lam ** 2 < D2 * self.eps:
            raise Inadmissible("lam^2 outside the window (D1 eps, D2 eps)")
        return self

    def moved(self, dp=None, dxi=None, dlam=0.0):
        p = self.center if dp is None else self.center + dp
        g = self.quat if dxi is None else algebra.qmul(self.quat, algebra.exp_im(0.5 * np.asarray(dxi)))
        return GlueParams(tuple(p), tuple(g), self.lam + dlam, self.eps)


# ---------------------------------------------------------------- the glued connection

def _rotate(R, v):
    return v @ R.T


@dataclass
class GluedConnection:
    """``eps A(q)`` with the small solution and harmonic correction it is built from.

    ``small`` is the small solution (a PolyForm) or ``None`` for flat background.
    """

    q: GlueParams
    small: object = None
    chart1_radius_factor: float = 0.25

    def __post_init__(self):
        self.inst = InstantonParams(self.q.p, self.q.lam)
        self.h = h_lambda_p_field(self.q.lam, self.q.center)

    @property
    def chart1_radius(self):
        return self.chart1_radius_factor * self.q.lam

    def in_chart1(self, x):
        return np.linalg.norm(x - self.q.center, axis=-1) < self.chart1_radius

    def chart1(self, x):
        R = self.q.R
        v, j = eval_I1(self.inst, x)
        return _rotate(R, v), _rotate(R, j)

    def ingredients(self, x):
        """Unrotated ``I2`` and ``h_{lam,p}`` with the two cutoffs at ``x``; independent of ``g``."""
        q = self.q
        iv, ij = eval_I2(self.inst, x, check=False)
        hv, hj = self.h(x)
        b4, gb4 = cutoff_beta(q.lam / 4, q.center, x, 1)
        bl, gbl = cutoff_beta(q.lam, q.center, x, 1)
        return iv, ij, hv, hj, b4, gb4, bl, gbl

    def small_values(self, x):
        if self.small is None:
            return None
        return self.small(x)

    def assemble(self, ing, small, R=None, parts=False):
        """Chart-2 potential from precomputed ingredients and background values."""
        q = self.q
        R = q.R if R is None else R
        iv, ij, hv, hj, b4, gb4, bl, gbl = ing
        iv, ij = _rotate(R, iv), _rotate(R, ij)
        hv, hj = _rotate(R, hv), _rotate(R, hj)
        cv = -(1 - b4)[:, None, None] * hv
        cj = -(1 - b4)[:, None, None, None] * hj + gb4[:, :, None, None] * hv[:, None]
        val, jac = iv + cv, ij + cj
        sv = np.zeros_like(val)
        sj = np.zeros_like(jac)
        if small is not None:
            av, aj = small
            sv = q.eps * (1 - bl)[:, None, None] * av
            sj = q.eps * ((1 - bl)[:, None, None, None] * aj - gbl[:, :, None, None] * av[:, None])
            val, jac = val + sv, jac + sj
        if parts:
            return val, jac, {"instanton": (iv, ij), "correction": (cv, cj), "background": (sv, sj)}
        return val, jac

    def chart2(self, x, parts=False):
        """Chart-2 potential and jacobian; with ``parts`` also the three summands."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        small = None
        if self.small is not None:
            bl = cutoff_beta(self.q.lam, self.q.center, x)
            live = bl < 1
            av = np.zeros((len(x), 4, 3))
            aj = np.zeros((len(x), 4, 4, 3))
            if live.any():
                av[live], aj[live] = self.small(x[live])
            small = (av, aj)
        return self.assemble(self.ingredients(x), small, parts=parts)

    def __call__(self, x):
        """Potential and jacobian in the glued gauge (chart 1 near ``p``, chart 2 elsewhere)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = self.in_chart1(x)
        val = np.empty((len(x), 4, 3))
        jac = np.empty((len(x), 4, 4, 3))
        if m.any():
            val[m], jac[m] = self.chart1(x[m])
        if (~m).any():
            val[~m], jac[~m] = self.chart2(x[~m])
        return val, jac

    def potential(self, x):
        """``A(q)`` itself (not scaled by eps), glued gauge."""
        v, j = self(x)
        return v / self.q.eps, j / self.q.eps

    def transition(self, x):
        """``T = g g12 g^-1`` at ``x`` as unit quaternions."""
        y = np.atleast_2d(x) - self.q.center
        u = y / np.linalg.norm(y, axis=-1)[:, None]
        g = self.q.quat
        return algebra.qmul(algebra.qmul(g, u), algebra.qconj(g))

    def transition_log_derivative(self, x):
        """``(d_mu T) T^-1``, shape (N, 4, 3)."""
        y = np.atleast_2d(x) - self.q.center
        s = np.sum(y * y, axis=-1)
        L = np.einsum("nk,kma->nma", y, QL) / s[:, None, None]
        return _rotate(self.q.R, L)

    def overlap_residual(self, x):
        """Chart 2 against the chart-1 field carried through ``T``; both sides of the relation."""
        v1, _ = self.chart1(x)
        v2, _ = self.chart2(x)
        Tq = self.transition(x)
        Ti = algebra.qconj(Tq)
        mc = _rotate_by_quat(Ti, self.transition_log_derivative(x), Tq)  # T^-1 dT = T^-1 (dT T^-1) T
        carried = mc + _rotate_by_quat(Ti, v1, Tq)
        return v2 - carried


def _rotate_by_quat(a, v, b):
    """``a v b`` for unit quaternions with ``b = a^-1``, per node, on Im H vectors (..., k, 3)."""
    R = algebra.rotation_of(a)  # (N, 3, 3)
    return np.matmul(v, np.transpose(R, (0, 2, 1)))


def build_glued(q, A_small=None, D1=0.5, D2=2.0, d0=0.5, lam0=0.24, check=True):
    """Assemble ``eps A(q)``; ``A_small`` is the small solution potential (or None)."""
    if check:
        q.check(D1, D2, d0, lam0)
    return GluedConnection(q, A_small)


# ---------------------------------------------------------------- energy and charge

def _curv_density(At, x):
    v, j = At(x)
    F = curvature_arrays(v, j, 1.0)
    return F


def ym_action(A, eps, quad, masks=None):
    """``int |F^eps_A|^2`` for a potential callable ``A(x) -> (values, jac)``."""
    x, w = quad.nodes, quad.weights

    def part(s):
        v, j = A(x[s])
        F = curvature_arrays(v, j, eps)
        return w[s] @ (2 * np.sum(F * F, axis=(1, 2)))

    return float(ordered_sum(chunk_map(part, len(w))))


def _region_integrals(At, quad, lam):
    """Energy and Chern-density integrals over the four annular regions around ``p``."""
    x, w = quad.nodes, quad.weights
    masks = region_masks(quad, lam)
    keys = list(masks)
    M = np.stack([masks[k] for k in keys], axis=1).astype(float)

    def part(s):
        F = _curv_density(At, x[s])
        e = 2 * np.sum(F * F, axis=(1, 2))
        c = chern_density_arrays(F)
        return np.stack([(w[s] * e) @ M[s], (w[s] * c) @ M[s]])

    tot = ordered_sum(chunk_map(part, len(w)))
    return dict(zip(keys, map(float, tot[0]))), dict(zip(keys, map(float, tot[1])))


@dataclass
class ExpansionReport:
    eps: float
    p: list
    g: list
    lam: float
    J: float
    eight_pi2: float
    small_energy: float
    reduced: float
    r1: float
    regions: dict
    F: float
    T: float
    chern: float
    chern_regions: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    def row(self):
        return {"eps": self.eps, "lambda": self.lam, "J": self.J, "term1": self.eight_pi2,
                "term2": self.small_energy, "term3": self.reduced, "r1": self.r1, "chern": self.chern}


def default_ball_quadrature():
    return ball_quadrature(nr=16, sphere=sphere_rule(12, 12, 24))


def _small_integrals(A_small, eps, quad=None):
    """Energy and Chern integral of ``eps A_small`` over the ball."""
    if A_small is None:
        return 0.0, 0.0
    quad = quad or default_ball_quadrature()
    x, w = quad.nodes, quad.weights

    def part(s):
        v, j = A_small(x[s])
        F = curvature_arrays(eps * v, eps * j, 1.0)
        return np.array([w[s] @ (2 * np.sum(F * F, axis=(1, 2))), w[s] @ chern_density_arrays(F)])

    e, c = ordered_sum(chunk_map(part, len(w)))
    return float(e), float(c)


def small_energy(A_small, eps, quad=None):
    """``eps^2 YM_eps(A_small) = int |F_{eps A_small}|^2`` over the ball."""
    return _small_integrals(A_small, eps, quad)[0]


def j_eps(q, A_small, D0_solution, quad=None, ball_quad=None, reduced_quad=None, check=True, **kw):
    """``J = eps^2 YM_eps(A(q))`` with the three leading terms and ``r1`` by subtraction.

    ``D0_solution`` supplies ``dA_0`` for the rotation pairing in the reduced
    functional; ``A_small`` is the background potential actually glued in.
    The relative Chern number comes out of the same pass.
    """
    At = build_glued(q, A_small, check=check, **kw)
    quad = quad or bubble_ball_quadrature(q.center, q.lam)
    regions, cregions = _region_integrals(At, quad, q.lam)
    J = float(sum(regions.values()))
    E, C = _small_integrals(A_small, q.eps, ball_quad)
    rq = reduced_quad or ball_quadrature(nr=24, sphere=sphere_rule(14, 14, 28))
    M, F = reduced.moment_matrix(D0_solution, q.center, rq, with_F=True)
    T = reduced.rotation_pairing(M, q.R)
    Fe = reduced.reduced_energy(q.lam, F, T, q.eps)
    r1 = J - (EIGHT_PI2 + E + Fe)
    chern = (sum(cregions.values()) - C) / EIGHT_PI2
    return ExpansionReport(q.eps, list(q.p), list(q.g), q.lam, J, EIGHT_PI2, E, Fe, r1, regions, F, T,
                           float(chern), cregions, {"nodes": quad.n})


def relative_chern(q, A_small, quad=None, ball_quad=None, check=True, connection=None, **kw):
    """``(int Tr(F^2)[A(q)] - int Tr(F^2)[A_small]) / 8 pi^2`` in the eps-rescaled picture.

    ``connection`` replaces the glued ``eps A(q)`` by any potential callable.
    """
    At = connection if connection is not None else build_glued(q, A_small, check=check, **kw)
    quad = quad or bubble_ball_quadrature(q.center, q.lam)
    c_glued = sum(_region_integrals(At, quad, q.lam)[1].values())
    c_small = _small_integrals(A_small, q.eps, ball_quad)[1]
    return float((c_glued - c_small) / EIGHT_PI2)


# ---------------------------------------------------------------- variations

class Variation:
    """A 1-form variation ``a(x) -> (values, jac)`` in the glued gauge of a connection."""

    def __init__(self, fn, name="", support=None):
        self.fn = fn
        self.name = name
        self.support = support

    def rows(self, x):
        """Mask of points where the variation can be nonzero, or None if unknown."""
        if self.support is None:
            return None
        c, r = self.support
        return np.linalg.norm(x - c, axis=-1) < r

    def __call__(self, x):
        return self.fn(x)


def _second_order_linear(y, Q, phi, dphi, ddphi):
    """Value, gradient and hessian of ``phi(|y|^2) sum_k y_k Q[k]`` (Q: (4, 3))."""
    L = y @ Q
    val = phi[:, None] * L
    grad = phi[:, None, None] * Q[None] + 2 * dphi[:, None, None] * y[:, :, None] * L[:, None, :]
    yQ = y[:, :, None, None] * Q[None, None, :, :]  # [n, rho, nu, a] = y_rho Q_nu
    hess = 2 * dphi[:, None, None, None] * (yQ + np.transpose(yQ, (0, 2, 1, 3)))
    hess += 2 * dphi[:, None, None, None] * np.eye(4)[None, :, :, None] * L[:, None, None, :]
    hess += 4 * ddphi[:, None, None, None] * y[:, :, None, None] * y[:, None, :, None] * L[:, None, None, :]
    return val, grad, hess


def _second_order_quadratic(y, B):
    """Value, gradient and hessian of ``B(y, y)/|y|^2`` with symmetric ``B`` (4, 4, 3)."""
    s = np.sum(y * y, axis=-1)
    By = np.einsum("kra,nr->nka", B, y)
    q = np.einsum("nk,nka->na", y, By)
    val = q / s[:, None]
    grad = 2 * By / s[:, None, None] - 2 * y[:, :, None] * q[:, None, :] / s[:, None, None] ** 2
    I4 = np.eye(4)
    hess = 2 * B[None] / s[:, None, None, None] \
        - 4 * By[:, :, None, :] * y[:, None, :, None] / s[:, None, None, None] ** 2 \
        - 4 * By[:, None, :, :] * y[:, :, None, None] / s[:, None, None, None] ** 2 \
        - 2 * I4[None, :, :, None] * q[:, None, None, :] / s[:, None, None, None] ** 2 \
        + 8 * y[:, :, None, None] * y[:, None, :, None] * q[:, None, None, :] / s[:, None, None, None] ** 3
    return val, grad, hess


_E4 = algebra.UNITS
# B_xi[k, r] = sym Im(e_k xi ebar_r) for xi = i, j, k
_B_XI = []
for _xi in algebra.UNITS[1:]:
    B = np.array([[algebra.quat_im(algebra.qmul(algebra.qmul(_E4[k], _xi), algebra.qconj(_E4[r])))
                   for r in range(4)] for k in range(4)])
    _B_XI.append(0.5 * (B + np.transpose(B, (1, 0, 2))))
_B_XI = np.array(_B_XI)


def gauge_generator(At, kind, index, x):
    """``zeta = (d_q T) T^-1`` with derivatives, for a parameter direction.

    ``kind`` is ``"p"`` (index 0..3) or ``"xi"`` (index 0..2); ``T`` does not
    depend on ``lam``.  Returns value (N, 3), gradient (N, 4, 3), hessian (N, 4, 4, 3).
    """
    q = At.q
    R = q.R
    y = np.atleast_2d(x) - q.center
    s = np.sum(y * y, axis=-1)
    if kind == "p":
        # d_{p_mu} T T^-1 = -g Im(e_mu ybar)/|y|^2 g^-1
        Q = QL[:, index, :]  # [k, a] = Im(e_index ebar_k)
        val, grad, hess = _second_order_linear(y, Q, 1 / s, -1 / s ** 2, 2 / s ** 3)
        val, grad, hess = -val, -grad, -hess
    elif kind == "xi":
        # T -> g e^{t xi/2} u e^{-t xi/2} g^-1: zeta = (1/2) g (xi - u xi ubar) g^-1
        xi = np.zeros(3)
        xi[index] = 1.0
        v, gr, he = _second_order_quadratic(y, _B_XI[index])
        val = 0.5 * (xi[None] - v)
        grad, hess = -0.5 * gr, -0.5 * he
    else:
        raise ValueError("kind must be 'p' or 'xi'")
    return _rotate(R, val), _rotate(R, grad), _rotate(R, hess)


def _cov_d_function(A1v, A1j, psi, dpsi, ddpsi):
    """``c = d psi + [A, psi]`` for a Lie-valued function ``psi``; value and jacobian."""
    val = dpsi + algebra.bracket(A1v, psi[:, None, :])
    jac = ddpsi + algebra.bracket(A1j, psi[:, None, None, :]) + algebra.bracket(A1v[:, None, :, :], dpsi[:, :, None, :])
    return val, jac


FRAME_NAMES = ("p1", "p2", "p3", "p4", "xi1", "xi2", "xi3", "lam")


def frame_steps(q, dxi=1e-3):
    d = max(1e-3 * q.lam, 1e-5)
    return d, dxi, d


class _FrameCache:
    """Evaluates all eight frame fields at once and serves them per direction."""

    def __init__(self, At, dxi):
        self.At = At
        q = At.q
        dp, dx_, dl = frame_steps(q, dxi)
        dirs = []
        for i in range(4):
            e = np.zeros(4)
            e[i] = dp
            dirs.append(("p", i, q.moved(dp=e), q.moved(dp=-e), 2 * dp))
        for i in range(3):
            e = np.zeros(3)
            e[i] = dx_
            dirs.append(("xi", i, q.moved(dxi=e), q.moved(dxi=-e), 2 * dx_))
        dirs.append(("lam", 0, q.moved(dlam=dl), q.moved(dlam=-dl), 2 * dl))
        self.dirs = [(k, i, GluedConnection(qp, At.small, At.chart1_radius_factor),
                      GluedConnection(qm, At.small, At.chart1_radius_factor), den) for k, i, qp, qm, den in dirs]
        self.local = threading.local()

    def get(self, x, k):
        loc = self.local
        if getattr(loc, "x", None) is not x:
            loc.data = self._evaluate(x)
            loc.x = x
        return loc.data[k]

    def _evaluate(self, x):
        At = self.At
        q = At.q
        x = np.atleast_2d(x)
        m = At.in_chart1(x)
        out = [(np.empty((len(x), 4, 3)), np.empty((len(x), 4, 4, 3))) for _ in self.dirs]
        if (~m).any():
            x2 = x[~m]
            # the background does not move with q; only its cutoff does
            small = None
            if At.small is not None:
                r = np.linalg.norm(x2 - q.center, axis=-1)
                live = r > 0.9 * q.lam
                av = np.zeros((len(x2), 4, 3))
                aj = np.zeros((len(x2), 4, 4, 3))
                if live.any():
                    av[live], aj[live] = At.small(x2[live])
                small = (av, aj)
            ing0 = At.ingredients(x2)
            for k, (kind, _, Ap, Am, den) in enumerate(self.dirs):
                if kind == "xi":
                    vp, jp = Ap.assemble(ing0, small)
                    vm, jm = Am.assemble(ing0, small)
                else:
                    vp, jp = Ap.assemble(Ap.ingredients(x2), small)
                    vm, jm = Am.assemble(Am.ingredients(x2), small)
                out[k][0][~m] = (vp - vm) / den
                out[k][1][~m] = (jp - jm) / den
        if m.any():
            xc = x[m]
            A1v, A1j = At.chart1(xc)
            chi, gchi, hchi = cutoff_beta(q.lam / 16, q.center, xc, 2)
            om = 1 - chi
            for k, (kind, idx, Ap, Am, den) in enumerate(self.dirs):
                vp, jp = Ap.chart1(xc)
                vm, jm = Am.chart1(xc)
                v1, j1 = (vp - vm) / den, (jp - jm) / den
                if kind != "lam":
                    z, dz, ddz = gauge_generator(At, kind, idx, xc)
                    psi = om[:, None] * z
                    dpsi = om[:, None, None] * dz - gchi[:, :, None] * z[:, None, :]
                    ddpsi = om[:, None, None, None] * ddz \
                        - gchi[:, :, None, None] * dz[:, None, :, :] - gchi[:, None, :, None] * dz[:, :, None, :] \
                        - hchi[:, :, :, None] * z[:, None, None, :]
                    cv, cj = _cov_d_function(A1v, A1j, psi, dpsi, ddpsi)
                    v1, j1 = v1 + cv, j1 + cj
                out[k][0][m] = v1
                out[k][1][m] = j1
        return out


def tangent_frame(At, dxi=1e-3):
    """The eight parameter derivatives of ``q -> eps A(q)`` as glued-gauge variations.

    Central differences in ``p``, right translations of ``g`` and ``lam``;
    inside chart 1 the derivative is corrected by ``d_A((1 - chi) zeta)``,
    ``zeta = (d_q T) T^-1``, so the two charts agree on the overlap.  The
    eight fields share one evaluation per point set.
    """
    cache = _FrameCache(At, dxi)
    return [Variation(lambda x, k=k: cache.get(x, k), FRAME_NAMES[k]) for k in range(8)]


def bump_variation(At, center, scale, C, L):
    """A compactly supported variation written in the chart-1 gauge and carried to chart 2 by ``T``.

    ``b(x) = rho(|x - c|/s) (C + sum_k ((x - c)_k / s) L_k)`` with the cutoff
    profile ``rho`` (support ``|x - c| < 2 s``).
    """
    center = np.asarray(center, dtype=float)

    def base(x):
        y = x - center
        rho, grho = cutoff_beta(scale, center, x, 1)
        poly = C[None] + np.einsum("nk,kva->nva", y / scale, L)
        dpoly = np.broadcast_to(L[None] / scale, (len(x),) + L.shape)
        val = rho[:, None, None] * poly
        jac = grho[:, :, None, None] * poly[:, None] + rho[:, None, None, None] * dpoly
        return val, jac

    def fn(x):
        x = np.atleast_2d(x)
        val, jac = base(x)
        m = ~At.in_chart1(x)
        if m.any():
            Tq = At.transition(x[m])
            Ri = algebra.rotation_of(algebra.qconj(Tq))
            zt = At.transition_log_derivative(x[m])  # (dT) T^-1
            v, j = val[m], jac[m]
            j = j + algebra.bracket(v[:, None, :, :], zt[:, :, None, :])
            RiT = np.transpose(Ri, (0, 2, 1))
            val[m] = np.matmul(v, RiT)
            jac[m] = np.matmul(j.reshape(len(v), 16, 3), RiT).reshape(j.shape)
        return val, jac

    return Variation(fn, "bump", (center, 2 * scale))


def random_variations(At, n, rng, near_fraction=0.6):
    """Random smooth bump variations: some at the bubble scale near ``p``, some spread over the ball."""
    q = At.q
    out = []
    while len(out) < n:
        if rng.uniform() < near_fraction:
            s = q.lam * rng.uniform(0.3, 2.0)
            c = q.center + q.lam * rng.normal(size=4) * 0.7
        else:
            s = rng.uniform(0.08, 0.25)
            d = rng.normal(size=4)
            c = d / np.linalg.norm(d) * rng.uniform(0, 1 - 2.2 * s)
        if np.linalg.norm(c) + 2 * s >= 0.999:
            continue
        C = rng.normal(size=(4, 3))
        L = rng.normal(size=(4, 4, 3)) * 0.5
        out.append(bump_variation(At, c, s, C, L))
    return out


def check_trace(a, sphere=None, tol=1e-10):
    """Raise :class:`TraceViolation` if ``a`` has tangential trace on the unit sphere."""
    sphere = sphere or sphere_rule(6, 6, 12)
    z = sphere.nodes
    v, _ = a(z)
    normal = np.einsum("nk,nka->na", z, v)
    tang = v - z[:, :, None] * normal[:, None, :]
    if np.max(np.abs(tang)) > tol * max(1.0, np.max(np.abs(v))):
        raise TraceViolation("variation has nonzero tangential trace on the boundary")


# ---------------------------------------------------------------- gradient and Hessian

def _features(A, variations, x, eps):
    """Per-variation nodal data: value, covariant gradient, covariant d and d*."""
    Av, Aj = A(x)
    F = curvature_arrays(Av, Aj, eps)
    out = []
    n = len(x)
    for a in variations:
        rows = a.rows(x)
        if rows is None:
            v, j = a(x)
            out.append((v, cov_grad_arrays(Av, v, j, eps), d_of_jac(j) + eps * wedge_bracket(Av, v),
                        cov_codiff1_arrays(Av, v, j, eps)))
            continue
        v = np.zeros((n, 4, 3))
        G = np.zeros((n, 4, 4, 3))
        D = np.zeros((n, 6, 3))
        Ds = np.zeros((n, 3))
        if rows.any():
            vr, jr = a(x[rows])
            Ar = Av[rows]
            v[rows] = vr
            G[rows] = cov_grad_arrays(Ar, vr, jr, eps)
            D[rows] = d_of_jac(jr) + eps * wedge_bracket(Ar, vr)
            Ds[rows] = cov_codiff1_arrays(Ar, vr, jr, eps)
        out.append((v, G, D, Ds))
    return F, Av, out


def ym_current(A, x, eps=1.0, h=None):
    """``d_A^* F_A`` at ``x`` with fourth-order differences of ``F``.

    For a glued connection each point is differenced inside its own chart,
    so the stencil never straddles the gauge switch.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if hasattr(A, "in_chart1"):
        h = h or 1e-3 * A.q.lam
        m = A.in_chart1(x)
        groups = [(A.chart1, m), (A.chart2, ~m)]
    else:
        h = h or 1e-4
        groups = [(A, np.ones(len(x), dtype=bool))]
    out = np.zeros((len(x), 4, 3))
    for fn, rows in groups:
        if not rows.any():
            continue
        xr = x[rows]

        def F(y):
            v, j = fn(y)
            return curvature_arrays(v, j, eps)

        jw = np.empty((len(xr), 4, 6, 3))
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            jw[:, k] = (8 * (F(xr + e) - F(xr - e)) - (F(xr + 2 * e) - F(xr - 2 * e))) / (12 * h)
        v, _ = fn(xr)
        out[rows] = cov_codiff2_arrays(v, F(xr), jw, eps)
    return out


def gradient_pairing(A, eps, a, quad, check=True, form="adjoint"):
    """``2 int (F^eps_A, d^eps_A a)``.

    ``form="adjoint"`` integrates the equal quantity ``2 int (d_A^* F_A, a)``
    (``a`` has zero trace), which has no cancellation between large terms;
    ``form="direct"`` integrates the displayed pairing as written.
    """
    if check and quad.region == "ball":
        check_trace(a)
    x, w = quad.nodes, quad.weights

    def part(s):
        xs = x[s]
        if form == "adjoint":
            v, _ = a(xs)
            return w[s] @ (2 * np.sum(ym_current(A, xs, eps) * v, axis=(1, 2)))
        F, _, feats = _features(A, [a], xs, eps)
        return w[s] @ (2 * np.sum(F * feats[0][2], axis=(1, 2)))

    return float(2 * ordered_sum(chunk_map(part, len(w))))


def modified_hessian(A, eps, a, b, quad, check=True):
    """``int (d_A a, d_A b) + int (F_A, eps [a ^ b]) + int (d_A^* a, d_A^* b)``."""
    if check and quad.region == "ball":
        check_trace(a)
        check_trace(b)
    return float(bilinear_forms(A, eps, [a, b], quad)["H"][0, 1])


def bilinear_forms(A, eps, variations, quad, chunk=4096):
    """Gram matrices over a list of variations.

    Returns ``H`` (modified Hessian), ``S`` (Sobolev inner product
    ``(grad_A a, grad_A b) + (a, b)``), ``L2``, ``G1`` (``(grad_A a, grad_A b)``)
    and ``grad`` (``2 int (F, d_A a)`` per variation, in the picture of ``A``).
    """
    x, w = quad.nodes, quad.weights
    n = len(variations)

    def part(s):
        F, Av, feats = _features(A, variations, x[s], eps)
        ws = w[s]
        V = np.stack([f[0] for f in feats])  # (n, N, 4, 3)
        G = np.stack([f[1] for f in feats])
        D = np.stack([f[2] for f in feats])
        Ds = np.stack([f[3] for f in feats])
        Ff = full2(F)
        # (F, eps [a ^ b]) = eps sum_k ([sum_j F_jk, a_j], b_k) with the su(2) form
        Phi = np.stack([np.sum(algebra.bracket(Ff, v[:, :, None, :]), axis=1) for v in V])
        sw = np.sqrt(ws)

        def gram(X, Y=None):
            Xf = (X.reshape(n, len(ws), -1) * sw[None, :, None]).reshape(n, -1)
            Yf = Xf if Y is None else (Y.reshape(n, len(ws), -1) * sw[None, :, None]).reshape(n, -1)
            return 2 * Xf @ Yf.T
        Hd = gram(D) + gram(Ds)
        Hf = eps * gram(Phi, V)
        Hf = 0.5 * (Hf + Hf.T)
        grad = 2 * np.einsum("n,anpc,npc->a", ws, D, F) * 2
        return np.stack([Hd + Hf, gram(G), gram(V), np.diag(grad)])

    tot = ordered_sum(chunk_map(part, len(w), chunk))
    H, G1, L2, gd = tot
    return {"H": H, "S": G1 + L2, "G1": G1, "L2": L2, "grad": np.diag(gd)}


def probe_quadrature(q):
    """Bubble-centered rule used by the probes; quotients are stable to about 1e-4 at this size."""
    return bubble_ball_quadrature(q.center, q.lam, n_per=8, n_outer=12, sphere=sphere_rule(6, 6, 12))


def _curvature_chartwise(At, x, chart1):
    v, j = At.chart1(x) if chart1 else At.chart2(x)
    return curvature_arrays(v, j, 1.0)


ZERO_MODE_NAMES = ("t1", "t2", "t3", "t4", "dil", "rotL1", "rotL2", "rotL3", "rotR1", "rotR2", "rotR3")


def _curvature_and_gradient(At, x, h):
    """``F`` and its fourth-order difference gradient, each point differenced in its own chart."""
    x = np.atleast_2d(x)
    m = At.in_chart1(x)
    F = np.zeros((len(x), 6, 3))
    dF = np.zeros((len(x), 4, 6, 3))
    for c1, rows in ((True, m), (False, ~m)):
        if not rows.any():
            continue
        xr = x[rows]
        F[rows] = _curvature_chartwise(At, xr, c1)
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            dF[rows, k] = (8 * (_curvature_chartwise(At, xr + e, c1) - _curvature_chartwise(At, xr - e, c1))
                           - (_curvature_chartwise(At, xr + 2 * e, c1) - _curvature_chartwise(At, xr - 2 * e, c1))) / (12 * h)
    return F, dF


def _conformal_fields():
    """Linear vector fields ``V(y) = y @ L`` as matrices ``L[m, mu]`` (so ``dV^mu/dy^m = L[m, mu]``)."""
    E = algebra.UNITS
    out = [None] * 4  # translations are constant
    out.append(np.eye(4))
    for k in range(1, 4):
        out.append(np.array([algebra.qmul(E[k], E[m]) for m in range(4)]))
    for k in range(1, 4):
        out.append(np.array([algebra.qmul(E[m], E[k]) for m in range(4)]))
    return out


def zero_mode_variations(At, h=None):
    """Cut-off contractions ``rho iota_V F`` for the conformal fields ``V`` of R^4 centered at ``p``.

    ``V`` runs over translations, the dilation ``y`` and the rotations
    ``xi y`` and ``y xi`` (quaternion products, ``y = x - p``).  On an exact
    instanton these are the gauge-covariant (Coulomb) zero modes; the cutoff
    ``rho = beta_{s,p}``, ``s = (1 - |p|)/2.5``, gives zero boundary trace.
    ``dF`` comes from fourth-order differences, shared by all eleven fields.
    """
    q = At.q
    h = h or 1e-3 * q.lam
    s = (1 - np.linalg.norm(q.center)) / 2.5
    Ls = _conformal_fields()
    state = threading.local()

    def evaluate(x):
        if getattr(state, "x", None) is not x:
            F, dF = _curvature_and_gradient(At, x, h)
            Ff, dFf = full2(F), full2(dF)
            rho, grho = cutoff_beta(s, q.center, x, 1)
            y = x - q.center
            outs = []
            for k, L in enumerate(Ls):
                if L is None:
                    V = np.broadcast_to(np.eye(4)[k], y.shape)
                    b = Ff[:, k]
                    db = dFf[:, :, k]
                else:
                    V = y @ L
                    b = np.einsum("nm,nmva->nva", V, Ff)
                    db = np.einsum("km,nmva->nkva", L, Ff) + np.einsum("nm,nkmva->nkva", V, dFf)
                outs.append((rho[:, None, None] * b,
                             rho[:, None, None, None] * db + grho[:, :, None, None] * b[:, None]))
            state.x, state.data = x, outs
        return state.data

    return [Variation(lambda x, k=k: evaluate(x)[k], name) for k, name in enumerate(ZERO_MODE_NAMES)]


def hessian_positivity_probe(At, n_samples=50, seed=0, quad=None, frame=None, min_norm=1e-12, max_retries=200,
                             zero_mode_check=True):
    """Minimum Rayleigh quotient of the modified Hessian on frame-orthogonal random variations.

    Returns a dict with the projected quotients, the unprojected quotients of
    the frame directions, the frame Gram condition number and the raw Gram data.
    """
    rng = np.random.default_rng(seed)
    quad = quad or probe_quadrature(At.q)
    frame = frame or tangent_frame(At)
    probes = []
    retries = 0
    while len(probes) < n_samples:
        probes.extend(random_variations(At, n_samples - len(probes), rng))
        if retries > max_retries:
            break
        retries += 1
    forms = bilinear_forms(At, 1.0, list(frame) + probes, quad)
    H, S = forms["H"], forms["S"]
    k = len(frame)
    Sff = S[:k, :k]
    ev = np.linalg.eigvalsh(Sff)
    cond = float(ev.max() / ev.min()) if ev.min() > 0 else float("inf")
    rank = int(np.sum(ev > 1e-12 * ev.max()))
    coeffs = np.linalg.solve(Sff, S[:k, k:])  # projection coefficients
    quot = []
    for i in range(len(probes)):
        v = np.zeros(k + len(probes))
        v[k + i] = 1.0
        v[:k] = -coeffs[:, i]
        nrm = v @ S @ v
        if nrm <= min_norm:
            continue
        quot.append(float(v @ H @ v / nrm))
    frame_quot = [float(H[i, i] / S[i, i]) for i in range(k)]
    zero_modes = {}
    if zero_mode_check:
        zm = bilinear_forms(At, 1.0, zero_mode_variations(At), quad)
        zero_modes = {nm: float(zm["H"][i, i] / zm["S"][i, i]) for i, nm in enumerate(ZERO_MODE_NAMES)}
    raw_quot = [float(H[k + i, k + i] / S[k + i, k + i]) for i in range(len(probes))]
    return {"min_quotient": float(np.min(quot)), "quotients": quot, "frame_quotients": dict(zip(FRAME_NAMES, frame_quot)),
            "unprojected_probe_quotients": raw_quot, "frame_rank": rank, "frame_condition": cond,
            "n_samples": len(quot), "zero_mode_quotients": zero_modes}


def gradient_envelope(At, n_samples=20, seed=0, quad=None):
    """Sampled sup of ``|grad YM_eps(A(q))(a)| / ||a||_{A;1,2}`` over random variations.

    Computed in the picture of ``A(q)``: ``2 int (F^eps_A, d^eps_A a) = (2/eps) int (F_At, d_At a)``
    and ``||a||_{A;1,2} = ||grad_At a|| + ||a||``.
    """
    rng = np.random.default_rng(seed)
    quad = quad or probe_quadrature(At.q)
    probes = random_variations(At, n_samples, rng)
    forms = bilinear_forms(At, 1.0, probes, quad)
    x, w = quad.nodes, quad.weights

    def part(s):
        xs = x[s]
        J = ym_current(At, xs)
        return np.array([w[s] @ (2 * np.sum(J * a(xs)[0], axis=(1, 2))) for a in probes])

    # (2/eps) int (F_At, d_At a) = (2/eps) int (d*_At F_At, a) for compactly supported a
    grad = 2 * ordered_sum(chunk_map(part, len(w))) / At.q.eps
    nrm = np.sqrt(np.diag(forms["G1"])) + np.sqrt(np.diag(forms["L2"]))
    ratios = np.abs(grad) / nrm
    return {"sup": float(ratios.max()), "ratios": ratios.tolist(), "pairings": grad.tolist(), "eps": At.q.eps}
