"""Im H-valued differential forms on R^4 and their calculus.

Layout conventions (leading axis runs over nodes):

* 1-form values ``(N, 4, 3)``: ``a[n, nu]`` is the coefficient of ``dx^nu``.
* 1-form jacobians ``(N, 4, 4, 3)``: ``jac[n, mu, nu] = d_mu a_nu``.
* 2-form values ``(N, 6, 3)`` over the ordered pairs
  ``01, 02, 03, 12, 13, 23``; jacobians ``(N, 4, 6, 3)``.

The orientation is ``dx^0 dx^1 dx^2 dx^3 > 0``.  Pointwise inner products use
the su(2) form ``(X, Y) = 2 (x, y)`` and the flat metric with one term per
ordered pair, so ``|dx^0 ^ dx^1| = 1``.
"""

from dataclasses import dataclass

import numpy as np

from . import algebra
from .parallel import chunk_map, ordered_sum

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
PAIR_INDEX = {p: k for k, p in enumerate(PAIRS)}
_STAR_PERM = np.array([5, 4, 3, 2, 1, 0])
_STAR_SIGN = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0])
_PI = np.array([p[0] for p in PAIRS])
_PJ = np.array([p[1] for p in PAIRS])


class StencilUnderflow(ValueError):
    """A finite-difference stencil would leave the chart."""


@dataclass
class LieForm1:
    """Sampled Im H-valued 1-form, optionally with its jacobian."""

    values: np.ndarray
    jac: np.ndarray = None
    points: np.ndarray = None

    @property
    def n(self):
        return self.values.shape[0]


@dataclass
class LieForm2:
    values: np.ndarray
    jac: np.ndarray = None
    points: np.ndarray = None

    @property
    def n(self):
        return self.values.shape[0]


def _check_grid(*forms):
    n = {f.n for f in forms}
    if len(n) != 1:
        raise ValueError(f"grid mismatch: node counts {sorted(n)}")


# ---------------------------------------------------------------- array kernels

def d_of_jac(jac):
    """Exterior derivative of a 1-form from its jacobian."""
    return jac[..., _PI, _PJ, :] - jac[..., _PJ, _PI, :]


def d2_jac_of_hess(hess):
    """Jacobian of the exterior derivative from 1-form second derivatives.

    ``hess[n, l, mu, nu] = d_l d_mu a_nu``; result ``[n, l, pair]``.
    """
    return hess[..., :, _PI, _PJ, :] - hess[..., :, _PJ, _PI, :]


def star(w):
    return _STAR_SIGN[:, None] * w[..., _STAR_PERM, :]


def asd(w):
    return 0.5 * (w - star(w))


def sd(w):
    return 0.5 * (w + star(w))


def wedge_bracket(a, b):
    """``[a ^ b]_{jk} = [a_j, b_k] - [a_k, b_j]`` for 1-form arrays."""
    return algebra.bracket(a[..., _PI, :], b[..., _PJ, :]) - algebra.bracket(a[..., _PJ, :], b[..., _PI, :])


def full2(w):
    """Antisymmetric ``(..., 4, 4, 3)`` tensor from pair components."""
    out = np.zeros(w.shape[:-2] + (4, 4, w.shape[-1]))
    out[..., _PI, _PJ, :] = w
    out[..., _PJ, _PI, :] = -w
    return out


def curvature_arrays(A, jacA, eps=1.0):
    return d_of_jac(jacA) + 0.5 * eps * wedge_bracket(A, A)


def cov_d_arrays(A, a, jac_a, eps=1.0):
    return d_of_jac(jac_a) + eps * wedge_bracket(A, a)


def cov_codiff1_arrays(A, a, jac_a, eps=1.0):
    """``d_A^* a = -sum_j (d_j a_j + eps [A_j, a_j])`` (Lie-valued function)."""
    return -np.einsum("...jja->...a", jac_a) - eps * np.sum(algebra.bracket(A, a), axis=-2)


def cov_codiff2_arrays(A, w, jac_w, eps=1.0):
    """Formal L^2 adjoint of ``d_A`` on 2-forms: ``-sum_j (d_j w_jk + eps [A_j, w_jk])``."""
    W = full2(w)
    JW = full2(jac_w)  # [.., l, j, k]
    div = np.einsum("...jjka->...ka", JW)
    br = np.sum(algebra.bracket(A[..., :, None, :], W), axis=-3)
    return -div - eps * br


def cov_grad_arrays(A, a, jac_a, eps=1.0):
    """Componentwise covariant gradient ``d_mu a_nu + eps [A_mu, a_nu]``."""
    return jac_a + eps * algebra.bracket(A[..., :, None, :], a[..., None, :, :])


def pair_inner(u, v):
    """Pointwise su(2)-form inner product, summed over all form components."""
    n = u.shape[0]
    return 2.0 * np.sum(u.reshape(n, -1) * v.reshape(n, -1), axis=1)


def real_inner(u, v):
    """Same as :func:`pair_inner` without the factor 2, per Lie direction pair."""
    return np.einsum("n...a,n...b->nab", u.reshape(u.shape[0], -1, u.shape[-1]),
                     v.reshape(v.shape[0], -1, v.shape[-1]))


def chern_density_arrays(F):
    """``(F, *F)``: positive on self-dual and negative on anti-self-dual curvature."""
    return pair_inner(F, star(F))


# ------------------------------------------------------------- form operations

def exterior_d(a: LieForm1) -> LieForm2:
    """``(da)_{jk} = d_j a_k - d_k a_j``; needs the jacobian of ``a``."""
    if a.jac is None:
        raise ValueError("exterior_d needs a jacobian; sample with analytic or FD derivatives")
    return LieForm2(d_of_jac(a.jac), points=a.points)


def hodge_star2(w: LieForm2) -> LieForm2:
    return LieForm2(star(w.values), None if w.jac is None else star(w.jac), w.points)


def asd_project(w: LieForm2) -> LieForm2:
    return LieForm2(asd(w.values), None if w.jac is None else asd(w.jac), w.points)


def bracket_wedge_11(a: LieForm1, b: LieForm1) -> LieForm2:
    _check_grid(a, b)
    return LieForm2(wedge_bracket(a.values, b.values), points=a.points)


def curvature(A: LieForm1, eps: float) -> LieForm2:
    """``F = dA + (eps/2) [A ^ A]``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return LieForm2(curvature_arrays(A.values, _need_jac(A), eps), points=A.points)


def covariant_d1(A: LieForm1, eps: float, a: LieForm1) -> LieForm2:
    _check_grid(A, a)
    return LieForm2(cov_d_arrays(A.values, a.values, _need_jac(a), eps), points=a.points)


def codifferential2(A: LieForm1, eps: float, w: LieForm2) -> LieForm1:
    """Covariant codifferential of a 2-form, the L^2 adjoint of :func:`covariant_d1`.

    Uses the sign making ``int (d_A a, w) = int (a, d_A^* w)`` hold for forms
    vanishing at the boundary.
    """
    _check_grid(A, w)
    if w.jac is None:
        raise StencilUnderflow("2-form has no derivative data")
    return LieForm1(cov_codiff2_arrays(A.values, w.values, w.jac, eps), points=w.points)


def l2_inner(u, v, quad):
    """``sum_nodes weight * sum_components (u_c, v_c)`` for sampled forms."""
    uu = getattr(u, "values", u)
    vv = getattr(v, "values", v)
    if uu.shape != vv.shape or uu.shape[0] != quad.n:
        raise ValueError("grid mismatch between forms and quadrature")
    return float(quad.weights @ pair_inner(uu, vv))


def sobolev_norm(A: LieForm1, eps: float, a: LieForm1, quad, p=2):
    """``||grad_A a||_p + ||a||_p`` with the componentwise covariant gradient."""
    if p != 2:
        raise NotImplementedError("only p = 2 is implemented")
    _check_grid(A, a)
    g = cov_grad_arrays(A.values, a.values, _need_jac(a), eps)
    return float(np.sqrt(max(l2_inner(g, g, quad), 0.0)) + np.sqrt(max(l2_inner(a.values, a.values, quad), 0.0)))


def chern_density(F: LieForm2):
    return chern_density_arrays(F.values)


def _need_jac(a):
    if a.jac is None:
        raise StencilUnderflow("1-form has no derivative data")
    return a.jac


# ---------------------------------------------------------------- sampling

def sample(field, points):
    """Sample a closed-form field ``field(x) -> (values, jac)`` as a LieForm1."""
    v, j = field(points)
    return LieForm1(v, j, points)


def fd_jacobian(fn, points, h=1e-4, order=2, domain_radius=None):
    """Centered finite-difference jacobian of ``fn(points) -> (N, ...)``.

    Raises :class:`StencilUnderflow` when a stencil point leaves the ball of
    radius ``domain_radius``.
    """
    reach = h * (1 if order == 2 else 2)
    if domain_radius is not None:
        if np.any(np.linalg.norm(points, axis=-1) + reach > domain_radius):
            raise StencilUnderflow("node too close to the chart boundary for the stencil")
    cols = []
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = h
        if order == 2:
            cols.append((fn(points + e) - fn(points - e)) / (2 * h))
        elif order == 4:
            cols.append((-fn(points + 2 * e) + 8 * fn(points + e) - 8 * fn(points - e) + fn(points - 2 * e)) / (12 * h))
        else:
            raise ValueError("order must be 2 or 4")
    return np.stack(cols, axis=1)


def sample_fd(fn, points, h=1e-4, order=4, domain_radius=None):
    v = fn(points)
    return LieForm1(v, fd_jacobian(fn, points, h, order, domain_radius), points)


def d3_of_jac2(jac2):
    """Exterior derivative of a 2-form as the four 3-form components 012, 013, 023, 123."""
    W = full2(jac2)  # [l, j, k]
    out = []
    for (i, j, k) in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        out.append(W[..., i, j, k, :] + W[..., j, k, i, :] + W[..., k, i, j, :])
    return np.stack(out, axis=-2)


# ---------------------------------------------------------------- integration

def integrate(quad, density_fn, chunk=8192):
    """Integrate ``density_fn(nodes) -> (N,) or (N, k)`` with ordered chunk sums."""
    nodes = quad.nodes
    w = quad.weights

    def part(s):
        return np.tensordot(w[s], density_fn(nodes[s]), axes=(0, 0))

    return ordered_sum(chunk_map(part, len(w), chunk))
