"""The charge-one instanton in its two charts.

Chart 1 (regular at the center ``p``)::

    I1 = Im((x - p) dxbar) / (lam^2 + |x - p|^2)

Chart 2 (regular at infinity, singular at ``p``)::

    I2 = Im(lam^2 (xbar - pbar) dx) / (|x - p|^2 (lam^2 + |x - p|^2))

The charts are related by ``g = (x - p)/|x - p|`` through
``I2 = g^-1 dg + g^-1 I1 g``.  Each quaternionic expression is expanded once
into the constant tensors ``QL`` and ``QR`` below, so values and exact
jacobians are cheap array contractions.
"""

from dataclasses import dataclass

import numpy as np

from . import algebra
from .forms import curvature_arrays
from .quadrature import r4_quadrature
from .parallel import chunk_map, ordered_sum

# QL[nu, mu] = Im(e_mu ebar_nu), QR[nu, mu] = Im(ebar_mu e_nu)
_E = algebra.UNITS
QL = np.array([[algebra.quat_im(algebra.qmul(_E[m], algebra.qconj(_E[n]))) for m in range(4)] for n in range(4)])
QR = np.array([[algebra.quat_im(algebra.qmul(algebra.qconj(_E[m]), _E[n])) for m in range(4)] for n in range(4)])


class SingularPoint(ValueError):
    """Evaluation requested at the singular point of a chart."""


@dataclass(frozen=True)
class InstantonParams:
    p: tuple
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))

    @property
    def center(self):
        return np.array(self.p)


def linear_im_form(y, Q):
    """``sum_mu y_mu Q[nu, mu]`` for every component ``nu``."""
    return np.einsum("...m,nma->...na", y, Q)


def radial_scaled(y, Q, phi, dphi):
    """Value and jacobian of ``phi(|y|^2) * linear_im_form(y, Q)``.

    ``dphi`` is the derivative of ``phi`` with respect to ``|y|^2``.
    """
    L = linear_im_form(y, Q)
    val = phi[..., None, None] * L
    jac = phi[..., None, None, None] * np.moveaxis(Q, 1, 0)[None] \
        + (2 * dphi)[..., None, None, None] * y[..., :, None, None] * L[..., None, :, :]
    return val, jac


def eval_I1(params, x):
    """Chart-1 potential and its jacobian at points ``x`` of shape (N, 4)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x - params.center
    s = np.sum(y * y, axis=-1)
    l2 = params.lam ** 2
    phi = 1.0 / (l2 + s)
    return radial_scaled(y, QL, phi, -phi ** 2)


def eval_I2(params, x, check=True):
    """Chart-2 potential and jacobian; raises :class:`SingularPoint` at ``x = p``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x - params.center
    s = np.sum(y * y, axis=-1)
    if check and np.any(s == 0):
        raise SingularPoint("chart-2 instanton is singular at its center")
    l2 = params.lam ** 2
    phi = l2 / (s * (l2 + s))
    dphi = -l2 * (l2 + 2 * s) / (s * (l2 + s)) ** 2
    return radial_scaled(y, QR, phi, dphi)


def transition(p, x):
    """The transition function ``(x - p)/|x - p|`` as unit quaternions."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x - np.asarray(p, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    if np.any(r == 0):
        raise SingularPoint("transition function undefined at p")
    return y / r[..., None]


def transition_log_derivative(p, x):
    """``(d_mu g) g^-1`` for ``g = (x - p)/|x - p|``, shape (N, 4, 3)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x - np.asarray(p, dtype=float)
    s = np.sum(y * y, axis=-1)
    # (d_mu g) g^-1 = Im(e_mu ybar)/|y|^2
    return np.einsum("...m,nma->...na", y, QL) / s[..., None, None]


def maurer_cartan(p, x):
    """``g^-1 dg`` for the transition function, as an Im H-valued 1-form."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x - np.asarray(p, dtype=float)
    s = np.sum(y * y, axis=-1)
    return np.einsum("...m,nma->...na", y, QR) / s[..., None, None]


def gluing_residual(params, x):
    """``I2 - (g^-1 dg + g^-1 I1 g)`` at points ``x`` (pure algebra)."""
    g = transition(params.p, x)
    i1, _ = eval_I1(params, x)
    i2, _ = eval_I2(params, x)
    ginv = algebra.qconj(g)
    conj = algebra.adjoint(ginv[:, None, :], i1)
    return i2 - (maurer_cartan(params.p, x) + conj)


def instanton_curvature(params, chart, x):
    """Exact curvature ``dI + (1/2)[I ^ I]`` in chart 1 or 2."""
    if chart == 1:
        v, j = eval_I1(params, x)
    elif chart == 2:
        v, j = eval_I2(params, x)
    else:
        raise ValueError("chart must be 1 or 2")
    return curvature_arrays(v, j, 1.0)


def projected_I2(params, h_field, x):
    """``I2 - h`` with ``h_field(x) -> (values, jac)``; returns values and jacobian."""
    v, j = eval_I2(params, x)
    hv, hj = h_field(x)
    return v - hv, j - hj


def action_density(params, x):
    F = instanton_curvature(params, 1, x)
    return 2.0 * np.sum(F * F, axis=(-2, -1))


def instanton_action(params, quad=None, **quad_kw):
    """``int_{R^4} |F|^2`` over an R^4 quadrature centered at ``p``."""
    quad = quad or r4_quadrature(params.center, params.lam, **quad_kw)
    nodes, w = quad.nodes, quad.weights
    parts = chunk_map(lambda s: w[s] @ action_density(params, nodes[s]), len(w))
    return float(ordered_sum(parts))


def asd_ratio(params, quad=None, **quad_kw):
    """``||F^-||^2 / ||F||^2`` over R^4."""
    from .forms import asd

    quad = quad or r4_quadrature(params.center, params.lam, **quad_kw)
    nodes, w = quad.nodes, quad.weights

    def part(s):
        F = instanton_curvature(params, 1, nodes[s])
        Fm = asd(F)
        return np.array([w[s] @ np.sum(Fm * Fm, axis=(-2, -1)), w[s] @ np.sum(F * F, axis=(-2, -1))])

    num, den = ordered_sum(chunk_map(part, len(w)))
    return float(num / den)
