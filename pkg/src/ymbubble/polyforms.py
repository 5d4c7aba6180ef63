"""Polynomial Im H-valued 1-forms on R^4.

A :class:`PolyForm` stores coefficients over the monomials ``x^e`` with
``|e| <= degree``; values and derivatives of any order are exact.  These are
the fields produced by the linear solves on the ball, so they can be evaluated
anywhere (in particular on the bubble-centered quadrature) without
interpolation.
"""

from functools import lru_cache
import itertools

import numpy as np


@lru_cache(maxsize=None)
def exponents(degree):
    """All exponent tuples of total degree <= ``degree``, graded order."""
    out = []
    for d in range(degree + 1):
        for e in itertools.product(range(d + 1), repeat=4):
            if sum(e) == d:
                out.append(e)
    return np.array(out, dtype=int)


@lru_cache(maxsize=None)
def exponent_index(degree):
    return {tuple(e): k for k, e in enumerate(exponents(degree))}


@lru_cache(maxsize=None)
def _shift_tables(degree):
    """For each axis, the column of ``x^(e - 1_axis)`` and the factor ``e_axis``."""
    E = exponents(degree)
    idx = exponent_index(degree)
    col = np.zeros((4, len(E)), dtype=int)
    fac = np.zeros((4, len(E)))
    for k, e in enumerate(E):
        for a in range(4):
            if e[a] > 0:
                f = list(e)
                f[a] -= 1
                col[a, k] = idx[tuple(f)]
                fac[a, k] = e[a]
    return col, fac


def monomials(x, degree, deriv=0):
    """Monomial values and derivatives at points ``x`` (N, 4).

    Returns ``M`` (N, m); with ``deriv >= 1`` also ``dM`` (N, 4, m); with
    ``deriv >= 2`` also ``ddM`` (N, 4, 4, m).  Derivatives are gathered from
    the lower-degree columns of ``M``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    E = exponents(degree)
    idx = exponent_index(degree)
    M = np.empty((x.shape[0], len(E)))
    M[:, 0] = 1.0
    # build graded: x^e = x_a * x^(e - 1_a) with a the first nonzero axis
    for k in range(1, len(E)):
        e = E[k]
        a = int(np.flatnonzero(e)[0])
        f = e.copy()
        f[a] -= 1
        M[:, k] = x[:, a] * M[:, idx[tuple(f)]]
    if deriv == 0:
        return M
    col, fac = _shift_tables(degree)
    dM = M[:, col] * fac[None]
    if deriv == 1:
        return M, dM
    ddM = np.empty((x.shape[0], 4, 4, M.shape[1]))
    for a in range(4):
        ddM[:, a] = dM[:, :, col[a]] * fac[a][None, None]
    return M, dM, ddM


class PolyForm:
    """Polynomial 1-form ``sum_m coef[m, nu, a] x^m dx^nu e_a``."""

    def __init__(self, coef, degree):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[0] != len(exponents(degree)):
            raise ValueError("coefficient count does not match degree")
        self.coef = coef
        self.degree = degree

    @classmethod
    def zero(cls, degree=1):
        return cls(np.zeros((len(exponents(degree)), 4, 3)), degree)

    @classmethod
    def linear(cls, c):
        """``sum c[a, j, k] x^j dx^k e_a`` from a (3, 4, 4) tensor."""
        c = np.asarray(c, dtype=float)
        idx = exponent_index(1)
        coef = np.zeros((len(exponents(1)), 4, 3))
        for j in range(4):
            e = [0, 0, 0, 0]
            e[j] = 1
            coef[idx[tuple(e)], :, :] = c[:, j, :].T
        return cls(coef, 1)

    @classmethod
    def from_terms(cls, terms, degree):
        """Build from ``[(exponent tuple, nu, lie_vector), ...]``."""
        idx = exponent_index(degree)
        coef = np.zeros((len(exponents(degree)), 4, 3))
        for e, nu, v in terms:
            coef[idx[tuple(e)], nu] += np.asarray(v, dtype=float)
        return cls(coef, degree)

    def raised(self, degree):
        if degree < self.degree:
            raise ValueError("cannot lower degree")
        if degree == self.degree:
            return self
        idx = exponent_index(degree)
        coef = np.zeros((len(exponents(degree)),) + self.coef.shape[1:])
        for k, e in enumerate(exponents(self.degree)):
            coef[idx[tuple(e)]] = self.coef[k]
        return PolyForm(coef, degree)

    def __add__(self, other):
        d = max(self.degree, other.degree)
        return PolyForm(self.raised(d).coef + other.raised(d).coef, d)

    def scaled(self, s):
        return PolyForm(s * self.coef, self.degree)

    def __call__(self, x):
        M, dM = monomials(x, self.degree, 1)
        m = self.coef.shape[0]
        C = self.coef.reshape(m, -1)
        val = (M @ C).reshape(len(M), 4, 3)
        jac = (dM.reshape(-1, m) @ C).reshape(len(M), 4, 4, 3)
        return val, jac

    def values(self, x):
        return np.einsum("nm,mva->nva", monomials(x, self.degree), self.coef)

    def hessian(self, x):
        """Second derivatives ``[n, l, mu, nu, a] = d_l d_mu A_nu^a``."""
        _, _, ddM = monomials(x, self.degree, 2)
        return np.einsum("nlkm,mva->nlkva", ddM, self.coef)
