"""Quaternion and su(2) arithmetic.

Quaternions are float arrays with a trailing axis of length 4, ordered
``(w, x, y, z)`` for ``w + x i + y j + z k``.  Imaginary quaternions (the
canonical picture of su(2) used throughout the package) carry a trailing axis
of length 3 holding the ``(i, j, k)`` coefficients.  Every function
broadcasts over leading axes.

The su(2) inner product is ``(X, Y) = -Tr(XY)``, which reads ``2 (x, y)`` on
imaginary quaternions; :func:`inner` carries that factor.
"""

import numpy as np

ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])

# Quaternion units e_0..e_3 = 1, i, j, k as rows.
UNITS = np.eye(4)

# so(3) basis (xi_1, xi_2, xi_3): infinitesimal rotations about the axes.
SO3_BASIS = np.array(
    [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ]
)


def qmul(a, b):
    """Hamilton product of quaternion arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def qconj(a):
    a = np.asarray(a, dtype=float)
    return a * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm(a):
    return np.sqrt(np.sum(np.asarray(a, dtype=float) ** 2, axis=-1))


def qinv(a):
    a = np.asarray(a, dtype=float)
    return qconj(a) / np.sum(a * a, axis=-1, keepdims=True)


def im_to_quat(x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1)


def quat_im(a):
    return np.asarray(a, dtype=float)[..., 1:]


def bracket(x, y):
    """Lie bracket ``[x, y] = xy - yx`` of imaginary quaternions.

    For imaginary quaternions this is twice the cross product.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    y0, y1, y2 = y[..., 0], y[..., 1], y[..., 2]
    return 2.0 * np.stack([x1 * y2 - x2 * y1, x2 * y0 - x0 * y2, x0 * y1 - x1 * y0], axis=-1)


def scaled_bracket(eps, x, y):
    """The bracket of su(2)_eps: ``eps * [x, y]``."""
    return eps * bracket(x, y)


def inner(x, y):
    """su(2) inner product ``2 (x1 y1 + x2 y2 + x3 y3)``."""
    return 2.0 * np.sum(np.asarray(x, dtype=float) * np.asarray(y, dtype=float), axis=-1)


def rotation_of(g):
    """Matrix of ``x -> g x g^{-1}`` on the (i, j, k) basis.

    The map is the double cover Sp(1) -> SO(3); ``rotation_of(-g)`` equals
    ``rotation_of(g)``.  Input is normalized first so slightly drifted unit
    quaternions still give an orthogonal matrix.
    """
    g = np.asarray(g, dtype=float)
    g = g / qnorm(g)[..., None]
    w, x, y, z = np.moveaxis(g, -1, 0)
    r = np.stack(
        [
            np.stack([w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z], -1),
        ],
        axis=-2,
    )
    return r


def adjoint(g, x):
    """Adjoint action ``g x g^{-1}`` of a unit quaternion on Im H."""
    r = rotation_of(g)
    return np.einsum("...ab,...b->...a", r, np.asarray(x, dtype=float))


def quat_of_rotation(r):
    """One of the two unit quaternions covering the rotation ``r``."""
    r = np.asarray(r, dtype=float)
    tr = np.trace(r)
    if tr > 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = 2.0 * np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif r[1, 1] > r[2, 2]:
        s = 2.0 * np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return q / qnorm(q)


def project_rotation(r):
    """Nearest rotation matrix (polar projection), used after compositions."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=float))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def renormalize(g):
    g = np.asarray(g, dtype=float)
    return g / qnorm(g)[..., None]


def phi_eps(eps, x):
    """The Lie algebra isomorphism su(2)_eps -> su(2), ``x -> eps x``."""
    return eps * np.asarray(x, dtype=float)


def exp_im(v):
    """Unit quaternion ``exp(v)`` for an imaginary quaternion ``v``."""
    v = np.asarray(v, dtype=float)
    th = np.sqrt(np.sum(v * v, axis=-1))
    sinc = np.where(th > 1e-12, np.sin(th) / np.where(th > 1e-12, th, 1.0), 1.0 - th * th / 6.0)
    return np.concatenate([np.cos(th)[..., None], sinc[..., None] * v], axis=-1)


def random_unit_quat(rng, size=None):
    shape = (4,) if size is None else (size, 4)
    q = rng.standard_normal(shape)
    return renormalize(q)


def random_rotation(rng, size=None):
    return rotation_of(random_unit_quat(rng, size))
