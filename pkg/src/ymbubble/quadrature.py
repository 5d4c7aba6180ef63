"""Quadrature rules on S^3, the unit ball B^4 and R^4.

All rules are tensor products of one-dimensional Gauss rules, so they are
deterministic and exact for polynomials up to a known degree.  A
:class:`ChartQuadrature` keeps its charts separate so integrals can be
reported per region (for instance the annuli around a bubble).
"""

from dataclasses import dataclass, field
import hashlib

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

VOL_B4 = np.pi ** 2 / 2
AREA_S3 = 2 * np.pi ** 2


@dataclass(frozen=True)
class SphereRule:
    """Product rule on S^3 using hyperspherical angles.

    ``zeta = (cos c, sin c cos t, sin c sin t cos f, sin c sin t sin f)``;
    Gauss-Chebyshev of the second kind in ``cos c``, Gauss-Legendre in
    ``cos t`` and the trapezoid rule in ``f``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    sizes: tuple

    @property
    def n(self):
        return len(self.weights)

    def exact_degree(self):
        nc, nt, nf = self.sizes
        return min(2 * nc - 1, 2 * nt - 1, nf - 1)


def sphere_rule(nc=8, nt=8, nf=16):
    k = np.arange(1, nc + 1)
    th = k * np.pi / (nc + 1)
    tc = np.cos(th)
    wc = np.pi / (nc + 1) * np.sin(th) ** 2
    # sin^2 c dc = sqrt(1 - t^2) dt, the Chebyshev-U weight
    tt, wt = roots_legendre(nt)
    ff = 2 * np.pi * np.arange(nf) / nf
    wf = np.full(nf, 2 * np.pi / nf)
    C, T, Fi = np.meshgrid(tc, tt, ff, indexing="ij")
    W = wc[:, None, None] * wt[None, :, None] * wf[None, None, :]
    sc = np.sqrt(1 - C ** 2)
    st = np.sqrt(1 - T ** 2)
    nodes = np.stack([C, sc * T, sc * st * np.cos(Fi), sc * st * np.sin(Fi)], -1)
    return SphereRule(nodes.reshape(-1, 4), W.reshape(-1), (nc, nt, nf))


def _gl(a, b, n):
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


@dataclass
class Chart:
    name: str
    nodes: np.ndarray
    weights: np.ndarray
    radius: np.ndarray = None  # distance to the chart center, when polar


@dataclass
class ChartQuadrature:
    """A list of charts covering a region, plus the bubble data it was built for."""

    charts: list
    center: np.ndarray = field(default_factory=lambda: np.zeros(4))
    scale: float = 1.0
    region: str = "ball"

    @property
    def nodes(self):
        return np.concatenate([c.nodes for c in self.charts])

    @property
    def weights(self):
        return np.concatenate([c.weights for c in self.charts])

    @property
    def radius(self):
        return np.concatenate([c.radius for c in self.charts])

    @property
    def n(self):
        return sum(len(c.weights) for c in self.charts)

    def volume(self):
        return float(np.sum(self.weights))

    def digest(self):
        h = hashlib.sha256()
        for c in self.charts:
            h.update(np.ascontiguousarray(c.nodes, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(c.weights, dtype="<f8").tobytes())
        return h.hexdigest()

    def integrate(self, values):
        """Integrate nodal values (first axis over nodes)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def ball_quadrature(nr=10, sphere=None, radius=1.0):
    """Gauss-Jacobi radial rule (weight r^3) times a sphere rule on B_radius."""
    sphere = sphere or sphere_rule()
    t, w = roots_jacobi(nr, 0.0, 3.0)
    r = 0.5 * (t + 1)
    # int_0^1 r^3 f dr = (1/16) int (1+t)^3 f dt
    wr = w / 16.0
    r = r * radius
    wr = wr * radius ** 4
    nodes = (r[:, None, None] * sphere.nodes[None]).reshape(-1, 4)
    weights = (wr[:, None] * sphere.weights[None]).reshape(-1)
    rad = np.repeat(r, sphere.n)
    return ChartQuadrature([Chart("ball", nodes, weights, rad)], np.zeros(4), radius, "ball")


def _shell_chart(name, center, sphere, r, wr):
    nodes = center + (r[:, None, None] * sphere.nodes[None]).reshape(-1, 4)
    weights = (wr[:, None] * r[:, None] ** 3 * sphere.weights[None]).reshape(-1)
    return Chart(name, nodes, weights, np.repeat(r, sphere.n))


def bubble_seams(lam, r_max):
    """Default radial seams around a bubble of scale ``lam``."""
    seams = [lam * f for f in (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1, 2, 4, 8)]
    return [s for s in seams if s < r_max]


def radial_segments(seams, n_per, cutoff_pieces=None):
    """Gauss-Legendre nodes on [0, s1], [s1, s2], ...; returns (r, w, labels).

    ``cutoff_pieces`` maps a segment index to a number of equal sub-pieces,
    used on the annuli where the cutoff functions vary.
    """
    cutoff_pieces = cutoff_pieces or {}
    edges = [0.0] + list(seams)
    rs, ws, lab = [], [], []
    for k in range(len(edges) - 1):
        m = cutoff_pieces.get(k, 1)
        sub = np.linspace(edges[k], edges[k + 1], m + 1)
        for j in range(m):
            r, w = _gl(sub[j], sub[j + 1], n_per)
            rs.append(r)
            ws.append(w)
            lab += [k] * n_per
    return np.concatenate(rs), np.concatenate(ws), np.array(lab)


def r4_quadrature(center, lam, n_per=20, n_outer=40, sphere=None, r_inner=None):
    """Quadrature on all of R^4 around ``center``.

    Inside ``r_inner`` (default 8 lam) graded Gauss-Legendre shells; outside the
    substitution ``u = 1/r`` maps the tail onto a finite interval.
    """
    sphere = sphere or sphere_rule(6, 6, 12)
    center = np.asarray(center, dtype=float)
    r_inner = 8 * lam if r_inner is None else r_inner
    seams = [s for s in bubble_seams(lam, r_inner * 1.0001) if s < r_inner] + [r_inner]
    r, w, _ = radial_segments(seams, n_per)
    inner = _shell_chart("bubble", center, sphere, r, w)
    u, wu = _gl(0.0, 1.0 / r_inner, n_outer)
    ro = 1.0 / u
    # r^3 dr = u^-5 du; _shell_chart multiplies by r^3 so pass dr/du = u^-2
    outer = _shell_chart("tail", center, sphere, ro, wu / u ** 2)
    return ChartQuadrature([inner, outer], center, lam, "R4")


def distance_to_sphere(center, directions):
    """Distance from ``center`` (inside B^4) to the unit sphere along unit directions."""
    pw = directions @ center
    return -pw + np.sqrt(pw ** 2 + 1.0 - center @ center)


def bubble_ball_quadrature(center, lam, n_per=16, n_outer=32, sphere=None,
                           bubble_factor=8.0, cutoff_pieces=4, max_fraction=0.6):
    """Polar quadrature of B^4 centered at a bubble ``center`` of scale ``lam``.

    Radial seams sit at the cutoff radii; the annuli [lam/4, lam/2] and
    [lam, 2 lam] are split further since the cutoffs vary there.  The outer
    chart runs from the bubble radius to the unit sphere along each ray with
    a logarithmic radial map.
    """
    sphere = sphere or sphere_rule(10, 10, 20)
    center = np.asarray(center, dtype=float)
    dist = 1.0 - np.linalg.norm(center)
    r_b = min(bubble_factor * lam, max_fraction * dist)
    if r_b <= 2 * lam:
        raise ValueError("bubble does not fit inside the ball: 2*lam >= distance budget")
    seams = [s for s in bubble_seams(lam, r_b) if s < r_b * (1 - 1e-12)] + [r_b]
    pieces = {}
    for k, s in enumerate(seams):
        if np.isclose(s, lam / 2) or np.isclose(s, 2 * lam):
            pieces[k] = cutoff_pieces
    r, w, lab = radial_segments(seams, n_per, pieces)
    charts = []
    for k in range(len(seams)):
        m = lab == k
        lo = 0.0 if k == 0 else seams[k - 1]
        charts.append(_shell_chart(f"shell[{lo:.4g},{seams[k]:.4g}]", center, sphere, r[m], w[m]))
    # outer chart: r = r_b * (R/r_b)^s along each direction
    R = distance_to_sphere(center, sphere.nodes)
    s, ws = roots_legendre(n_outer)
    s = 0.5 * (s + 1)
    ws = 0.5 * ws
    L = np.log(R / r_b)
    rr = r_b * np.exp(s[:, None] * L[None, :])  # (ns, ndir)
    jac = rr * L[None, :]  # dr/ds
    nodes = center + rr[..., None] * sphere.nodes[None]
    weights = ws[:, None] * jac * rr ** 3 * sphere.weights[None]
    charts.append(Chart("outer", nodes.reshape(-1, 4), weights.reshape(-1), rr.reshape(-1)))
    return ChartQuadrature(charts, center, lam, "ball")


def region_masks(quad, lam):
    """Boolean masks of the four annular regions around the bubble center."""
    r = quad.radius
    return {
        "r<lam/4": r < lam / 4,
        "lam/4<r<lam/2": (r >= lam / 4) & (r < lam / 2),
        "lam/2<r<2lam": (r >= lam / 2) & (r < 2 * lam),
        "r>2lam": r >= 2 * lam,
    }
