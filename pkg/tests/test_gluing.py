import numpy as np
import pytest

from ymbubble import algebra, gluing
from ymbubble.instanton import InstantonParams, eval_I1
from ymbubble.quadrature import r4_quadrature, sphere_rule

EIGHT_PI2 = 8 * np.pi ** 2


def test_cutoff_profile():
    t = np.linspace(0, 3, 301)
    b, b1, b2 = gluing.beta_profile(t)
    assert np.all(b[t <= 1] == 1) and np.all(b[t >= 2] == 0)
    assert np.all(np.diff(b) <= 0)
    h = 1e-6
    tt = np.linspace(1.05, 1.95, 19)
    fd1 = (gluing.beta_profile(tt + h)[0] - gluing.beta_profile(tt - h)[0]) / (2 * h)
    fd2 = (gluing.beta_profile(tt + h)[1] - gluing.beta_profile(tt - h)[1]) / (2 * h)
    assert np.allclose(gluing.beta_profile(tt)[1], fd1, atol=1e-7)
    assert np.allclose(gluing.beta_profile(tt)[2], fd2, atol=1e-5)


def test_cutoff_beta_gradient(rng):
    p = np.array([0.1, 0, 0, 0])
    x = p + rng.normal(size=(8, 4)) * 0.15
    b, g, H = gluing.cutoff_beta(0.1, p, x, 2)
    from ymbubble.forms import fd_jacobian
    assert np.allclose(g, fd_jacobian(lambda y: gluing.cutoff_beta(0.1, p, y), x, 1e-6), atol=1e-6)
    assert np.allclose(H, fd_jacobian(lambda y: gluing.cutoff_beta(0.1, p, y, 1)[1], x, 1e-6), atol=1e-4)


def test_admissibility():
    ok = gluing.GlueParams((0.2, 0, 0, 0), (1, 0, 0, 0), 0.1, 0.01).check()
    assert np.isclose(np.linalg.norm(ok.quat), 1)
    with pytest.raises(gluing.Inadmissible):
        gluing.GlueParams((0.2, 0, 0, 0), (1, 0, 0, 0), 0.2, 0.01).check()  # lam^2 = 4 eps
    with pytest.raises(gluing.Inadmissible):
        gluing.GlueParams((0.6, 0, 0, 0), (1, 0, 0, 0), 0.1, 0.01).check()  # |p| > 1 - d0


def test_overlap_consistency(glued, rng):
    At = glued.connection(0.01)
    q = At.q
    y = rng.normal(size=(200, 4))
    y *= (q.lam * rng.uniform(0.05, 0.25, size=200) / np.linalg.norm(y, axis=1))[:, None]
    assert np.max(np.abs(At.overlap_residual(q.center + y))) < 1e-8


def test_gauge_invariant_density_continuous_across_switch(glued, rng):
    At = glued.connection(0.01)
    q = At.q
    d = rng.normal(size=(50, 4))
    d /= np.linalg.norm(d, axis=1)[:, None]
    x = q.center + At.chart1_radius * d
    from ymbubble.forms import curvature_arrays
    F1 = curvature_arrays(*At.chart1(x), 1.0)
    F2 = curvature_arrays(*At.chart2(x), 1.0)
    e1 = np.sum(F1 * F1, axis=(1, 2))
    e2 = np.sum(F2 * F2, axis=(1, 2))
    assert np.allclose(e1, e2, rtol=1e-10)


def test_outside_bubble_is_background(glued, rng):
    At = glued.connection(0.01)
    q = At.q
    x = q.center + np.array([[0.3, 0, 0, 0], [0, -0.25, 0.1, 0]])
    _, _, parts = At.chart2(x, parts=True)
    assert np.allclose(parts["background"][0], 0.01 * glued.small(0.01)(x)[0])


def test_expansion_identity_and_charge(glued, background):
    eps = 0.01
    rep = gluing.j_eps(glued.q(eps), glued.small(eps), background[1])
    assert rep.J == rep.eight_pi2 + rep.small_energy + rep.reduced + rep.r1 or \
        abs(rep.J - (rep.eight_pi2 + rep.small_energy + rep.reduced + rep.r1)) <= 4 * np.spacing(rep.J)
    assert abs(rep.chern - 1) < 1e-2
    assert np.isclose(sum(rep.regions.values()), rep.J, rtol=1e-14)
    assert abs(rep.r1) < 1e-2 * abs(rep.reduced)
    assert '"r1"' in rep.to_json()


def test_flat_background_charge_is_one():
    q = gluing.GlueParams((0.1, 0, 0, 0), (1, 0, 0, 0), 0.1, 0.01)
    assert abs(gluing.relative_chern(q, None) - 1) < 1e-8


def test_charge_gauge_independent(glued):
    eps = 0.01
    q = glued.q(eps)
    h = algebra.random_unit_quat(np.random.default_rng(3))
    q2 = gluing.GlueParams(q.p, tuple(algebra.qmul(h, q.quat)), q.lam, q.eps)
    a = gluing.relative_chern(q, glued.small(eps))
    b = gluing.relative_chern(q2, glued.small(eps))
    assert abs(a - b) < 1e-10


def _plain_bump(center, scale, C, L):
    def fn(x):
        rho, grho = gluing.cutoff_beta(scale, center, x, 1)
        poly = C[None] + np.einsum("nk,kva->nva", (x - center) / scale, L)
        jac = grho[:, :, None, None] * poly[:, None] + rho[:, None, None, None] * (L[None] / scale)
        return rho[:, None, None] * poly, jac
    return gluing.Variation(fn, "bump", (center, 2 * scale))


def test_gradient_pairing_vanishes_at_instanton():
    # at an exact Yang-Mills solution the first variation is zero for every test form
    params = InstantonParams((0.0, 0.0, 0.0, 0.0), 0.3)
    A = lambda x: eval_I1(params, x)
    quad = r4_quadrature(params.center, params.lam, n_per=10, n_outer=6, sphere=sphere_rule(6, 6, 12),
                         r_inner=1.2)
    rng = np.random.default_rng(0)
    bumps = [_plain_bump(rng.normal(size=4) * 0.1, 0.15, rng.normal(size=(4, 3)), rng.normal(size=(4, 4, 3)))
             for _ in range(20)]
    for a in bumps:
        g = gluing.gradient_pairing(A, 1.0, a, quad, check=False)
        n = np.sqrt(gluing.bilinear_forms(A, 1.0, [a], quad)["S"][0, 0])
        assert abs(g) < 1e-6 * n
    # the direct form integrates a cancelling pair; it reaches zero only as the grid is refined
    fine = r4_quadrature(params.center, params.lam, n_per=16, n_outer=6, sphere=sphere_rule(10, 10, 20),
                         r_inner=1.2)
    coarse_d = gluing.gradient_pairing(A, 1.0, bumps[0], quad, check=False, form="direct")
    fine_d = gluing.gradient_pairing(A, 1.0, bumps[0], fine, check=False, form="direct")
    assert abs(fine_d) < 0.1 * abs(coarse_d)


def test_trace_check(glued):
    At = glued.connection(0.01)
    a = gluing.bump_variation(At, np.zeros(4), 0.2, np.ones((4, 3)), np.zeros((4, 4, 3)))
    gluing.check_trace(a)
    bad = gluing.Variation(lambda x: (np.ones((len(x), 4, 3)), np.zeros((len(x), 4, 4, 3))))
    with pytest.raises(gluing.TraceViolation):
        gluing.check_trace(bad)


def test_tangent_frame_matches_parameter_derivative(glued, rng):
    # away from chart 1 the frame is the plain central difference of the glued potential
    At = glued.connection(0.01)
    q = At.q
    frame = gluing.tangent_frame(At)
    x = q.center + rng.normal(size=(30, 4)) * q.lam
    x = x[np.linalg.norm(x - q.center, axis=1) > 0.3 * q.lam]
    d = max(1e-3 * q.lam, 1e-5)
    Ap = gluing.GluedConnection(q.moved(dp=np.array([d, 0, 0, 0])), At.small)
    Am = gluing.GluedConnection(q.moved(dp=np.array([-d, 0, 0, 0])), At.small)
    ref = (Ap.chart2(x)[0] - Am.chart2(x)[0]) / (2 * d)
    assert np.allclose(frame[0](x)[0], ref, rtol=1e-8, atol=1e-8 * np.max(np.abs(ref)))
    assert [f.name for f in frame] == list(gluing.FRAME_NAMES)


def test_hessian_positive_on_frame_complement(glued):
    At = glued.connection(0.02)
    r = gluing.hessian_positivity_probe(At, n_samples=8, seed=1, zero_mode_check=False)
    assert r["frame_rank"] == 8
    assert r["min_quotient"] > 0
    assert r["frame_quotients"]["lam"] < 0.1 * r["min_quotient"]


def test_modified_hessian_symmetric(glued):
    At = glued.connection(0.02)
    rng = np.random.default_rng(9)
    a, b = gluing.random_variations(At, 2, rng)
    quad = gluing.probe_quadrature(At.q)
    assert np.isclose(gluing.modified_hessian(At, 1.0, a, b, quad), gluing.modified_hessian(At, 1.0, b, a, quad),
                      rtol=1e-10)
