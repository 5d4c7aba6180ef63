import numpy as np
import pytest

from ymbubble import harmonic
from ymbubble.forms import fd_jacobian
from ymbubble.polyforms import PolyForm
from ymbubble.quadrature import sphere_rule


def _ball_points(rng, n, radius):
    x = rng.normal(size=(n, 4))
    return x * (radius * rng.uniform(size=n) ** 0.25 / np.linalg.norm(x, axis=1))[:, None]


def _laplacian(fn, x, h=1e-3):
    out = -8 * fn(x)
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = h
        out = out + fn(x + e) + fn(x - e)
    return out / h ** 2


def test_h_p_is_harmonic_with_the_right_trace(rng):
    p = np.array([0.3, 0.0, 0.1, 0.0])
    H = harmonic.h_p_field(p)
    x = _ball_points(rng, 20, 0.8)
    assert np.max(np.abs(_laplacian(lambda y: H(y)[0], x))) < 1e-4
    s = sphere_rule(4, 4, 8)
    assert np.allclose(H(s.nodes)[0], harmonic.h_p_boundary(p, s).values, atol=1e-13)
    fd = fd_jacobian(lambda y: H(y)[0], x, h=1e-5)
    assert np.allclose(H(x)[1], fd, atol=1e-7)


def test_h_lambda_p_trace_and_jacobian(rng):
    p = np.array([0.3, 0.0, 0.0, 0.0])
    H = harmonic.h_lambda_p_field(0.1, p)
    s = sphere_rule(4, 4, 8)
    assert np.allclose(H(s.nodes)[0], harmonic.h_lambda_p_boundary(0.1, p, s).values, atol=1e-12)
    x = _ball_points(rng, 10, 0.8)
    assert np.max(np.abs(_laplacian(lambda y: H(y)[0], x))) < 1e-3
    fd = fd_jacobian(lambda y: H(y)[0], x, h=1e-5)
    assert np.allclose(H(x)[1], fd, atol=1e-8)


def test_h_scaling_slope():
    slope, sups = harmonic.check_h_scaling(np.array([0.3, 0, 0, 0]), [0.05, 0.075, 0.1, 0.15, 0.2])
    assert 3.7 <= slope <= 4.3
    with pytest.raises(ValueError):
        harmonic.check_h_scaling(np.zeros(4), [0.1])


def test_poisson_series_reproduces_h0(rng):
    # degree-24 series on a rule exact to degree 27 reproduces linear data exactly
    x = _ball_points(rng, 100, 0.8)
    H = harmonic.poisson_extend(harmonic.h_p_boundary(np.zeros(4), sphere_rule(14, 14, 28)))
    assert np.max(np.abs(H(x)[0] - harmonic.h_p_field(np.zeros(4))(x)[0])) < 1e-8


def test_kernel_method_refuses_near_boundary():
    H = harmonic.poisson_extend(harmonic.h_p_boundary(np.zeros(4), sphere_rule(4, 4, 8)), method="kernel")
    with pytest.raises(harmonic.NearBoundaryError):
        H(np.array([[0.99, 0, 0, 0]]))


def test_d0_solution_residuals(background):
    res = background[1].residuals
    assert res["closed"] < 1e-10
    assert res["coclosed"] < 1e-8
    assert res["trace"] < 1e-10


def test_d0_minimizes_energy(background):
    A0 = background[0]
    e_min = harmonic.dirichlet_energy(background[1].potential)
    assert e_min <= harmonic.harmonic_energy_extension(A0) * (1 + 1e-8)


def test_linear_data_with_zero_curl_part_is_trivial():
    # A0 = d(f) restricted is exact: the curvature vanishes
    c = np.zeros((3, 4, 4))
    c[0] = np.eye(4)  # x . dx e_1 = d(|x|^2 / 2) e_1
    sol = harmonic.solve_D0(PolyForm.linear(c))
    x = np.random.default_rng(1).normal(size=(5, 4)) * 0.3
    assert np.max(np.abs(sol.curvature(x))) < 1e-10


def test_picard_eps_zero_and_guard(background, cfg):
    A0, base = background
    z = harmonic.small_solution_picard(0.0, A0, base=base)
    assert np.array_equal(z.potential.coef, base.potential.coef)
    with pytest.raises(harmonic.NonContraction):
        harmonic.small_solution_picard(0.2, A0, base=base, eps_max=cfg.eps_max)
    with pytest.raises(ValueError):
        harmonic.small_solution_picard(-0.1, A0, base=base)


def test_picard_converges_geometrically(background):
    s = harmonic.small_solution_picard(0.04, background[0], tol=1e-12, base=background[1])
    h = np.array(s.history)
    assert h[-1] < 1e-12
    assert np.all(h[1:] < h[:-1])
