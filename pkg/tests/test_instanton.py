import numpy as np
import pytest

from ymbubble import instanton
from ymbubble.forms import fd_jacobian
from ymbubble.quadrature import r4_quadrature, sphere_rule

EIGHT_PI2 = 8 * np.pi ** 2
P = instanton.InstantonParams((0.1, -0.05, 0.0, 0.2), 0.1)


def test_action_is_eight_pi_squared():
    assert abs(instanton.instanton_action(P) - EIGHT_PI2) / EIGHT_PI2 < 1e-10


def test_action_scale_and_translation_invariant():
    a = instanton.instanton_action(instanton.InstantonParams((0, 0, 0, 0), 0.05))
    b = instanton.instanton_action(instanton.InstantonParams((0.3, 0, 0, 0), 0.2))
    assert abs(a - b) / EIGHT_PI2 < 1e-10


def test_coarse_grid_degrades_action():
    fine = instanton.instanton_action(P)
    coarse = instanton.instanton_action(P, r4_quadrature(P.center, P.lam, n_per=3, n_outer=4,
                                                           sphere=sphere_rule(2, 2, 4)))
    assert abs(coarse - EIGHT_PI2) > abs(fine - EIGHT_PI2)


def test_self_dual():
    assert instanton.asd_ratio(P) < 1e-20


def test_gluing_relation(rng):
    x = P.center + rng.normal(size=(1000, 4)) * P.lam
    assert np.max(np.abs(instanton.gluing_residual(P, x))) < 1e-12


def test_analytic_jacobians_match_fd(rng):
    x = P.center + rng.normal(size=(6, 4)) * P.lam
    for ev in (instanton.eval_I1, instanton.eval_I2):
        _, j = ev(P, x)
        fd = fd_jacobian(lambda y: ev(P, y)[0], x, h=1e-6, order=4)
        assert np.allclose(j, fd, atol=1e-6 * np.max(np.abs(j)))


def test_chart2_singular_at_center():
    with pytest.raises(instanton.SingularPoint):
        instanton.eval_I2(P, P.center[None])


def test_transition_is_unit(rng):
    x = rng.normal(size=(10, 4))
    assert np.allclose(np.linalg.norm(instanton.transition(P.p, x), axis=1), 1)


def test_bad_scale():
    with pytest.raises(ValueError):
        instanton.InstantonParams((0, 0, 0, 0), 0.0)
