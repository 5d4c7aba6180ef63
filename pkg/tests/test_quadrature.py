import numpy as np
import pytest

from ymbubble.quadrature import (AREA_S3, ball_quadrature, bubble_ball_quadrature, r4_quadrature,
                                 region_masks, sphere_rule)


def test_sphere_rule_area_and_moments():
    s = sphere_rule(8, 8, 16)
    assert np.isclose(s.weights.sum(), 2 * np.pi ** 2)
    assert np.isclose(AREA_S3, 2 * np.pi ** 2)
    assert np.allclose(np.linalg.norm(s.nodes, axis=1), 1)
    # int_{S^3} x_0^2 = area / 4, int x_0^4 = area / 8
    assert np.isclose(s.weights @ s.nodes[:, 0] ** 2, np.pi ** 2 / 2)
    assert np.isclose(s.weights @ s.nodes[:, 1] ** 4, np.pi ** 2 / 4)


def test_ball_volume_and_radial_moment():
    q = ball_quadrature(nr=8, sphere=sphere_rule(6, 6, 12))
    assert np.isclose(q.volume(), np.pi ** 2 / 2)
    r2 = np.sum(q.nodes ** 2, axis=1)
    assert np.isclose(q.integrate(r2), 2 * np.pi ** 2 / 6)


def test_r4_integrates_instanton_profile():
    # int_{R^4} (1 + |x|^2)^-4 dx = pi^2 / 6, and the lam-scaled version is lam^4 times that
    for lam in (0.05, 1.0):
        q = r4_quadrature(np.array([0.3, 0, 0.1, 0]), lam)
        r2 = np.sum((q.nodes - q.center) ** 2, axis=1) / lam ** 2
        assert np.isclose(q.integrate((1 + r2) ** -4), lam ** 4 * np.pi ** 2 / 6, rtol=1e-10)


def test_bubble_ball_covers_the_ball():
    q = bubble_ball_quadrature(np.array([0.2, 0.1, 0, 0]), 0.1)
    assert np.isclose(q.volume(), np.pi ** 2 / 2, rtol=1e-8)
    x = q.nodes
    assert np.all(np.linalg.norm(x, axis=1) <= 1 + 1e-12)
    assert np.isclose(q.integrate(np.sum(x ** 2, axis=1)), np.pi ** 2 / 3, rtol=1e-8)


def test_region_masks_partition():
    q = bubble_ball_quadrature(np.zeros(4), 0.1)
    m = region_masks(q, 0.1)
    total = sum(v.astype(int) for v in m.values())
    assert np.all(total == 1)


def test_bubble_must_fit():
    with pytest.raises(ValueError):
        bubble_ball_quadrature(np.array([0.9, 0, 0, 0]), 0.1)


def test_digest_is_stable_and_sensitive():
    a = ball_quadrature(nr=6).digest()
    assert a == ball_quadrature(nr=6).digest()
    assert a != ball_quadrature(nr=7).digest()
