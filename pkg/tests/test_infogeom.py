import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from likelihood_lab import infogeom as ig
from likelihood_lab.exceptions import GeodesicError, SingularMetricError
from likelihood_lab.families import get_family

NORMAL = get_family("normal")


def _circle_oracle(r):
    # hyperbolic plane of curvature -1/2
    a = np.sqrt(2.0)
    return 2 * np.pi * a * np.sinh(r / a), 2 * np.pi * a * a * (np.cosh(r / a) - 1)


# -- metric ------------------------------------------------------------------------

@pytest.mark.parametrize("theta,expected", [([0.0, 1.0], [[1, 0], [0, 2]]), ([3.0, 2.0], [[0.25, 0], [0, 0.5]])])
def test_normal_metric_values(theta, expected):
    m = ig.fisher_rao_metric(NORMAL, theta)
    assert m.regular and m.method == "analytic"
    np.testing.assert_allclose(m.g, expected, atol=1e-15)
    quad = ig.fisher_rao_metric(NORMAL, theta, method="quadrature")
    np.testing.assert_allclose(quad.g, expected, atol=1e-6)


def test_pullback_to_log_scale():
    # tau = ln sigma, d(mu, sigma)/d(mu, tau) = diag(1, sigma)
    for sigma in (0.3, 1.0, 4.0):
        g = ig.fisher_rao_metric(NORMAL, [0.0, sigma]).g
        pulled = ig.pullback_metric(g, np.diag([1.0, sigma]))
        np.testing.assert_allclose(pulled, [[1 / sigma**2, 0], [0, 2]], atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(0.05, 20))
def test_metric_positive_definite(mu, sigma):
    m = ig.fisher_rao_metric(NORMAL, [mu, sigma])
    assert m.regular
    assert np.all(np.linalg.eigvalsh(m.g) > 0)


def test_unknown_metric_method():
    with pytest.raises(ValueError):
        ig.fisher_rao_metric(NORMAL, [0.0, 1.0], method="guess")


# -- curvature -----------------------------------------------------------------

def test_normal_curvature_is_minus_half():
    rng = np.random.default_rng(7)
    values = [ig.gaussian_curvature(NORMAL, [rng.uniform(-3, 3), rng.uniform(0.3, 3)]) for _ in range(10)]
    assert np.all(np.abs(np.array(values) + 0.5) <= 1e-3)
    assert np.ptp(values) <= 2e-3


def test_euclidean_metric_is_flat():
    assert ig.gaussian_curvature(lambda th: np.eye(2), [0.3, -1.2]) == pytest.approx(0.0, abs=1e-6)


def test_unit_sphere_curvature_is_one():
    # independent oracle: polar coordinates on the unit sphere
    sphere = lambda th: np.diag([1.0, np.sin(th[0]) ** 2])  # noqa: E731
    for u in (0.4, 1.0, 2.2):
        assert ig.gaussian_curvature(sphere, [u, 0.7]) == pytest.approx(1.0, abs=1e-4)


def test_singular_metric_raises():
    with pytest.raises(SingularMetricError):
        ig.gaussian_curvature(lambda th: np.zeros((2, 2)), [0.0, 1.0])


def test_curvature_needs_two_parameters():
    with pytest.raises(ValueError):
        ig.gaussian_curvature(get_family("binomial"), [0.3])


# -- geodesics -----------------------------------------------------------------

def test_zero_length_geodesic():
    path = ig.geodesic(NORMAL, [1.0, 2.0], [1.0, 2.0])
    assert path.length == 0.0
    assert np.all(path.points == [1.0, 2.0])


@pytest.mark.parametrize("s0,s1", [(1.0, 2.0), (0.5, 3.0), (2.0, 0.7)])
def test_meridian_length(s0, s1):
    path = ig.geodesic(NORMAL, [0.4, s0], [0.4, s1])
    assert path.length == pytest.approx(np.sqrt(2) * abs(np.log(s1 / s0)), abs=1e-4)
    np.testing.assert_allclose(path.points[:, 0], 0.4, atol=1e-8)


def test_equal_scale_geodesic_bulges_upward():
    path = ig.geodesic(NORMAL, [-2.0, 1.0], [2.0, 1.0])
    assert path.points[:, 1].max() > 1.0
    assert path.endpoint_residual <= 1e-9


def test_geodesic_symmetry_and_triangle_inequality():
    a, b, c = [0.0, 1.0], [1.5, 2.0], [-1.0, 0.6]
    ab = ig.geodesic(NORMAL, a, b).length
    ba = ig.geodesic(NORMAL, b, a).length
    assert ab == pytest.approx(ba, abs=1e-6)
    ac = ig.geodesic(NORMAL, a, c).length
    cb = ig.geodesic(NORMAL, c, b).length
    assert ab <= ac + cb + 1e-9


@pytest.mark.parametrize("a,b", [([0.0, 1.0], [1.5, 2.0]), ([-2.0, 1.0], [2.0, 1.0]), ([1.0, 0.5], [-0.5, 3.0])])
def test_shooting_matches_closed_form(a, b):
    shot = ig.geodesic(NORMAL, a, b)
    exact = ig.geodesic(NORMAL, a, b, method="closed-form")
    assert shot.length == pytest.approx(ig.normal_distance(a, b), rel=1e-7)
    assert exact.length == pytest.approx(ig.normal_distance(a, b), rel=1e-12)
    np.testing.assert_allclose(shot.points, exact.points, atol=1e-6)


def test_length_equals_integrated_speed():
    from scipy.integrate import simpson

    path = ig.geodesic(NORMAL, [0.0, 1.0], [2.0, 1.5], n_points=401)
    speed = [np.sqrt(v @ ig.fisher_rao_metric(NORMAL, p).g @ v) for p, v in zip(path.points, path.velocities)]
    assert simpson(speed, x=path.times) == pytest.approx(path.length, rel=1e-8)
    # geodesics are traversed at constant speed
    assert np.ptp(speed) <= 1e-6 * np.mean(speed)


def test_closed_form_requires_normal_family():
    with pytest.raises(ValueError):
        ig.geodesic(get_family("cauchy"), [0.0], [1.0], method="closed-form")


def test_domain_guard_raises():
    # flat metric on a half-line: straight geodesics cross the boundary
    half_line = dataclasses.replace(get_family("normal-loc"), param_domain=((0.0, np.inf),))
    with pytest.raises(GeodesicError, match="left the domain"):
        ig.exponential_map(half_line, [1.0], [-1.0], radius=2.0)
    pts, _ = ig.exponential_map(half_line, [1.0], [-1.0], radius=0.5)
    assert pts[-1, 0] == pytest.approx(0.5, abs=1e-10)


def test_binomial_exponential_map():
    pts, _ = ig.exponential_map(get_family("binomial"), [0.5], [1.0], radius=1.0)
    # distance 2 * (arcsin sqrt p - pi/4) gives p = sin^2(pi/4 + 1/2)
    assert pts[-1, 0] == pytest.approx(np.sin(np.pi / 4 + 0.5) ** 2, abs=1e-7)


def test_geodesic_error_carries_residual():
    err = GeodesicError("stuck", 0.25)
    assert err.residual == 0.25


# -- circles and ancestor demo ---------------------------------------------------

@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
def test_geodesic_circle_matches_hyperbolic_formulas(r):
    out = ig.geodesic_circle(NORMAL, [0.0, 1.0], r, n_rays=64)
    circ, area = _circle_oracle(r)
    assert out["circumference"] == pytest.approx(circ, rel=1e-2)
    assert out["area"] == pytest.approx(area, rel=1e-2)
    assert out["euclid_circumference_excess"] > 0
    assert out["euclid_area_excess"] > 0
    # leading excess of circumference is -K pi r^3 / 3 = pi r^3 / 6
    assert out["euclid_circumference_excess"] / r**3 == pytest.approx(np.pi / 6, rel=0.1)


def test_geodesic_circle_is_translation_invariant():
    a = ig.geodesic_circle(NORMAL, [0.0, 1.0], 0.5, n_rays=32)
    b = ig.geodesic_circle(NORMAL, [3.0, 2.5], 0.5, n_rays=32)
    assert a["circumference"] == pytest.approx(b["circumference"], rel=1e-6)


def test_ancestor_variance_exceeds():
    out = ig.ancestor_variance_demo(1.0, -1.0, 1.0)
    assert out["exceeds"] and out["sigma_max_on_geodesic"] > 1.0
    same = ig.ancestor_variance_demo(1.0, 0.5, 0.5)
    assert same["sigma_max_on_geodesic"] == 1.0 and not same["exceeds"]


def test_ancestor_variance_grows_with_separation():
    peaks = [ig.ancestor_variance_demo(1.0, -s / 2, s / 2, method="closed-form")["sigma_max_on_geodesic"]
             for s in (0.5, 1, 2, 4, 8)]
    assert np.all(np.diff(peaks) > 0)
    # semicircle in (mu / sqrt 2, sigma): peak is sqrt(1 + (s / (2 sqrt 2))^2)
    assert peaks[-1] == pytest.approx(np.sqrt(1 + (8 / (2 * np.sqrt(2))) ** 2), rel=1e-9)
