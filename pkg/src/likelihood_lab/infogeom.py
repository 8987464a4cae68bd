"""Fisher-Rao geometry of parameter spaces.

The metric is the per-observation expected information (positive definite,
i.e. the negative expected Hessian of the log-density).  The ``n``-sample
metric is ``n * g`` and only rescales lengths by ``sqrt(n)``.

For the normal family ``ds**2 = (dmu**2 + 2 dsigma**2) / sigma**2``: a
hyperbolic half-plane in ``(mu / sqrt(2), sigma)`` scaled by ``sqrt(2)``,
with constant curvature ``-1/2``.  :func:`normal_geodesic_closed_form`
exposes the exact geodesics as an oracle for the shooting solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from . import information
from ._validation import check_count, check_positive
from .exceptions import GeodesicError, SingularMetricError
from .families import ParametricFamily, check_domain, fd_step, normal_location_scale

__all__ = [
    "MetricTensor",
    "GeodesicPath",
    "fisher_rao_metric",
    "metric_function",
    "pullback_metric",
    "christoffel_symbols",
    "gaussian_curvature",
    "geodesic",
    "normal_geodesic_closed_form",
    "normal_distance",
    "exponential_map",
    "geodesic_circle",
    "ancestor_variance_demo",
    "DOMAIN_GUARD",
]

DOMAIN_GUARD = 1e-8
_RTOL = 1e-11
_ATOL = 1e-12


@dataclass
class MetricTensor:
    point: np.ndarray
    g: np.ndarray
    regular: bool
    method: str


@dataclass
class GeodesicPath:
    points: np.ndarray
    velocities: np.ndarray
    times: np.ndarray
    length: float
    endpoint_residual: float
    iterations: int = 0
    method: str = "shooting"


def fisher_rao_metric(family, theta, method="auto"):
    """Per-observation information matrix at ``theta`` as a :class:`MetricTensor`.

    ``method`` is ``"analytic"``, ``"quadrature"`` or ``"auto"`` (analytic
    when the family provides it).
    """
    theta = check_domain(family, theta)
    if method == "auto":
        method = "analytic" if family.analytic_information is not None else "quadrature"
    if method == "analytic":
        g = np.asarray(family.analytic_information(theta), dtype=float)
    elif method == "quadrature":
        g = information.per_observation_information(family, theta, form="hessian")
    else:
        raise ValueError(f"unknown metric method {method!r}")
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
        regular = True
    except np.linalg.LinAlgError:
        regular = False
    return MetricTensor(point=theta, g=g, regular=regular, method=method)


def metric_function(family_or_metric):
    """Return a callable ``theta -> g`` from a family or an existing callable."""
    if isinstance(family_or_metric, ParametricFamily):
        family = family_or_metric
        if family.analytic_information is not None:
            return lambda th: np.asarray(family.analytic_information(np.asarray(th, dtype=float)), dtype=float)
        return lambda th: fisher_rao_metric(family, th, method="quadrature").g
    if callable(family_or_metric):
        return lambda th: np.asarray(family_or_metric(np.asarray(th, dtype=float)), dtype=float)
    raise TypeError("expected a ParametricFamily or a callable metric")


def pullback_metric(g, jacobian):
    """Metric in new coordinates: ``J^T g J`` with ``J = d(old)/d(new)``."""
    J = np.asarray(jacobian, dtype=float)
    return J.T @ np.asarray(g, dtype=float) @ J


def _metric_derivatives(metric, theta):
    """``dg[k] = d g / d theta_k`` by central differences."""
    d = theta.size
    h = fd_step(theta)
    out = np.empty((d, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h[k]
        out[k] = (metric(theta + e) - metric(theta - e)) / (2 * h[k])
    return out


def christoffel_symbols(metric, theta):
    """``Gamma[k, i, j]`` of the second kind from finite-difference metric derivatives."""
    theta = np.asarray(theta, dtype=float)
    g = metric(theta)
    dg = _metric_derivatives(metric, theta)
    # first kind: Gamma_{l,ij} = (d_i g_lj + d_j g_li - d_l g_ij) / 2
    first = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.linalg.solve(g, first.reshape(theta.size, -1)).reshape(first.shape)


def gaussian_curvature(family_or_metric, theta):
    """Gaussian curvature of a two-parameter metric via the Brioschi formula.

    Metric derivatives are central differences (second derivatives use a
    step of ``eps**(1/4)`` relative).  Raises :class:`SingularMetricError` when
    ``EG - F**2`` is not safely positive.
    """
    metric = metric_function(family_or_metric)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (2,):
        raise ValueError("gaussian curvature needs a two-dimensional parameter")
    h = np.finfo(float).eps ** 0.25 * np.maximum(1.0, np.abs(theta))
    eu = np.array([h[0], 0.0])
    ev = np.array([0.0, h[1]])

    def comp(th):
        g = metric(th)
        return np.array([g[0, 0], g[0, 1], g[1, 1]])

    c0 = comp(theta)
    cu_p, cu_m = comp(theta + eu), comp(theta - eu)
    cv_p, cv_m = comp(theta + ev), comp(theta - ev)
    d_u = (cu_p - cu_m) / (2 * h[0])
    d_v = (cv_p - cv_m) / (2 * h[1])
    d_uu = (cu_p - 2 * c0 + cu_m) / h[0] ** 2
    d_vv = (cv_p - 2 * c0 + cv_m) / h[1] ** 2
    d_uv = (comp(theta + eu + ev) - comp(theta + eu - ev) - comp(theta - eu + ev)
            + comp(theta - eu - ev)) / (4 * h[0] * h[1])
    E, F, G = c0
    E_u, F_u, G_u = d_u
    E_v, F_v, G_v = d_v
    det = E * G - F * F
    if not det > 1e-14 * max(E * G, 1e-300) or E <= 0:
        raise SingularMetricError(f"metric is singular or indefinite at {theta.tolist()}")
    A = np.array([
        [-0.5 * d_vv[0] + d_uv[1] - 0.5 * d_uu[2], 0.5 * E_u, F_u - 0.5 * E_v],
        [F_v - 0.5 * G_u, E, F],
        [0.5 * G_v, F, G],
    ])
    B = np.array([
        [0.0, 0.5 * E_v, 0.5 * G_u],
        [0.5 * E_v, E, F],
        [0.5 * G_u, F, G],
    ])
    return float((np.linalg.det(A) - np.linalg.det(B)) / det**2)


def _domain_margin(family):
    bounds = family.param_domain if isinstance(family, ParametricFamily) else None

    def margin(theta):
        if bounds is None:
            return np.inf
        m = np.inf
        for value, (lo, hi) in zip(theta, bounds):
            if np.isfinite(lo):
                m = min(m, value - lo)
            if np.isfinite(hi):
                m = min(m, hi - value)
        return m - DOMAIN_GUARD

    return margin


def _integrate(metric, margin, start, velocity, t_end, t_eval=None):
    d = start.size

    def rhs(t, y):
        p, v = y[:d], y[d:2 * d]
        gamma = christoffel_symbols(metric, p)
        acc = -np.einsum("kij,i,j->k", gamma, v, v)
        speed = np.sqrt(max(v @ metric(p) @ v, 0.0))
        return np.concatenate([v, acc, [speed]])

    def hit_guard(t, y):
        return margin(y[:d])

    hit_guard.terminal = True
    hit_guard.direction = -1
    y0 = np.concatenate([start, velocity, [0.0]])
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", rtol=_RTOL, atol=_ATOL,
                    events=hit_guard, t_eval=t_eval, dense_output=t_eval is None)
    if sol.status == 1:
        raise GeodesicError(f"geodesic left the domain (guard {DOMAIN_GUARD}) at t={sol.t_events[0][0]:.6g}")
    if not sol.success:
        raise GeodesicError(f"geodesic integration failed: {sol.message}")
    return sol


def _initial_velocity(family, a, b):
    """Straight-line start, log-linear in coordinates bounded on one side only."""
    v = b - a
    for k, (lo, hi) in enumerate(family.param_domain):
        if np.isfinite(lo) and not np.isfinite(hi):
            v[k] = (a[k] - lo) * np.log((b[k] - lo) / (a[k] - lo))
    return v


def _shoot(metric, margin, a, b, v, tolerance, max_iterations):
    """Newton on the initial velocity; returns ``(v, iterations)`` or raises GeodesicError."""
    d = a.size

    def endpoint(w):
        return _integrate(metric, margin, a, w, 1.0).y[:d, -1]

    best = np.inf
    for it in range(max_iterations):
        try:
            r = endpoint(v) - b
        except GeodesicError as exc:
            raise GeodesicError(f"shooting failed: {exc}", best) from exc
        res = float(np.linalg.norm(r))
        best = min(best, res)
        if res <= tolerance:
            return v, it
        J = np.empty((d, d))
        try:
            for k in range(d):
                dv = np.zeros(d)
                dv[k] = 1e-7 * max(1.0, np.linalg.norm(v))
                J[:, k] = (endpoint(v + dv) - b - r) / dv[k]
            step = np.linalg.solve(J, -r)
        except (GeodesicError, np.linalg.LinAlgError) as exc:
            raise GeodesicError(f"shooting Jacobian failed: {exc}", best) from exc
        if not np.all(np.isfinite(step)):
            raise GeodesicError("shooting Jacobian is not finite", best)
        t = 1.0
        while t > 1e-4:
            try:
                new_res = np.linalg.norm(endpoint(v + t * step) - b)
            except GeodesicError:
                new_res = np.inf
            if new_res < res:
                break
            t *= 0.5
        v = v + t * step
    raise GeodesicError(f"shooting did not converge in {max_iterations} iterations", best)


def geodesic(family, theta_a, theta_b, tolerance=1e-9, n_points=201, max_iterations=50, method="shooting"):
    """Geodesic between two parameter points.

    ``method="shooting"`` integrates the geodesic equation on ``t in [0, 1]``
    and updates the initial velocity with Newton steps whose Jacobian is a
    forward-difference (secant) approximation of the endpoint map.  The
    start is log-linear in half-bounded coordinates; if direct shooting
    fails, the target is moved from ``a`` to ``b`` in eight steps.
    ``method="closed-form"`` is only available for the normal family.

    Raises
    ------
    GeodesicError
        If shooting does not reach ``tolerance``; ``err.residual`` holds the
        best endpoint residual.
    """
    a = check_domain(family, theta_a)
    b = check_domain(family, theta_b)
    if method == "closed-form":
        if family.name != "normal":
            raise ValueError("closed-form geodesics exist only for the normal family")
        return normal_geodesic_closed_form(a, b, n_points)
    if method != "shooting":
        raise ValueError(f"unknown geodesic method {method!r}")
    times = np.linspace(0.0, 1.0, n_points)
    if np.array_equal(a, b):
        pts = np.repeat(a[None, :], n_points, axis=0)
        return GeodesicPath(pts, np.zeros_like(pts), times, 0.0, 0.0, 0)
    metric = metric_function(family)
    margin = _domain_margin(family)
    d = a.size
    v0 = _initial_velocity(family, a, b)
    try:
        v, it = _shoot(metric, margin, a, b, v0, tolerance, max_iterations)
    except GeodesicError as direct:
        # continuation: walk the target from a to b, warm-starting each solve
        v, it, best, prev = v0 / 8, 0, direct.residual, 0.125
        try:
            for s in np.linspace(0.125, 1.0, 8):
                v, k = _shoot(metric, margin, a, a + s * (b - a), v * s / prev, tolerance, max_iterations)
                it, prev = it + k, s
        except GeodesicError as exc:
            raise GeodesicError(f"{direct}; continuation also failed: {exc}", min(best, exc.residual)) from exc
    sol = _integrate(metric, margin, a, v, 1.0, t_eval=times)
    pts = sol.y[:d].T
    return GeodesicPath(pts, sol.y[d:2 * d].T, times, float(sol.y[2 * d, -1]),
                        float(np.linalg.norm(pts[-1] - b)), it)


def normal_distance(a, b):
    """Exact Fisher-Rao distance between ``N(mu_a, sigma_a)`` and ``N(mu_b, sigma_b)``."""
    (ma, sa), (mb, sb) = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    du = (ma - mb) / np.sqrt(2.0)
    return float(np.sqrt(2.0) * np.arccosh(1 + (du * du + (sa - sb) ** 2) / (2 * sa * sb)))


def normal_geodesic_closed_form(a, b, n_points=201):
    """Exact normal-family geodesic, traversed at constant speed on ``[0, 1]``.

    In ``u = mu / sqrt(2)`` the geodesics are vertical lines or semicircles
    centred on ``sigma = 0``; arc length along a semicircle of radius ``R``
    centred at ``c`` is ``sqrt(2) * log(tan(phi / 2))`` in the angle ``phi``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    times = np.linspace(0.0, 1.0, n_points)
    length = normal_distance(a, b)
    ua, ub = a[0] / np.sqrt(2), b[0] / np.sqrt(2)
    if np.isclose(ua, ub, rtol=0, atol=1e-15):
        sig = a[1] * (b[1] / a[1]) ** times
        pts = np.column_stack([np.full(n_points, a[0]), sig])
    else:
        c = ((ub**2 + b[1] ** 2) - (ua**2 + a[1] ** 2)) / (2 * (ub - ua))
        R = np.hypot(ua - c, a[1])
        phi_a = np.arctan2(a[1], ua - c)
        phi_b = np.arctan2(b[1], ub - c)
        s_a, s_b = np.log(np.tan(phi_a / 2)), np.log(np.tan(phi_b / 2))
        phi = 2 * np.arctan(np.exp(s_a + times * (s_b - s_a)))
        pts = np.column_stack([np.sqrt(2) * (c + R * np.cos(phi)), R * np.sin(phi)])
    vel = np.gradient(pts, times, axis=0)
    return GeodesicPath(pts, vel, times, length, float(np.linalg.norm(pts[-1] - b)), 0, "closed-form")


def exponential_map(family, center, direction, radius, n_steps=65):
    """Unit-speed geodesic from ``center`` with initial direction ``direction``.

    ``direction`` is rescaled to unit Fisher-Rao speed.  Returns the positions
    and velocities at ``n_steps`` equally spaced arc lengths in ``[0, radius]``.
    """
    center = check_domain(family, center)
    metric = metric_function(family)
    v = np.asarray(direction, dtype=float)
    v = v / np.sqrt(v @ metric(center) @ v)
    arcs = np.linspace(0.0, radius, n_steps)
    sol = _integrate(metric, _domain_margin(family), center, v, radius, t_eval=arcs)
    d = center.size
    return sol.y[:d].T, sol.y[d:2 * d].T


def _spectral_derivative(values, axis):
    """d/da of samples on a uniform periodic grid ``a_j = 2 pi j / m``."""
    m = values.shape[axis]
    k = np.fft.fftfreq(m, d=1.0 / m)
    if m % 2 == 0:
        k[m // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = m
    spec = np.fft.fft(values, axis=axis) * (1j * k.reshape(shape))
    return np.real(np.fft.ifft(spec, axis=axis))


def geodesic_circle(family, center, radius, n_rays=128, n_radial=65):
    """Circumference and area of a geodesic circle by shooting unit-speed rays.

    Ray endpoints are a smooth periodic function of the launch angle, so the
    tangent along the circle is a spectral derivative and the circumference a
    trapezoid rule in the angle.  The area integrates ``sqrt(det g)`` times
    the Jacobian of the polar map ``(rho, angle) -> theta`` (Simpson in
    ``rho``, trapezoid in angle).
    """
    from scipy.integrate import simpson

    center = check_domain(family, center)
    radius = check_positive(float(radius), "radius")
    n_rays = check_count(n_rays, "n_rays", minimum=8)
    metric = metric_function(family)
    g0 = metric(center)
    L = np.linalg.cholesky(g0)
    angles = 2 * np.pi * np.arange(n_rays) / n_rays
    pos = np.empty((n_radial, n_rays, 2))
    vel = np.empty((n_radial, n_rays, 2))
    for j, ang in enumerate(angles):
        # unit vector in the metric: g0-orthonormal frame from the Cholesky factor
        direction = np.linalg.solve(L.T, np.array([np.cos(ang), np.sin(ang)]))
        try:
            p, v = exponential_map(family, center, direction, radius, n_radial)
        except GeodesicError as exc:
            raise GeodesicError(f"ray {j} (angle {ang:.6f}) failed: {exc}") from exc
        pos[:, j], vel[:, j] = p, v
    d_angle = _spectral_derivative(pos, axis=1)
    rim = pos[-1]
    rim_tangent = d_angle[-1]
    g_rim = np.array([metric(p) for p in rim])
    speed = np.sqrt(np.einsum("ji,jik,jk->j", rim_tangent, g_rim, rim_tangent))
    circumference = float(np.sum(speed) * 2 * np.pi / n_rays)
    vol = np.array([[np.sqrt(np.linalg.det(metric(pos[i, j]))) for j in range(n_rays)] for i in range(n_radial)])
    jac = np.abs(vel[..., 0] * d_angle[..., 1] - vel[..., 1] * d_angle[..., 0])
    rhos = np.linspace(0.0, radius, n_radial)
    radial = simpson(vol * jac, x=rhos, axis=0)
    area = float(np.sum(radial) * 2 * np.pi / n_rays)
    return {
        "radius": radius,
        "circumference": circumference,
        "area": area,
        "euclid_circumference_excess": circumference - 2 * np.pi * radius,
        "euclid_area_excess": area - np.pi * radius**2,
    }


def ancestor_variance_demo(sigma, mu_1, mu_2, method="shooting"):
    """Largest ``sigma`` on the normal-family geodesic between ``(mu_1, sigma)`` and ``(mu_2, sigma)``."""
    sigma = check_positive(float(sigma), "sigma")
    family = normal_location_scale()
    path = geodesic(family, [mu_1, sigma], [mu_2, sigma], method=method)
    sigma_max = float(np.max(path.points[:, 1]))
    if mu_1 == mu_2:
        sigma_max = sigma
    return {"sigma_max_on_geodesic": sigma_max, "exceeds": bool(sigma_max > sigma * (1 + 1e-12)),
            "length": path.length}
