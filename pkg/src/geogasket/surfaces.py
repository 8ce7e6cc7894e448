"""Riemannian 2D chart surfaces with geodesic oracles.

A surface is a chart rectangle with a first fundamental form (E, F, G),
Gaussian curvature, and geodesic operations: exponential map by adaptive
Dormand-Prince integration of the geodesic ODE, logarithm map by Newton
shooting, distances, midpoints and finite-difference variation fields.

All geodesic solvers are vectorized: the batched entry points
(``exp_many``, ``log_many``, ...) operate on ``(N, 2)`` arrays of chart
coordinates, and the scalar API wraps them.  The flat model short-circuits
to exact affine arithmetic; the ODE/shooting path is reserved for curved
charts so that curved results can be checked against closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartEscapeError, DomainError, ShootingConvergenceError
from .expressions import compile_expression

EUCLIDEAN = "euclidean"
SPHERE = "sphere_unit"
HYPERBOLIC = "hyperbolic_poincare"
CUSTOM = "custom"

# Integration tolerances for the embedded 4(5) scheme.  Downstream
# certification bounds are O(r^2) with r >= 1e-2, so the integrator noise
# floor sits several orders below anything we assert.
DEFAULT_ATOL = 1e-11
DEFAULT_RTOL = 1e-10

# Shooting residual target in chart distance.  Tighter than strictly needed
# for the O(r^2) bounds; keeps deep subdivision vertices accurate enough for
# the 1e-9 projection cross-checks.
DEFAULT_SHOOT_TOL = 1e-11
DEFAULT_SHOOT_MAXITER = 60

_FD_METRIC_STEP = 1e-6


@dataclass(frozen=True)
class SurfacePoint:
    """A point in chart coordinates."""

    u: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v], dtype=float)


def _as_point_array(p) -> np.ndarray:
    if isinstance(p, SurfacePoint):
        return p.as_array()
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,):
        raise DomainError(f"expected a chart point of shape (2,), got {arr.shape}")
    return arr


# Dormand-Prince RK45 tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


class SurfaceModel:
    """A 2D chart with metric, curvature and geodesic oracle.

    Parameters
    ----------
    kind : str
        One of ``euclidean``, ``sphere_unit``, ``hyperbolic_poincare``,
        ``custom``.
    chart : tuple
        ``(u_min, u_max, v_min, v_max)`` open rectangle.
    metric : callable
        ``metric(u, v) -> (E, F, G)`` vectorized over arrays.
    metric_partials : callable or None
        ``(u, v) -> (E_u, E_v, F_u, F_v, G_u, G_v)``; finite differences
        are used when None.
    curvature : callable
        ``(u, v) -> K`` vectorized.
    closed_form_distance : callable or None
        Exact geodesic distance for built-ins, used as an oracle.
    """

    def __init__(
        self,
        kind,
        chart,
        metric,
        curvature,
        metric_partials=None,
        closed_form_distance=None,
        name=None,
        atol=DEFAULT_ATOL,
        rtol=DEFAULT_RTOL,
        check_grid=21,
    ):
        self.kind = kind
        self.chart = tuple(float(x) for x in chart)
        if not (self.chart[0] < self.chart[1] and self.chart[2] < self.chart[3]):
            raise DomainError("chart rectangle is empty")
        self._metric = metric
        self._metric_partials = metric_partials
        self._curvature = curvature
        self._closed_form_distance = closed_form_distance
        self.name = name or kind
        self.atol = atol
        self.rtol = rtol
        self.flat = kind == EUCLIDEAN
        self._check_admissible(check_grid)

    # -- validation ----------------------------------------------------

    def _check_admissible(self, grid):
        u_min, u_max, v_min, v_max = self.chart
        us = np.linspace(u_min, u_max, grid)
        vs = np.linspace(v_min, v_max, grid)
        uu, vv = np.meshgrid(us, vs)
        e, f, g = self.metric(uu.ravel(), vv.ravel())
        if np.any(e <= 0) or np.any(e * g - f * f <= 0):
            raise DomainError("metric is not positive definite on the chart grid")
        k = self.curvature(uu.ravel(), vv.ravel())
        tol = 1e-9 if self._metric_partials is not None else 1e-4
        if np.any(np.abs(k) > 1.0 + tol):
            raise DomainError(
                f"|K| exceeds 1 on the chart grid (max {np.max(np.abs(k)):.6g})"
            )

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        u_min, u_max, v_min, v_max = self.chart
        return (
            (pts[:, 0] > u_min)
            & (pts[:, 0] < u_max)
            & (pts[:, 1] > v_min)
            & (pts[:, 1] < v_max)
        )

    # -- metric plumbing -----------------------------------------------

    def metric(self, u, v):
        return self._metric(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

    def curvature(self, u, v):
        return self._curvature(np.asarray(u, dtype=float), np.asarray(v, dtype=float))

    def metric_partials(self, u, v):
        if self._metric_partials is not None:
            return self._metric_partials(u, v)
        h = _FD_METRIC_STEP
        eu1, fu1, gu1 = self.metric(u + h, v)
        eu0, fu0, gu0 = self.metric(u - h, v)
        ev1, fv1, gv1 = self.metric(u, v + h)
        ev0, fv0, gv0 = self.metric(u, v - h)
        inv = 0.5 / h
        return (
            (eu1 - eu0) * inv,
            (ev1 - ev0) * inv,
            (fu1 - fu0) * inv,
            (fv1 - fv0) * inv,
            (gu1 - gu0) * inv,
            (gv1 - gv0) * inv,
        )

    def christoffels(self, u, v):
        """Second-kind Christoffel symbols, six arrays.

        Order: G1_11, G1_12, G1_22, G2_11, G2_12, G2_22.
        """
        e, f, g = self.metric(u, v)
        e_u, e_v, f_u, f_v, g_u, g_v = self.metric_partials(u, v)
        w2 = 2.0 * (e * g - f * f)
        g1_11 = (g * e_u - 2 * f * f_u + f * e_v) / w2
        g2_11 = (2 * e * f_u - e * e_v - f * e_u) / w2
        g1_12 = (g * e_v - f * g_u) / w2
        g2_12 = (e * g_u - f * e_v) / w2
        g1_22 = (2 * g * f_v - g * g_u - f * g_v) / w2
        g2_22 = (e * g_v - 2 * f * f_v + f * g_u) / w2
        return g1_11, g1_12, g1_22, g2_11, g2_12, g2_22

    def inner(self, pts, w1, w2):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w1 = np.atleast_2d(np.asarray(w1, dtype=float))
        w2 = np.atleast_2d(np.asarray(w2, dtype=float))
        e, f, g = self.metric(pts[:, 0], pts[:, 1])
        return (
            e * w1[:, 0] * w2[:, 0]
            + f * (w1[:, 0] * w2[:, 1] + w1[:, 1] * w2[:, 0])
            + g * w1[:, 1] * w2[:, 1]
        )

    def norm(self, pts, w):
        return np.sqrt(np.maximum(self.inner(pts, w, w), 0.0))

    # -- geodesic ODE --------------------------------------------------

    def _ode_rhs(self, y):
        u, v, p, q = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        g1_11, g1_12, g1_22, g2_11, g2_12, g2_22 = self.christoffels(u, v)
        out = np.empty_like(y)
        out[:, 0] = p
        out[:, 1] = q
        out[:, 2] = -(g1_11 * p * p + 2 * g1_12 * p * q + g1_22 * q * q)
        out[:, 3] = -(g2_11 * p * p + 2 * g2_12 * p * q + g2_22 * q * q)
        return out

    def _integrate(self, y0, t_end=1.0, check_escape=True):
        """Adaptive embedded RK4(5) over t in [0, t_end] for a batch.

        Step acceptance uses the max scaled-error over the batch, which is
        conservative for mixed batches but keeps every trajectory at
        tolerance.
        """
        y = np.array(y0, dtype=float)
        if y.ndim == 1:
            y = y[None, :]
        t = 0.0
        if t_end == 0.0:
            return y
        h = min(0.1, t_end)
        k = [None] * 7
        while t < t_end:
            h = min(h, t_end - t)
            k[0] = self._ode_rhs(y)
            for i in range(1, 7):
                yi = y + h * np.tensordot(_DP_A[i], np.stack(k[:i]), axes=(0, 0))
                k[i] = self._ode_rhs(yi)
            kk = np.stack(k)
            y5 = y + h * np.tensordot(_DP_B5, kk, axes=(0, 0))
            y4 = y + h * np.tensordot(_DP_B4, kk, axes=(0, 0))
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y5))
            err = np.sqrt(np.mean(((y5 - y4) / scale) ** 2, axis=1))
            err_max = float(np.max(err)) if err.size else 0.0
            if err_max <= 1.0:
                t += h
                y = y5
                if check_escape and not np.all(self.contains(y[:, :2])):
                    raise ChartEscapeError(t)
            factor = 0.9 * (err_max ** -0.2) if err_max > 0 else 5.0
            h *= min(5.0, max(0.2, factor))
            if h < 1e-14:
                raise DomainError("geodesic integrator step size underflow")
        return y

    def _flat_exit_parameter(self, pts, disp) -> float:
        """Earliest boundary-crossing fraction of straight chart segments."""
        u_min, u_max, v_min, v_max = self.chart
        best = 1.0
        for p, d in zip(pts, disp):
            for coord, lo, hi in ((0, u_min, u_max), (1, v_min, v_max)):
                if d[coord] > 0 and p[coord] + d[coord] > hi:
                    best = min(best, (hi - p[coord]) / d[coord])
                elif d[coord] < 0 and p[coord] + d[coord] < lo:
                    best = min(best, (lo - p[coord]) / d[coord])
        return best

    # -- batched geodesic operations ------------------------------------

    def exp_many(self, pts, vels, t=1.0, with_velocity=False):
        """Geodesic endpoints exp_p(t w) for a batch of (p, w)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vels = np.atleast_2d(np.asarray(vels, dtype=float))
        pts, vels = np.broadcast_arrays(pts, vels)
        if self.flat or t == 0.0:
            out = pts + t * vels
            bad = ~self.contains(out)
            if np.any(bad):
                raise ChartEscapeError(self._flat_exit_parameter(pts[bad], t * vels[bad]))
            if with_velocity:
                return out, vels.copy()
            return out
        y0 = np.concatenate([pts, t * vels], axis=1)
        y = self._integrate(y0)
        if with_velocity:
            return y[:, :2], y[:, 2:] / t
        return y[:, :2]

    def log_many(self, pts, targets, tol=DEFAULT_SHOOT_TOL, max_iter=DEFAULT_SHOOT_MAXITER):
        """Initial velocities w with exp_p(w) = q, batched Newton shooting.

        Seeded from the chart chord; the 2x2 Jacobian is finite-differenced
        and refreshed each iteration (the problems are tiny and well
        conditioned on convex working domains).
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        pts, targets = np.broadcast_arrays(pts, targets)
        if self.flat:
            return targets - pts
        w = (targets - pts).astype(float).copy()
        res = self.exp_many(pts, w) - targets
        res_norm = np.hypot(res[:, 0], res[:, 1])
        active = res_norm > tol
        for iteration in range(max_iter):
            if not np.any(active):
                return w
            idx = np.where(active)[0]
            p_a, w_a, r_a = pts[idx], w[idx], res[idx]
            eps = 1e-7 * (np.hypot(w_a[:, 0], w_a[:, 1]) + 1e-3)
            e1 = np.zeros_like(w_a)
            e1[:, 0] = eps
            e2 = np.zeros_like(w_a)
            e2[:, 1] = eps
            x1 = self.exp_many(p_a, w_a + e1)
            x2 = self.exp_many(p_a, w_a + e2)
            base = r_a + targets[idx]
            j11 = (x1[:, 0] - base[:, 0]) / eps
            j21 = (x1[:, 1] - base[:, 1]) / eps
            j12 = (x2[:, 0] - base[:, 0]) / eps
            j22 = (x2[:, 1] - base[:, 1]) / eps
            det = j11 * j22 - j12 * j21
            det = np.where(np.abs(det) < 1e-300, 1e-300, det)
            dw1 = (j22 * r_a[:, 0] - j12 * r_a[:, 1]) / det
            dw2 = (-j21 * r_a[:, 0] + j11 * r_a[:, 1]) / det
            w[idx, 0] -= dw1
            w[idx, 1] -= dw2
            res[idx] = self.exp_many(pts[idx], w[idx]) - targets[idx]
            res_norm = np.hypot(res[:, 0], res[:, 1])
            active = res_norm > tol
        raise ShootingConvergenceError(float(np.max(res_norm)), max_iter)

    def distance_many(self, pts, targets, **kwargs):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w = self.log_many(pts, targets, **kwargs)
        return self.norm(pts, w)

    def midpoint_many(self, pts, targets, **kwargs):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if self.flat:
            return 0.5 * (pts + targets)
        w = self.log_many(pts, targets, **kwargs)
        return self.exp_many(pts, w, 0.5)

    # -- scalar API ------------------------------------------------------

    def exp_map(self, p, w, t=1.0) -> SurfacePoint:
        """Solve the geodesic ODE from p with initial velocity w to time t."""
        p = _as_point_array(p)
        w = np.asarray(w, dtype=float)
        if not self.contains(p[None, :])[0]:
            raise DomainError("base point lies outside the chart rectangle")
        out = self.exp_many(p[None, :], w[None, :], t)[0]
        return SurfacePoint(float(out[0]), float(out[1]))

    def log_map(self, p, q, tol=DEFAULT_SHOOT_TOL, max_iter=DEFAULT_SHOOT_MAXITER):
        """Tangent vector w with exp_map(p, w, 1) = q."""
        p = _as_point_array(p)
        q = _as_point_array(q)
        return self.log_many(p[None, :], q[None, :], tol=tol, max_iter=max_iter)[0]

    def distance(self, p, q, **kwargs) -> float:
        p = _as_point_array(p)
        q = _as_point_array(q)
        if np.array_equal(p, q):
            return 0.0
        return float(self.distance_many(p[None, :], q[None, :], **kwargs)[0])

    def closed_form_distance(self, p, q):
        """Exact distance for built-in models; None when unavailable."""
        if self._closed_form_distance is None:
            return None
        return float(
            self._closed_form_distance(_as_point_array(p), _as_point_array(q))
        )

    def midpoint(self, p, q, **kwargs) -> SurfacePoint:
        p = _as_point_array(p)
        q = _as_point_array(q)
        out = self.midpoint_many(p[None, :], q[None, :], **kwargs)[0]
        return SurfacePoint(float(out[0]), float(out[1]))

    def geodesic_between(self, p, q, **kwargs) -> "GeodesicSegment":
        p_arr = _as_point_array(p)
        q_arr = _as_point_array(q)
        start = SurfacePoint(float(p_arr[0]), float(p_arr[1]))
        end = SurfacePoint(float(q_arr[0]), float(q_arr[1]))
        if np.array_equal(p_arr, q_arr):
            return GeodesicSegment(
                surface=self,
                start=start,
                end=end,
                initial_velocity=np.zeros(2),
                length=0.0,
                degenerate=True,
            )
        w = self.log_many(p_arr[None, :], q_arr[None, :], **kwargs)[0]
        length = float(self.norm(p_arr[None, :], w[None, :])[0])
        return GeodesicSegment(
            surface=self, start=start, end=end, initial_velocity=w, length=length
        )


@dataclass
class GeodesicSegment:
    """A constant-speed geodesic on [0, 1] between two chart points."""

    surface: SurfaceModel
    start: SurfacePoint
    end: SurfacePoint
    initial_velocity: np.ndarray
    length: float
    degenerate: bool = False

    def point_at(self, t: float) -> SurfacePoint:
        p = self.surface.exp_map(self.start, self.initial_velocity, t)
        return p

    def points_at(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        p = self.start.as_array()[None, :]
        w = self.initial_velocity[None, :]
        return np.vstack([self.surface.exp_many(p, w, float(t))[0] for t in ts])

    def speed_at(self, t: float) -> float:
        p = self.start.as_array()[None, :]
        w = self.initial_velocity[None, :]
        pos, vel = self.surface.exp_many(p, w, float(t), with_velocity=True)
        return float(self.surface.norm(pos, vel)[0])


def jacobi_field(phi, t, s, h, surface):
    """Central-difference variation field of a triangle parametrization.

    ``phi(t, s)`` must return a chart point; the derivative with respect to
    the family parameter s is estimated with step h and its norm is taken in
    the surface metric at phi(t, s).
    Returns ``(vector, norm)``.
    """
    if h <= 0 or h > 1e-4:
        raise DomainError("step h must lie in (0, 1e-4]")
    if not (0 < s - h and s + h <= 1.0):
        raise DomainError("s +/- h must stay inside (0, 1]")
    if not (0.0 <= t <= 1.0):
        raise DomainError("t must lie in [0, 1]")
    hi = _as_point_array(phi(t, s + h))
    lo = _as_point_array(phi(t, s - h))
    vec = (hi - lo) / (2.0 * h)
    at = _as_point_array(phi(t, s))
    norm = float(surface.norm(at[None, :], vec[None, :])[0])
    return vec, norm


# -- built-in models ---------------------------------------------------


def _conformal_metric(lam_sq):
    def metric(u, v):
        lam2 = lam_sq(u, v)
        zeros = np.zeros_like(lam2)
        return lam2, zeros, lam2

    return metric


def euclidean_surface(half_width=50.0) -> SurfaceModel:
    def metric(u, v):
        one = np.ones_like(np.asarray(u, dtype=float))
        return one, np.zeros_like(one), one

    def partials(u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return z, z, z, z, z, z

    def curvature(u, v):
        return np.zeros_like(np.asarray(u, dtype=float))

    def dist(p, q):
        return math.hypot(q[0] - p[0], q[1] - p[1])

    return SurfaceModel(
        EUCLIDEAN,
        (-half_width, half_width, -half_width, half_width),
        metric,
        curvature,
        metric_partials=partials,
        closed_form_distance=dist,
    )


def _sphere_embed(p):
    rho2 = p[0] * p[0] + p[1] * p[1]
    denom = 1.0 + rho2
    return np.array([2 * p[0] / denom, 2 * p[1] / denom, (1 - rho2) / denom])


def unit_sphere_surface(half_width=1.8) -> SurfaceModel:
    """Unit sphere under stereographic projection from the south pole.

    The chart origin is the north pole; the unit chart circle is the
    equator.  ds^2 = 4 (du^2 + dv^2) / (1 + u^2 + v^2)^2, K = +1.
    """

    def lam_sq(u, v):
        d = 1.0 + u * u + v * v
        return 4.0 / (d * d)

    def partials(u, v):
        d = 1.0 + u * u + v * v
        base = -16.0 / (d * d * d)
        e_u = base * u
        e_v = base * v
        z = np.zeros_like(d)
        return e_u, e_v, z, z, e_u, e_v

    def curvature(u, v):
        return np.ones_like(np.asarray(u, dtype=float))

    def dist(p, q):
        chord = np.linalg.norm(_sphere_embed(p) - _sphere_embed(q))
        return 2.0 * math.asin(min(1.0, chord / 2.0))

    return SurfaceModel(
        SPHERE,
        (-half_width, half_width, -half_width, half_width),
        _conformal_metric(lam_sq),
        curvature,
        metric_partials=partials,
        closed_form_distance=dist,
    )


def poincare_disk_surface(half_width=0.7) -> SurfaceModel:
    """Poincare disk, chart restricted to a square inside the unit disk.

    ds^2 = 4 (du^2 + dv^2) / (1 - u^2 - v^2)^2, K = -1.
    """
    if half_width * math.sqrt(2.0) >= 1.0:
        raise DomainError("chart square must stay inside the unit disk")

    def lam_sq(u, v):
        d = 1.0 - u * u - v * v
        return 4.0 / (d * d)

    def partials(u, v):
        d = 1.0 - u * u - v * v
        base = 16.0 / (d * d * d)
        e_u = base * u
        e_v = base * v
        z = np.zeros_like(d)
        return e_u, e_v, z, z, e_u, e_v

    def curvature(u, v):
        return -np.ones_like(np.asarray(u, dtype=float))

    def dist(p, q):
        dp = 1.0 - p[0] * p[0] - p[1] * p[1]
        dq = 1.0 - q[0] * q[0] - q[1] * q[1]
        delta2 = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
        return 2.0 * math.asinh(math.sqrt(delta2 / (dp * dq)))

    return SurfaceModel(
        HYPERBOLIC,
        (-half_width, half_width, -half_width, half_width),
        _conformal_metric(lam_sq),
        curvature,
        metric_partials=partials,
        closed_form_distance=dist,
    )


def _brioschi_curvature(metric, step=1e-4):
    """Gaussian curvature from metric samples alone (finite differences)."""

    def curvature(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        h = step

        def m(du, dv):
            return metric(u + du * h, v + dv * h)

        e0, f0, g0 = m(0, 0)
        e_u = (m(1, 0)[0] - m(-1, 0)[0]) / (2 * h)
        e_v = (m(0, 1)[0] - m(0, -1)[0]) / (2 * h)
        g_u = (m(1, 0)[2] - m(-1, 0)[2]) / (2 * h)
        g_v = (m(0, 1)[2] - m(0, -1)[2]) / (2 * h)
        f_u = (m(1, 0)[1] - m(-1, 0)[1]) / (2 * h)
        f_v = (m(0, 1)[1] - m(0, -1)[1]) / (2 * h)
        e_vv = (m(0, 1)[0] - 2 * e0 + m(0, -1)[0]) / (h * h)
        g_uu = (m(1, 0)[2] - 2 * g0 + m(-1, 0)[2]) / (h * h)
        f_uv = (m(1, 1)[1] - m(1, -1)[1] - m(-1, 1)[1] + m(-1, -1)[1]) / (4 * h * h)

        a = -0.5 * e_vv + f_uv - 0.5 * g_uu
        det1 = (
            a * (e0 * g0 - f0 * f0)
            - 0.5 * e_u * ((f_v - 0.5 * g_u) * g0 - f0 * 0.5 * g_v)
            + (f_u - 0.5 * e_v) * ((f_v - 0.5 * g_u) * f0 - e0 * 0.5 * g_v)
        )
        det2 = (
            0.0 * (e0 * g0 - f0 * f0)
            - 0.5 * e_v * (0.5 * e_v * g0 - f0 * 0.5 * g_u)
            + 0.5 * g_u * (0.5 * e_v * f0 - e0 * 0.5 * g_u)
        )
        w = e0 * g0 - f0 * f0
        return (det1 - det2) / (w * w)

    return curvature


def surface_from_json(doc) -> SurfaceModel:
    """Build a custom surface from a JSON document (dict or JSON text).

    Expected keys: ``chart`` with u_min/u_max/v_min/v_max, ``metric`` with
    expression strings E, F, G, and optionally ``curvature`` as an
    expression (finite-difference Brioschi curvature is used otherwise).
    """
    import json as _json

    if isinstance(doc, str):
        doc = _json.loads(doc)
    try:
        chart = doc["chart"]
        rect = (chart["u_min"], chart["u_max"], chart["v_min"], chart["v_max"])
        exprs = doc["metric"]
        e_fn = compile_expression(exprs["E"])
        f_fn = compile_expression(exprs["F"])
        g_fn = compile_expression(exprs["G"])
    except KeyError as exc:
        raise DomainError(f"custom surface document missing key: {exc}") from exc

    def metric(u, v):
        return e_fn(u, v), f_fn(u, v), g_fn(u, v)

    if "curvature" in doc:
        k_fn = compile_expression(doc["curvature"])

        def curvature(u, v):
            return k_fn(u, v)

    else:
        curvature = _brioschi_curvature(metric)

    return SurfaceModel(
        CUSTOM,
        rect,
        metric,
        curvature,
        metric_partials=None,
        closed_form_distance=None,
        name=doc.get("name", "custom"),
    )


_BUILTIN_FACTORIES = {
    EUCLIDEAN: euclidean_surface,
    SPHERE: unit_sphere_surface,
    HYPERBOLIC: poincare_disk_surface,
}


def make_surface(spec) -> SurfaceModel:
    """Surface from a kind name or a custom-metric JSON document."""
    if isinstance(spec, SurfaceModel):
        return spec
    if isinstance(spec, str) and spec in _BUILTIN_FACTORIES:
        return _BUILTIN_FACTORIES[spec]()
    if isinstance(spec, dict):
        if spec.get("kind", CUSTOM) in _BUILTIN_FACTORIES:
            return _BUILTIN_FACTORIES[spec["kind"]]()
        return surface_from_json(spec)
    raise DomainError(f"unknown surface spec: {spec!r}")
