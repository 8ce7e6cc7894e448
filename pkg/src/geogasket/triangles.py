"""Geodesic triangle regions and comparison-triangle geometry.

A triangle region is three chart vertices joined by minimal geodesics,
with cached side lengths.  The family parametrization ``phi(t, s)`` sweeps
the region by cross geodesics between points at fractional arclength s on
the two sides leaving a chosen apex; ``t`` is the affine parameter along
each cross geodesic.

Comparison angles are computed in the plane, the unit sphere and the
hyperbolic plane from the side lengths alone, and drive the
delta-non-degeneracy tests used throughout subdivision certification.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvexityGuardError,
    DegenerateTriangleError,
    DomainError,
    InversionError,
)
from .surfaces import EUCLIDEAN, SurfaceModel, SurfacePoint, _as_point_array

# Curved-surface working-domain guard.  |K| <= 1 puts the conjugate-point
# scale at pi; triangles are kept an order of magnitude below it so the
# convexity hypothesis holds with margin.
CONVEXITY_GUARD = 0.4

PLANE = "plane"
SPHERE_SPACE = "sphere"
HYPERBOLIC_SPACE = "hyperbolic"


def _check_sides(a1, a2, a3):
    sides = np.array([a1, a2, a3], dtype=float)
    if np.any(sides <= 0):
        raise DegenerateTriangleError(f"side lengths must be positive: {sides}")
    s = np.sort(sides)
    if s[2] >= s[0] + s[1]:
        raise DegenerateTriangleError(
            f"strict triangle inequality fails for sides {tuple(sides)}"
        )
    return sides


def _clamped_arccos(x, slack=1e-9):
    if x > 1.0 + slack or x < -1.0 - slack:
        raise DomainError(f"law-of-cosines value {x!r} outside [-1, 1]")
    return math.acos(min(1.0, max(-1.0, x)))


@dataclass(frozen=True)
class ComparisonAngles:
    """Angles of the comparison triangle with the same side lengths.

    ``alpha_i`` sits opposite side ``a_i``; all angles in radians.
    """

    space: str
    alpha1: float
    alpha2: float
    alpha3: float

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, self.alpha3])


def planar_comparison_angles(a1, a2, a3) -> ComparisonAngles:
    """Law-of-cosines angles of the Euclidean comparison triangle."""
    a, b, c = _check_sides(a1, a2, a3)
    al1 = _clamped_arccos((b * b + c * c - a * a) / (2 * b * c))
    al2 = _clamped_arccos((a * a + c * c - b * b) / (2 * a * c))
    al3 = _clamped_arccos((a * a + b * b - c * c) / (2 * a * b))
    return ComparisonAngles(PLANE, al1, al2, al3)


def spherical_comparison_angles(a1, a2, a3) -> ComparisonAngles:
    """Angles of the comparison triangle on the unit sphere."""
    sides = _check_sides(a1, a2, a3)
    if np.any(sides >= math.pi):
        raise DomainError("each side must be shorter than pi on the unit sphere")
    if float(np.sum(sides)) >= 2 * math.pi:
        raise DomainError("perimeter must be below 2*pi on the unit sphere")

    def angle(a, b, c):
        return _clamped_arccos(
            (math.cos(a) - math.cos(b) * math.cos(c))
            / (math.sin(b) * math.sin(c))
        )

    a, b, c = sides
    return ComparisonAngles(SPHERE_SPACE, angle(a, b, c), angle(b, a, c), angle(c, a, b))


def hyperbolic_comparison_angles(a1, a2, a3) -> ComparisonAngles:
    """Angles of the comparison triangle in the hyperbolic plane."""
    sides = _check_sides(a1, a2, a3)

    def angle(a, b, c):
        return _clamped_arccos(
            (math.cosh(b) * math.cosh(c) - math.cosh(a))
            / (math.sinh(b) * math.sinh(c))
        )

    a, b, c = sides
    return ComparisonAngles(
        HYPERBOLIC_SPACE, angle(a, b, c), angle(b, a, c), angle(c, a, b)
    )


def planar_angles_batch(sides: np.ndarray) -> np.ndarray:
    """Vectorized planar comparison angles for an (N, 3) side-length array."""
    a = sides[:, 0]
    b = sides[:, 1]
    c = sides[:, 2]
    with np.errstate(invalid="raise"):
        al1 = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1, 1))
        al2 = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1, 1))
        al3 = np.arccos(np.clip((a * a + b * b - c * c) / (2 * a * b), -1, 1))
    return np.stack([al1, al2, al3], axis=1)


def is_delta_nondegenerate(sides, delta):
    """True when every planar comparison angle lies in (delta, pi - delta).

    Returns ``(flag, ComparisonAngles)``.
    """
    if not (0 < delta < math.pi / 2):
        raise DomainError("delta must lie in (0, pi/2)")
    angles = planar_comparison_angles(*sides)
    flag = bool(
        np.all(angles.alphas > delta) and np.all(angles.alphas < math.pi - delta)
    )
    return flag, angles


@dataclass(frozen=True)
class EdgeQuotientReport:
    max_quotient: float
    bound: float
    ok: bool


def edge_quotient_bound(sides, delta) -> EdgeQuotientReport:
    """Check the side-quotient bound 1/sin(delta) of non-degenerate triangles."""
    flag, _ = is_delta_nondegenerate(sides, delta)
    if not flag:
        raise DegenerateTriangleError(
            f"sides {tuple(sides)} are not {delta}-non-degenerate"
        )
    arr = np.array(sides, dtype=float)
    quotient = float(np.max(arr) / np.min(arr))
    bound = 1.0 / math.sin(delta)
    return EdgeQuotientReport(max_quotient=quotient, bound=bound, ok=quotient <= bound)


def perturbation_epsilon(delta: float) -> float:
    """Side-quotient perturbation budget preserving delta/2-non-degeneracy.

    Derived by chaining the half-angle identity
    sin^2(alpha/2) = (s-b)(s-c)/(bc) through the side-quotient bound
    C = 1/sin(delta): a quotient perturbation within (1 +/- eps) moves each
    comparison angle by at most ~4 eps C^2 / (sin(delta/2) sin(delta/4)) per
    perturbed side.  Requiring a total angle drift below delta/4 and halving
    for safety gives the budget below; it is deliberately conservative.
    """
    if not (0 < delta < math.pi / 2):
        raise DomainError("delta must lie in (0, pi/2)")
    c2 = math.sin(delta) ** 2
    eps = delta * math.sin(delta / 2) * math.sin(delta / 4) * c2 / 64.0
    return eps / 2.0


class GeodesicTriangleRegion:
    """A triangle region bounded by three minimal geodesics.

    Side ``i`` joins the two vertices other than ``p_i``; orientation is
    side1: p2->p3, side2: p3->p1, side3: p1->p2.  The diameter of a
    geodesic triangle in a convex domain is its longest side.
    """

    def __init__(self, surface: SurfaceModel, vertices, side_lengths):
        self.surface = surface
        self.vertices = tuple(
            SurfacePoint(float(p[0]), float(p[1]))
            for p in (_as_point_array(v) for v in vertices)
        )
        self.side_lengths = np.asarray(side_lengths, dtype=float)
        _check_sides(*self.side_lengths)
        if not surface.flat and self.diam > CONVEXITY_GUARD:
            raise ConvexityGuardError(
                f"triangle diameter {self.diam:.4g} exceeds the curved-surface "
                f"guard {CONVEXITY_GUARD}"
            )
        self._segments = {}
        self._apex_log_cache = {}

    @classmethod
    def from_vertices(cls, surface, p1, p2, p3) -> "GeodesicTriangleRegion":
        pts = np.vstack([_as_point_array(p) for p in (p1, p2, p3)])
        starts = pts[[1, 2, 0]]
        ends = pts[[2, 0, 1]]
        lengths = surface.distance_many(starts, ends)
        return cls(surface, pts, lengths)

    @property
    def diam(self) -> float:
        return float(np.max(self.side_lengths))

    def vertex_array(self) -> np.ndarray:
        return np.vstack([p.as_array() for p in self.vertices])

    def side_segment(self, i: int):
        """GeodesicSegment of side i (1-based), oriented per the convention."""
        if i not in (1, 2, 3):
            raise DomainError("side index must be 1, 2 or 3")
        if i not in self._segments:
            order = {1: (1, 2), 2: (2, 0), 3: (0, 1)}[i]
            self._segments[i] = self.surface.geodesic_between(
                self.vertices[order[0]], self.vertices[order[1]]
            )
        return self._segments[i]

    # -- parametrization ----------------------------------------------

    def _apex_frame(self, vertex_index: int):
        if vertex_index not in (1, 2, 3):
            raise DomainError("vertex index must be 1, 2 or 3")
        i = vertex_index - 1
        j = (i + 1) % 3  # plays p2 of the apex frame
        k = (i + 2) % 3  # plays p3 of the apex frame
        pts = self.vertex_array()
        return pts[i], pts[j], pts[k]

    def _apex_logs(self, vertex_index: int):
        """Cached side directions (toward p_k, toward p_j) at the apex."""
        if vertex_index not in self._apex_log_cache:
            apex, p_j, p_k = self._apex_frame(vertex_index)
            w_to_k = self.surface.log_many(apex[None, :], p_k[None, :])[0]
            w_to_j = self.surface.log_many(apex[None, :], p_j[None, :])[0]
            self._apex_log_cache[vertex_index] = (w_to_k, w_to_j)
        return self._apex_log_cache[vertex_index]

    def phi_many(self, vertex_index: int, ts, ss) -> np.ndarray:
        """Batched parametrization points for arrays of (t, s)."""
        ts = np.asarray(ts, dtype=float)
        ss = np.asarray(ss, dtype=float)
        if np.any((ts < 0) | (ts > 1)) or np.any((ss < 0) | (ss > 1)):
            raise DomainError("parameters must satisfy t in [0,1], s in [0,1]")
        apex, p_j, p_k = self._apex_frame(vertex_index)
        surface = self.surface
        n = max(len(np.atleast_1d(ts)), len(np.atleast_1d(ss)))
        ts = np.broadcast_to(np.atleast_1d(ts), (n,))
        ss = np.broadcast_to(np.atleast_1d(ss), (n,))
        w_to_k, w_to_j = self._apex_logs(vertex_index)
        base = np.broadcast_to(apex, (n, 2))
        side_a = surface.exp_many(base, w_to_k[None, :] * ss[:, None])
        side_b = surface.exp_many(base, w_to_j[None, :] * ss[:, None])
        w_cross = surface.log_many(side_a, side_b)
        return surface.exp_many(side_a, w_cross * ts[:, None])

    def phi(self, vertex_index: int, t: float, s: float) -> SurfacePoint:
        """Point on the cross geodesic at parameters (t, s) from the apex."""
        out = self.phi_many(vertex_index, [t], [s])[0]
        return SurfacePoint(float(out[0]), float(out[1]))

    def invert_phi(self, vertex_index: int, x, tol=1e-9, max_iter=60):
        """Recover (t, s) with phi(t, s) = x; returns (t, s, residual).

        Damped quasi-Newton iteration using the chart-chord Jacobian; the
        parametrization is a mild distortion of affine coordinates on the
        working domains, so the fixed flat Jacobian contracts.
        """
        x = _as_point_array(x)
        apex, p_j, p_k = self._apex_frame(vertex_index)
        e_k = p_k - apex
        e_j = p_j - apex
        det = e_k[0] * e_j[1] - e_k[1] * e_j[0]
        if abs(det) < 1e-300:
            raise InversionError("degenerate chart frame")

        def chord_params(target):
            rhs = target - apex
            a = (rhs[0] * e_j[1] - rhs[1] * e_j[0]) / det
            b = (e_k[0] * rhs[1] - e_k[1] * rhs[0]) / det
            s = a + b
            t = b / s if abs(s) > 1e-300 else 0.0
            return t, s

        t, s = chord_params(x)
        if self.surface.flat:
            resid = float(np.linalg.norm(self.phi_many(vertex_index, [t], [max(s, 0.0)])[0] - x)) if 0 <= s else float("inf")
            return t, s, resid
        t = min(max(t, 0.0), 1.0)
        s = min(max(s, 1e-9), 1.0)
        prev = float("inf")
        for _ in range(max_iter):
            cur = self.phi_many(vertex_index, [t], [s])[0]
            r = cur - x
            resid = float(np.hypot(r[0], r[1]))
            if resid <= tol:
                return t, s, resid
            # chart-chord Jacobian of phi at (t, s)
            d_dt = s * (e_j - e_k)
            d_ds = (1 - t) * e_k + t * e_j
            jdet = d_dt[0] * d_ds[1] - d_dt[1] * d_ds[0]
            if abs(jdet) < 1e-300:
                raise InversionError("singular parametrization Jacobian")
            dt = (r[0] * d_ds[1] - r[1] * d_ds[0]) / jdet
            ds = (d_dt[0] * r[1] - d_dt[1] * r[0]) / jdet
            damp = 1.0 if resid < prev else 0.5
            t = min(max(t - damp * dt, 0.0), 1.0)
            s = min(max(s - damp * ds, 1e-12), 1.0)
            prev = resid
        raise InversionError(
            f"parameter recovery stalled at residual {prev:.3e} for x={tuple(x)}"
        )

    def invert_phi_many(self, vertex_index: int, xs, tol=1e-9, max_iter=40):
        """Vectorized parameter recovery; returns (T, S, residuals).

        Parameters are clamped to the closed square, so points outside the
        region end with a nonzero residual rather than an error.
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        apex, p_j, p_k = self._apex_frame(vertex_index)
        e_k = p_k - apex
        e_j = p_j - apex
        det = e_k[0] * e_j[1] - e_k[1] * e_j[0]
        rhs = xs - apex
        a = (rhs[:, 0] * e_j[1] - rhs[:, 1] * e_j[0]) / det
        b = (e_k[0] * rhs[:, 1] - e_k[1] * rhs[:, 0]) / det
        ss = a + b
        safe = np.where(np.abs(ss) < 1e-300, 1.0, ss)
        ts = np.where(np.abs(ss) < 1e-300, 0.0, b / safe)
        if self.surface.flat:
            resid = np.zeros(len(xs))
            return ts, ss, resid
        ts = np.clip(ts, 0.0, 1.0)
        ss = np.clip(ss, 1e-12, 1.0)
        resid = np.full(len(xs), np.inf)
        for _ in range(max_iter):
            cur = self.phi_many(vertex_index, ts, ss)
            r = cur - xs
            resid = np.hypot(r[:, 0], r[:, 1])
            active = resid > tol
            if not np.any(active):
                break
            d_dt = ss[:, None] * (e_j - e_k)[None, :]
            d_ds = (1 - ts)[:, None] * e_k[None, :] + ts[:, None] * e_j[None, :]
            jdet = d_dt[:, 0] * d_ds[:, 1] - d_dt[:, 1] * d_ds[:, 0]
            jdet = np.where(np.abs(jdet) < 1e-300, 1e-300, jdet)
            dt = (r[:, 0] * d_ds[:, 1] - r[:, 1] * d_ds[:, 0]) / jdet
            ds = (d_dt[:, 0] * r[:, 1] - d_dt[:, 1] * r[:, 0]) / jdet
            ts = np.clip(ts - np.where(active, dt, 0.0), 0.0, 1.0)
            ss = np.clip(ss - np.where(active, ds, 0.0), 1e-12, 1.0)
        return ts, ss, resid

    def contains_many(self, xs, tol=1e-9) -> np.ndarray:
        """Vectorized closed-region membership."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self.surface.flat:
            apex, p_j, p_k = self._apex_frame(1)
            e_k = p_k - apex
            e_j = p_j - apex
            det = e_k[0] * e_j[1] - e_k[1] * e_j[0]
            rhs = xs - apex
            a = (rhs[:, 0] * e_j[1] - rhs[:, 1] * e_j[0]) / det
            b = (e_k[0] * rhs[:, 1] - e_k[1] * rhs[:, 0]) / det
            return (a >= -tol) & (b >= -tol) & (a + b <= 1 + tol)
        # chart-barycentric prefilter: curvature distorts barycentric
        # coordinates by O(r^2), far below the 0.05 rejection margin on the
        # guarded working domains
        apex, p_j, p_k = self._apex_frame(1)
        e_k = p_k - apex
        e_j = p_j - apex
        det = e_k[0] * e_j[1] - e_k[1] * e_j[0]
        rhs = xs - apex
        a = (rhs[:, 0] * e_j[1] - rhs[:, 1] * e_j[0]) / det
        b = (e_k[0] * rhs[:, 1] - e_k[1] * rhs[:, 0]) / det
        margin = 0.05
        near = (a >= -margin) & (b >= -margin) & (a + b <= 1 + margin)
        out = np.zeros(len(xs), dtype=bool)
        if np.any(near):
            scale = max(self.diam, 1e-12)
            _, ss, resid = self.invert_phi_many(
                1, xs[near], tol=max(tol * scale, 1e-13), max_iter=25
            )
            out[near] = (ss <= 1 + tol) & (resid <= 10 * max(tol, 1e-12) * scale)
        return out

    def contains(self, x, tol=1e-9) -> bool:
        """Closed-region membership via inverse parametrization."""
        return bool(self.contains_many(_as_point_array(x)[None, :], tol=tol)[0])

    def vertex_angle(self, vertex_index: int) -> float:
        """Angle at a vertex measured from tangent vectors of the two
        incident sides (inner product in the surface metric)."""
        i = vertex_index - 1
        pts = self.vertex_array()
        p = pts[i]
        others = [pts[(i + 1) % 3], pts[(i + 2) % 3]]
        w1 = self.surface.log_many(p[None, :], others[0][None, :])[0]
        w2 = self.surface.log_many(p[None, :], others[1][None, :])[0]
        ip = float(self.surface.inner(p[None, :], w1[None, :], w2[None, :])[0])
        n1 = float(self.surface.norm(p[None, :], w1[None, :])[0])
        n2 = float(self.surface.norm(p[None, :], w2[None, :])[0])
        return _clamped_arccos(ip / (n1 * n2))


@dataclass
class SubtriangleSlice:
    """The sub-triangle cut at fractional arclength s from an apex.

    The region is expressed in the apex frame: vertex 1 is the apex, vertex
    2 sits on the side toward the next vertex (cyclically), vertex 3 on the
    side toward the previous one.  At s = 1 the side lengths reproduce the
    base triangle's (in the apex-frame ordering).
    """

    base: GeodesicTriangleRegion
    vertex_index: int
    s: float
    region: GeodesicTriangleRegion


def subtriangle_slice(base: GeodesicTriangleRegion, vertex_index: int, s: float) -> SubtriangleSlice:
    if not (0 < s <= 1):
        raise DomainError("s must lie in (0, 1]")
    apex, p_j, p_k = base._apex_frame(vertex_index)
    surface = base.surface
    w_j = surface.log_many(apex[None, :], p_j[None, :])[0]
    w_k = surface.log_many(apex[None, :], p_k[None, :])[0]
    v2 = surface.exp_many(apex[None, :], (s * w_j)[None, :])[0]
    v3 = surface.exp_many(apex[None, :], (s * w_k)[None, :])[0]
    cross_len = float(surface.distance_many(v3[None, :], v2[None, :])[0])
    i = vertex_index - 1
    a_apex_frame_2 = base.side_lengths[(i + 1) % 3]  # apex -> p_k side
    a_apex_frame_3 = base.side_lengths[(i + 2) % 3]  # apex -> p_j side
    region = GeodesicTriangleRegion(
        surface,
        [apex, v2, v3],
        [cross_len, s * a_apex_frame_2, s * a_apex_frame_3],
    )
    return SubtriangleSlice(base=base, vertex_index=vertex_index, s=s, region=region)


@dataclass(frozen=True)
class AngleStabilityReport:
    vertex_index: int
    s: float
    t: float
    alpha_gap: float
    beta_gap: float
    angles_s: ComparisonAngles
    angles_t: ComparisonAngles


def angle_stability(base: GeodesicTriangleRegion, vertex_index: int, s: float, t: float) -> AngleStabilityReport:
    """Comparison-angle drift at the moving vertices between two slices.

    Angles are taken from planar comparison triangles of the slice side
    lengths; the apex angle is excluded (it is common to all slices).
    """
    if not (0 < s <= 1 and 0 < t <= 1):
        raise DomainError("slice parameters must lie in (0, 1]")
    slice_s = subtriangle_slice(base, vertex_index, s)
    slice_t = subtriangle_slice(base, vertex_index, t)
    ang_s = planar_comparison_angles(*slice_s.region.side_lengths)
    ang_t = planar_comparison_angles(*slice_t.region.side_lengths)
    return AngleStabilityReport(
        vertex_index=vertex_index,
        s=s,
        t=t,
        alpha_gap=abs(ang_s.alpha2 - ang_t.alpha2),
        beta_gap=abs(ang_s.alpha3 - ang_t.alpha3),
        angles_s=ang_s,
        angles_t=ang_t,
    )


# -- serialization -----------------------------------------------------


def triangle_to_json(region: GeodesicTriangleRegion) -> str:
    doc = {
        "surface": region.surface.kind,
        "vertices": [[p.u, p.v] for p in region.vertices],
        "side_lengths": list(map(float, region.side_lengths)),
    }
    return json.dumps(doc, sort_keys=True)


def triangle_from_json(surface: SurfaceModel, text: str) -> GeodesicTriangleRegion:
    doc = json.loads(text)
    if doc.get("surface") != surface.kind:
        raise DomainError(
            f"triangle was serialized on {doc.get('surface')!r}, not {surface.kind!r}"
        )
    return GeodesicTriangleRegion(surface, doc["vertices"], doc["side_lengths"])
