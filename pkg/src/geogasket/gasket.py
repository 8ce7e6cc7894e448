"""Geodesic-midpoint subdivision systems and their certification.

Subdividing a geodesic triangle by joining the midpoints of its sides with
minimal geodesics and discarding the middle triangle yields three corner
cells; repeating this produces the cell family indexed by digit strings
over {1, 2, 3}.  Digit i always names the child containing vertex i of its
parent.  Cells are stored per level as flat arrays (vertices, side
lengths), so deep flat systems stay cheap and curved levels are built with
batched geodesic solves.

The audits measure how far each subdivision map is from a strict
half-ratio similarity, check side-quotient drift, diameter products over
index concatenation, and the planar cross-check via central projection of
spherical systems.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InversionError, NondegeneracyError
from .surfaces import SPHERE, SurfaceModel, SurfacePoint, _as_point_array, make_surface
from .triangles import (
    GeodesicTriangleRegion,
    planar_angles_batch,
    planar_comparison_angles,
)

RATIOS = (0.5, 0.5, 0.5)

# -- multi-indices ------------------------------------------------------


def mi_validate(index) -> tuple:
    digits = tuple(int(d) for d in index)
    if any(d not in (1, 2, 3) for d in digits):
        raise DomainError(f"multi-index digits must be in {{1,2,3}}: {index!r}")
    return digits


def mi_code(index) -> int:
    """Lexicographic cell code at the index's level (first digit most
    significant)."""
    code = 0
    for d in mi_validate(index):
        code = code * 3 + (d - 1)
    return code

def mi_from_code(code: int, length: int) -> tuple:
    digits = []
    for _ in range(length):
        digits.append(code % 3 + 1)
        code //= 3
    return tuple(reversed(digits))


def mi_parent(index) -> tuple:
    digits = mi_validate(index)
    if not digits:
        raise DomainError("the empty index has no parent")
    return digits[:-1]


def mi_str(index) -> str:
    return "".join(str(d) for d in index) or "(base)"


# -- level storage -------------------------------------------------------


@dataclass
class LevelArrays:
    """All cells of one subdivision level, as flat arrays."""

    vertices: np.ndarray  # (N, 3, 2)
    side_lengths: np.ndarray  # (N, 3)

    @property
    def diams(self) -> np.ndarray:
        return np.max(self.side_lengths, axis=1)

    def __len__(self) -> int:
        return len(self.vertices)


def _subdivide_arrays(surface: SurfaceModel, verts: np.ndarray, sides: np.ndarray):
    """One subdivision step for a whole level.

    Returns (children_vertices (N,3,3,2) by digit, children_sides (N,3,3),
    center_vertices (N,3,2), center_sides (N,3)).  The side midpoints are
    the center triangle's vertices and the new midlines its sides.
    """
    n = len(verts)
    starts = verts[:, [1, 2, 0], :].reshape(3 * n, 2)
    ends = verts[:, [2, 0, 1], :].reshape(3 * n, 2)
    mids = surface.midpoint_many(starts, ends).reshape(n, 3, 2)
    m_starts = mids[:, [1, 2, 0], :].reshape(3 * n, 2)
    m_ends = mids[:, [2, 0, 1], :].reshape(3 * n, 2)
    midline = surface.distance_many(m_starts, m_ends).reshape(n, 3)

    child_verts = np.empty((n, 3, 3, 2))
    child_sides = np.empty((n, 3, 3))
    for d in range(3):
        for slot in range(3):
            if slot == d:
                child_verts[:, d, slot, :] = verts[:, d, :]
            else:
                third = 3 - d - slot
                child_verts[:, d, slot, :] = mids[:, third, :]
        child_sides[:, d, :] = sides / 2.0
        child_sides[:, d, d] = midline[:, d]
    return child_verts, child_sides, mids, midline


def subdivide(region: GeodesicTriangleRegion):
    """Split a region into its three corner cells and the center cell.

    Child i keeps vertex i of the parent; the center triangle has the three
    side midpoints as vertices.
    """
    verts = region.vertex_array()[None, :, :]
    sides = region.side_lengths[None, :]
    cv, cs, center_v, center_s = _subdivide_arrays(region.surface, verts, sides)
    children = tuple(
        GeodesicTriangleRegion(region.surface, cv[0, d], cs[0, d]) for d in range(3)
    )
    center = GeodesicTriangleRegion(region.surface, center_v[0], center_s[0])
    return children[0], children[1], children[2], center


# -- the system ----------------------------------------------------------


class TriangleSystem:
    """The family of subdivision cells of a base triangle up to a depth."""

    def __init__(self, base: GeodesicTriangleRegion, depth, delta, levels, gauge_c=None):
        self.base = base
        self.surface = base.surface
        self.depth = int(depth)
        self.delta = float(delta)
        self.levels = levels
        self.gauge_c = gauge_c
        self.ratios = RATIOS
        r = base.diam
        # the flat model is the classical IFS: contraction is exactly 1/2;
        # the quadratic correction term is curvature-driven
        self.nu = 0.5 if base.surface.flat else 0.5 * (1.0 + r * r)
        self.surface_spec = base.surface.kind

    def level(self, n: int) -> LevelArrays:
        if not (0 <= n <= self.depth):
            raise DomainError(f"level {n} outside stored depth {self.depth}")
        return self.levels[n]

    def level_diams(self, n: int) -> np.ndarray:
        return self.level(n).diams

    def cell(self, index) -> GeodesicTriangleRegion:
        digits = mi_validate(index)
        if not digits:
            return self.base
        lv = self.level(len(digits))
        code = mi_code(digits)
        return GeodesicTriangleRegion(
            self.surface, lv.vertices[code], lv.side_lengths[code]
        )

    def cell_diam(self, index) -> float:
        digits = mi_validate(index)
        if not digits:
            return self.base.diam
        return float(self.level(len(digits)).diams[mi_code(digits)])

    def indices(self, n: int):
        for code in range(3**n):
            yield mi_from_code(code, n)


def _nondegeneracy_sweep_level(sides: np.ndarray, delta_half: float):
    """Indices of cells whose planar comparison angles leave the open band
    (delta/2, pi - delta/2)."""
    angles = planar_angles_batch(sides)
    bad = np.any(
        (angles <= delta_half) | (angles >= math.pi - delta_half), axis=1
    )
    return np.where(bad)[0]


def build_system(
    base: GeodesicTriangleRegion,
    depth: int,
    delta: float,
    check_nondegeneracy: bool = True,
) -> TriangleSystem:
    """Build all cells to the requested depth.

    The base must be delta-non-degenerate; every produced cell is required
    to stay delta/2-non-degenerate, and the first failing cell is named in
    the raised error.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    angles = planar_comparison_angles(*base.side_lengths)
    if not (
        np.all(angles.alphas > delta) and np.all(angles.alphas < math.pi - delta)
    ):
        raise NondegeneracyError(
            (), f"base triangle is not {delta}-non-degenerate (angles {angles.alphas})"
        )
    levels = [
        LevelArrays(
            vertices=base.vertex_array()[None, :, :],
            side_lengths=np.asarray(base.side_lengths, dtype=float)[None, :],
        )
    ]
    surface = base.surface
    for n in range(depth):
        lv = levels[-1]
        cv, cs, _, _ = _subdivide_arrays(surface, lv.vertices, lv.side_lengths)
        new_verts = cv.reshape(len(lv) * 3, 3, 2)
        new_sides = cs.reshape(len(lv) * 3, 3)
        if check_nondegeneracy:
            bad = _nondegeneracy_sweep_level(new_sides, delta / 2.0)
            if len(bad):
                cell = mi_from_code(int(bad[0]), n + 1)
                raise NondegeneracyError(
                    cell,
                    f"cell {mi_str(cell)} fails {delta / 2}-non-degeneracy "
                    f"(sides {new_sides[bad[0]]})",
                )
        levels.append(LevelArrays(vertices=new_verts, side_lengths=new_sides))
    return TriangleSystem(base, depth, delta, levels)


# -- subdivision maps ----------------------------------------------------


def apply_f(system: TriangleSystem, index, x, tol_factor: float = 1e-7) -> SurfacePoint:
    """The subdivision map of cell ``index`` applied to a parent point.

    Recovers the parametrization coordinates (t, s) of x in the parent cell
    (apex chosen by the last digit) and returns the point at (t, s/2).  On
    the flat model this is exactly the half-ratio homothety at the apex.
    """
    digits = mi_validate(index)
    if not digits:
        raise DomainError("apply_f needs a nonempty multi-index")
    parent = system.cell(digits[:-1])
    digit = digits[-1]
    x_arr = _as_point_array(x)
    apex = parent.vertex_array()[digit - 1]
    if np.allclose(x_arr, apex, atol=1e-15):
        return SurfacePoint(float(apex[0]), float(apex[1]))
    if system.surface.flat:
        out = apex + 0.5 * (x_arr - apex)
        return SurfacePoint(float(out[0]), float(out[1]))
    tol = tol_factor * parent.diam
    try:
        t, s, resid = parent.invert_phi(digit, x_arr, tol=tol)
    except InversionError as exc:
        raise InversionError(
            f"apply_f parameter recovery failed on cell {mi_str(digits)}: {exc}"
        ) from exc
    if resid > tol:
        raise InversionError(
            f"apply_f recovery residual {resid:.3e} exceeds {tol:.3e} "
            f"on cell {mi_str(digits)}"
        )
    return parent.phi(digit, t, s / 2.0)


# -- similarity audits ----------------------------------------------------

_KRONECKER_ALPHAS = np.array(
    [math.sqrt(2) - 1, math.sqrt(3) - 1, math.sqrt(5) - 2, math.sqrt(7) - 2]
)


def _low_discrepancy(n: int, seed: int) -> np.ndarray:
    """Deterministic Kronecker sequence in [0, 1)^4."""
    offsets = np.modf(np.arange(1, 5) * 0.381966011250105 * (seed + 1))[0]
    steps = np.arange(1, n + 1)[:, None] * _KRONECKER_ALPHAS[None, :]
    return np.modf(steps + offsets[None, :])[0]


def _audit_parameter_grid(n_pairs: int, seed: int) -> np.ndarray:
    """Sampling lattice for dilation audits.

    A fixed coarse lattice over (t, s)^2 anchors the maximum-deviation
    estimate (identical across seeds), and a seeded Kronecker fill adds
    coverage between the anchors.
    """
    levels = np.array([0.1, 0.5, 0.9])
    anchors = np.array(
        [(t1, s1, t2, s2) for t1 in levels for s1 in levels for t2 in levels for s2 in levels]
    )
    # near-coincident probes capture the local dilation extremes that
    # moderate-distance pairs average away
    eps = 0.03
    local = []
    for t in levels:
        for s in levels:
            local.append((t, s, min(t + eps, 1.0), s))
            local.append((t, s, t, min(s + eps, 1.0)))
            local.append((t, s, min(t + eps, 1.0), min(s + eps, 1.0)))
    return np.vstack([anchors, np.array(local), _low_discrepancy(n_pairs, seed)])


@dataclass
class SimilarityAudit:
    """Measured dilation deviation of one subdivision map.

    ``max_ratio_deviation`` is the worst |d(f x, f y)/d(x, y) - 1/2| over
    the sampled pairs; the audit passes when it stays within the quadratic
    envelope lam * c * diam(parent)^2.
    """

    index: tuple
    lam: float
    max_ratio_deviation: float
    envelope: float
    passed: bool
    pairs_used: int
    parent_diam: float


def _audit_pairs(system, digits, n_pairs, seed):
    parent = system.cell(digits[:-1])
    digit = digits[-1]
    pts = _audit_parameter_grid(n_pairs, seed)
    t1, s1, t2, s2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    cutoff = 1e-6 * parent.diam
    if system.surface.flat:
        apex, p_j, p_k = parent._apex_frame(digit)
        e_k = p_k - apex
        e_j = p_j - apex
        # displacement of phi(t1,s1) - phi(t2,s2) in the apex frame; the
        # halved-parameter displacement is exactly half of it in floating
        # point, so flat deviations vanish identically.
        ca = s1 * (1 - t1) - s2 * (1 - t2)
        cb = s1 * t1 - s2 * t2
        dx = ca[:, None] * e_k[None, :] + cb[:, None] * e_j[None, :]
        d = np.hypot(dx[:, 0], dx[:, 1])
        mask = d >= cutoff
        if not np.any(mask):
            raise DomainError("all sampled audit pairs are degenerate")
        ca_h = (s1 / 2) * (1 - t1) - (s2 / 2) * (1 - t2)
        cb_h = (s1 / 2) * t1 - (s2 / 2) * t2
        dxh = ca_h[:, None] * e_k[None, :] + cb_h[:, None] * e_j[None, :]
        dh = np.hypot(dxh[:, 0], dxh[:, 1])
        return dh[mask] / d[mask], parent
    xs = parent.phi_many(digit, t1, s1)
    ys = parent.phi_many(digit, t2, s2)
    d = system.surface.distance_many(xs, ys)
    mask = d >= cutoff
    if not np.any(mask):
        raise DomainError("all sampled audit pairs are degenerate")
    fxs = parent.phi_many(digit, t1[mask], s1[mask] / 2)
    fys = parent.phi_many(digit, t2[mask], s2[mask] / 2)
    df = system.surface.distance_many(fxs, fys)
    return df / d[mask], parent


def audit_similarity(system: TriangleSystem, index, n_pairs: int = 100, seed: int = 0) -> SimilarityAudit:
    """Sample pair dilations of the map onto cell ``index``."""
    if n_pairs < 100:
        raise DomainError("the sampling budget must be at least 100 pairs")
    digits = mi_validate(index)
    if not digits:
        raise DomainError("audit needs a nonempty multi-index")
    ratios, parent = _audit_pairs(system, digits, n_pairs, seed)
    dev = float(np.max(np.abs(ratios - 0.5)))
    c = system.gauge_c if system.gauge_c is not None else 0.0
    envelope = 0.5 * c * parent.diam**2
    return SimilarityAudit(
        index=digits,
        lam=0.5,
        max_ratio_deviation=dev,
        envelope=envelope,
        passed=dev <= envelope,
        pairs_used=int(len(ratios)),
        parent_diam=parent.diam,
    )


def calibrate_gauge(system: TriangleSystem, max_parent_depth: int = 2, n_pairs: int = 100, seed: int = 0) -> float:
    """Fit the quadratic gauge constant on the shallow levels and freeze it.

    c is 1.5 times the worst deviation-to-envelope slope over all cells
    whose parent sits at depth <= max_parent_depth; deeper audits then test
    the frozen value.
    """
    worst = 0.0
    for n in range(1, min(max_parent_depth + 1, system.depth) + 1):
        for index in system.indices(n):
            audit = audit_similarity(system, index, n_pairs=n_pairs, seed=seed)
            slope = audit.max_ratio_deviation / (0.5 * audit.parent_diam**2)
            worst = max(worst, slope)
    system.gauge_c = 1.5 * worst
    return system.gauge_c


def _worker_count(threads=None) -> int:
    import os

    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("GEOGASKET_THREADS")
    return max(1, int(env)) if env else 1


def audit_sweep(system: TriangleSystem, n_pairs: int = 100, cells_per_level: int = 12, seed: int = 0, threads=None):
    """Audit a deterministic sample of cells at every level.

    Audits are independent per cell; with more than one worker they run on
    a thread pool (the numeric kernels release the GIL).
    """
    indices = []
    for n in range(1, system.depth + 1):
        total = 3**n
        if total <= cells_per_level:
            codes = range(total)
        else:
            codes = np.unique(
                np.linspace(0, total - 1, cells_per_level).astype(int)
            )
        indices.extend(mi_from_code(int(code), n) for code in codes)
    workers = _worker_count(threads)
    if workers == 1:
        return [audit_similarity(system, i, n_pairs=n_pairs, seed=seed) for i in indices]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda i: audit_similarity(system, i, n_pairs=n_pairs, seed=seed), indices)
        )


# -- quotient drift and diameter products ---------------------------------


@dataclass
class RatioProductReport:
    max_drift: float
    bound: float
    violations: list
    passed: bool


def check_ratio_products(system: TriangleSystem) -> RatioProductReport:
    """Side-quotient drift of every cell against the product bound.

    The bound is L(r) = exp(2 r^2 / (1 - nu^2)) with r the base diameter
    and nu the diameter contraction factor; base quotients a_i/a_j may
    drift by at most this factor under repeated subdivision.
    """
    r = system.base.diam
    nu = system.nu
    bound = math.exp(2.0 * r * r / (1.0 - nu * nu))
    base_sides = np.asarray(system.base.side_lengths)
    violations = []
    max_drift = 1.0
    pairs = [(0, 1), (1, 2), (2, 0)]
    for n in range(1, system.depth + 1):
        sides = system.level(n).side_lengths
        for i, j in pairs:
            drift = (sides[:, i] / sides[:, j]) / (base_sides[i] / base_sides[j])
            drift = np.maximum(drift, 1.0 / drift)
            worst = float(np.max(drift))
            max_drift = max(max_drift, worst)
            bad = np.where(drift > bound)[0]
            for code in bad:
                violations.append((mi_from_code(int(code), n), (i + 1, j + 1)))
    return RatioProductReport(
        max_drift=max_drift, bound=bound, violations=violations, passed=not violations
    )


@dataclass
class ControlledMoranReport:
    min_ratio: float
    max_ratio: float
    center: float
    band_factor: float
    d_required: float
    d_supplied: float | None
    d_sufficient: bool | None
    small_cell_level: int | None
    pairs_checked: int


def controlled_moran_check(system: TriangleSystem, D: float | None = None, max_total: int | None = None) -> ControlledMoranReport:
    """Diameter-product control over concatenated indices.

    For index pairs (I, J) with |I| + |J| within the stored depth, the
    ratio diam(IJ) / (diam(I) diam(J)) must stay in a uniform band; on the
    flat model it is the constant 1/diam(base).
    """
    limit = system.depth if max_total is None else min(max_total, system.depth)
    min_ratio = math.inf
    max_ratio = -math.inf
    pairs_checked = 0
    diams = [system.level_diams(n) for n in range(system.depth + 1)]
    for m in range(1, limit):
        for k in range(1, limit - m + 1):
            dm = diams[m]
            dk = diams[k]
            dmk = diams[m + k]
            concat = dmk.reshape(3**m, 3**k)
            ratio = concat / (dm[:, None] * dk[None, :])
            min_ratio = min(min_ratio, float(np.min(ratio)))
            max_ratio = max(max_ratio, float(np.max(ratio)))
            pairs_checked += ratio.size
    if pairs_checked == 0:
        center = 1.0 / system.base.diam
        return ControlledMoranReport(
            min_ratio=math.nan,
            max_ratio=math.nan,
            center=center,
            band_factor=1.0,
            d_required=max(1.0, 1.0 / system.base.diam),
            d_supplied=D,
            d_sufficient=True if D is not None else None,
            small_cell_level=None,
            pairs_checked=0,
        )
    center = 1.0 / system.base.diam
    band_factor = max(max_ratio / center, center / min_ratio)
    d_required = max(max_ratio, 1.0 / min_ratio, 1.0)
    small_cell_level = None
    d_gate = D if D is not None else d_required
    for n in range(system.depth + 1):
        if float(np.max(diams[n])) < 1.0 / d_gate:
            small_cell_level = n
            break
    d_sufficient = None
    if D is not None:
        d_sufficient = bool(
            min_ratio >= 1.0 / D and max_ratio <= D and small_cell_level is not None
        )
    return ControlledMoranReport(
        min_ratio=min_ratio,
        max_ratio=max_ratio,
        center=center,
        band_factor=band_factor,
        d_required=d_required,
        d_supplied=D,
        d_sufficient=d_sufficient,
        small_cell_level=small_cell_level,
        pairs_checked=pairs_checked,
    )


# -- structural checks -----------------------------------------------------


@dataclass
class NestingReport:
    checked: int
    max_residual_factor: float
    all_inside: bool


def nesting_check(system: TriangleSystem, cells_per_level: int = 12, tol_factor: float = 1e-7, seed: int = 0) -> NestingReport:
    """Child vertices must lie in the closed parent region.

    Membership is tested through the inverse parametrization; residuals
    are reported relative to the parent diameter.
    """
    checked = 0
    worst = 0.0
    all_inside = True
    rng = np.random.default_rng(seed)
    for n in range(1, system.depth + 1):
        total = 3**n
        if total <= cells_per_level:
            codes = np.arange(total)
        else:
            codes = rng.choice(total, size=cells_per_level, replace=False)
        for code in codes:
            digits = mi_from_code(int(code), n)
            parent = system.cell(digits[:-1])
            child = system.cell(digits)
            tol = tol_factor * parent.diam
            verts = child.vertex_array()
            if system.surface.flat:
                inside_all = bool(np.all(parent.contains_many(verts, tol=1e-12)))
                resid_max = 0.0
            else:
                _, ss, resid = parent.invert_phi_many(1, verts, tol=0.05 * tol)
                inside_all = bool(np.all((ss <= 1 + 1e-9) & (resid <= tol)))
                resid_max = float(np.max(resid))
            checked += len(verts)
            worst = max(worst, resid_max / max(parent.diam, 1e-300))
            all_inside = all_inside and inside_all
    return NestingReport(checked=checked, max_residual_factor=worst, all_inside=all_inside)


@dataclass
class ContractionReport:
    passed: bool
    worst_margin: float


def contraction_check(system: TriangleSystem) -> ContractionReport:
    """Every level-n cell diameter must be at most nu^n times the base's."""
    base = system.base.diam
    worst = 0.0
    ok = True
    for n in range(1, system.depth + 1):
        cap = system.nu**n * base
        worst_level = float(np.max(system.level_diams(n)))
        margin = worst_level / cap
        worst = max(worst, margin)
        ok = ok and worst_level <= cap * (1 + 1e-12)
    return ContractionReport(passed=ok, worst_margin=worst)


@dataclass
class DisjointnessReport:
    pairs_checked: int
    violations: int


def sibling_disjointness_check(system: TriangleSystem, max_depth: int = 4, samples: int = 1000, seed: int = 0, margin: float = 0.02) -> DisjointnessReport:
    """Interior samples of one child must stay outside its siblings."""
    pts = _low_discrepancy(samples, seed)[:, :2]
    ts = margin + (1 - 2 * margin) * pts[:, 0]
    ss = margin + (1 - 2 * margin) * pts[:, 1]
    pairs_checked = 0
    violations = 0
    top = min(max_depth, system.depth)
    for n in range(1, top + 1):
        parent_level = n - 1
        total = 3**parent_level
        codes = range(min(total, 9))
        for code in codes:
            parent_digits = mi_from_code(int(code), parent_level)
            children = [system.cell(parent_digits + (d,)) for d in (1, 2, 3)]
            for a in range(3):
                interior = children[a].phi_many(1, ts, ss)
                for b in range(3):
                    if a == b:
                        continue
                    pairs_checked += 1
                    tol = -1e-9 if system.surface.flat else 1e-12
                    inside = children[b].contains_many(interior, tol=tol)
                    violations += int(np.sum(inside))
    return DisjointnessReport(pairs_checked=pairs_checked, violations=violations)


@dataclass
class NondegeneracySweepReport:
    passed: bool
    failures: list
    min_angle: float
    max_angle: float


def nondegeneracy_sweep(system: TriangleSystem, delta: float | None = None) -> NondegeneracySweepReport:
    """Check every stored cell against delta/2-non-degeneracy."""
    delta = system.delta if delta is None else delta
    half = delta / 2.0
    failures = []
    mn = math.inf
    mx = -math.inf
    for n in range(1, system.depth + 1):
        sides = system.level(n).side_lengths
        angles = planar_angles_batch(sides)
        mn = min(mn, float(np.min(angles)))
        mx = max(mx, float(np.max(angles)))
        bad = np.where(
            np.any((angles <= half) | (angles >= math.pi - half), axis=1)
        )[0]
        failures.extend(mi_from_code(int(c), n) for c in bad)
    return NondegeneracySweepReport(
        passed=not failures, failures=failures, min_angle=mn, max_angle=mx
    )


# -- gnomonic cross-check ---------------------------------------------------


def _embed_sphere(pts: np.ndarray) -> np.ndarray:
    rho2 = np.sum(pts * pts, axis=-1, keepdims=True)
    denom = 1.0 + rho2
    out = np.concatenate([2 * pts / denom, (1 - rho2) / denom], axis=-1)
    return out


@dataclass
class GnomonicReport:
    depth1_deviation: float
    max_similarity_deviation: float
    max_relative_deviation: float
    per_level_relative: list
    bilipschitz_constant: float
    area_comparison_ok: bool
    levels_checked: int
    pairs_sampled: int


def gnomonic_crosscheck(system: TriangleSystem, pair_budget: int = 10**4, seed: int = 0) -> GnomonicReport:
    """Project a spherical system to the plane of its base vertices.

    Central projection along rays from the sphere center fixes the base
    vertices and maps first-level geodesic midpoints to exact segment
    midpoints, so depth-1 projected cells are exactly halved copies of the
    projected base.  Deeper arc endpoints leave the base plane and the
    projected cells deviate from exact 2^-n similarity by O(r^2) relative;
    the measured drift is reported per level.  The projection's
    bi-Lipschitz constant and the area comparison are estimated on samples.
    """
    if system.surface.kind != SPHERE:
        raise DomainError("the planar cross-check applies to unit-sphere systems")
    if float(np.sum(system.base.side_lengths)) >= 2 * math.pi:
        raise DomainError("base perimeter must be below 2*pi")

    base3 = _embed_sphere(system.base.vertex_array())
    normal = np.cross(base3[1] - base3[0], base3[2] - base3[0])
    normal = normal / np.linalg.norm(normal)
    offset = float(base3[0] @ normal)
    if abs(offset) < 1e-12:
        raise DomainError("base plane passes through the sphere center")

    def project(pts3):
        scale = offset / (pts3 @ normal)
        return pts3 * scale[..., None]

    base_proj = project(base3)
    base_lens = np.array(
        [
            np.linalg.norm(base_proj[2] - base_proj[1]),
            np.linalg.norm(base_proj[0] - base_proj[2]),
            np.linalg.norm(base_proj[1] - base_proj[0]),
        ]
    )
    max_dev = 0.0
    max_rel = 0.0
    depth1_dev = 0.0
    per_level = []
    for n in range(1, system.depth + 1):
        verts3 = _embed_sphere(system.level(n).vertices)
        proj = project(verts3)
        seg = proj[:, [2, 0, 1], :] - proj[:, [1, 2, 0], :]
        lens = np.linalg.norm(seg, axis=2)
        expected = base_lens[None, :] * (0.5**n)
        dev = float(np.max(np.abs(lens - expected)))
        rel = float(np.max(np.abs(lens / expected - 1.0)))
        per_level.append(rel)
        max_dev = max(max_dev, dev)
        max_rel = max(max_rel, rel)
        if n == 1:
            depth1_dev = dev

    # bi-Lipschitz estimate on sampled vertex pairs at the deepest level
    verts = system.level(system.depth).vertices.reshape(-1, 2)
    verts = np.unique(verts, axis=0)
    rng = np.random.default_rng(seed)
    m = min(pair_budget, len(verts) * (len(verts) - 1) // 2)
    ii = rng.integers(0, len(verts), size=m)
    jj = rng.integers(0, len(verts), size=m)
    keep = ii != jj
    ii, jj = ii[keep], jj[keep]
    sphere_d = system.surface.distance_many(verts[ii], verts[jj])
    p3 = project(_embed_sphere(verts))
    plane_d = np.linalg.norm(p3[ii] - p3[jj], axis=1)
    ratio = sphere_d / plane_d
    bilip = float(max(np.max(ratio), np.max(1.0 / ratio)))

    # area comparison on the deepest level
    area_ok = True
    lv = system.level(system.depth)
    verts3 = _embed_sphere(lv.vertices)
    proj = project(verts3)
    for idx in range(len(lv)):
        a, b, c = np.sort(lv.side_lengths[idx])[::-1]
        s = 0.5 * (a + b + c)
        tanprod = (
            math.tan(s / 2)
            * math.tan((s - a) / 2)
            * math.tan((s - b) / 2)
            * math.tan((s - c) / 2)
        )
        sph_area = 4.0 * math.atan(math.sqrt(max(tanprod, 0.0)))
        e1 = proj[idx, 1] - proj[idx, 0]
        e2 = proj[idx, 2] - proj[idx, 0]
        plane_area = 0.5 * np.linalg.norm(np.cross(e1, e2))
        if sph_area < plane_area / (bilip**2) * (1 - 1e-9):
            area_ok = False
            break
    return GnomonicReport(
        depth1_deviation=depth1_dev,
        max_similarity_deviation=max_dev,
        max_relative_deviation=max_rel,
        per_level_relative=per_level,
        bilipschitz_constant=bilip,
        area_comparison_ok=area_ok,
        levels_checked=system.depth,
        pairs_sampled=int(len(ii)),
    )


# -- serialization and rendering -------------------------------------------


def system_to_json(system: TriangleSystem, audits=None, surface_doc=None) -> str:
    """Deterministic JSON export of a system (and optional audit summary)."""
    meta = {
        "surface": surface_doc if surface_doc is not None else system.surface_spec,
        "depth": system.depth,
        "delta": system.delta,
        "nu": system.nu,
        "ratios": list(system.ratios),
        "gauge_c": system.gauge_c,
        "base_vertices": [[p.u, p.v] for p in system.base.vertices],
        "base_side_lengths": [float(x) for x in system.base.side_lengths],
    }
    levels = []
    for n in range(1, system.depth + 1):
        lv = system.level(n)
        cells = []
        for code in range(len(lv)):
            cells.append(
                {
                    "vertices": lv.vertices[code].tolist(),
                    "side_lengths": lv.side_lengths[code].tolist(),
                }
            )
        levels.append({"depth": n, "cells": cells})
    doc = {"meta": meta, "levels": levels}
    if audits is not None:
        doc["audits"] = [
            {
                "index": list(a.index),
                "max_ratio_deviation": a.max_ratio_deviation,
                "envelope": a.envelope,
                "passed": a.passed,
            }
            for a in audits
        ]
    return json.dumps(doc, sort_keys=True, indent=1)


def system_from_json(text: str) -> TriangleSystem:
    doc = json.loads(text)
    meta = doc["meta"]
    surface = make_surface(meta["surface"])
    base = GeodesicTriangleRegion(
        surface, meta["base_vertices"], meta["base_side_lengths"]
    )
    levels = [
        LevelArrays(
            vertices=base.vertex_array()[None, :, :],
            side_lengths=np.asarray(base.side_lengths)[None, :],
        )
    ]
    for entry in doc["levels"]:
        verts = np.array([c["vertices"] for c in entry["cells"]], dtype=float)
        sides = np.array([c["side_lengths"] for c in entry["cells"]], dtype=float)
        levels.append(LevelArrays(vertices=verts, side_lengths=sides))
    system = TriangleSystem(
        base, meta["depth"], meta["delta"], levels, gauge_c=meta.get("gauge_c")
    )
    system.surface_spec = meta["surface"]
    return system


def render_svg(system: TriangleSystem, level: int, size: int = 1024) -> str:
    """Stroke-only SVG of the cells at a level, in chart coordinates."""
    lv = system.level(level)
    pts = lv.vertices.reshape(-1, 2)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    pad = 0.05 * span
    scale = size / (span + 2 * pad)

    def to_px(p):
        x = (p[0] - lo[0] + pad) * scale
        y = size - (p[1] - lo[1] + pad) * scale
        return f"{x:.3f},{y:.3f}"

    polys = []
    for tri in lv.vertices:
        polys.append(
            f'<polygon points="{to_px(tri[0])} {to_px(tri[1])} {to_px(tri[2])}" '
            f'fill="none" stroke="black" stroke-width="0.5"/>'
        )
    body = "\n".join(polys)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n'
        f"{body}\n</svg>\n"
    )
