import json
import math
import xml.dom.minidom

import numpy as np
import pytest

from geogasket.errors import DomainError, InversionError, NondegeneracyError
from geogasket.gasket import (
    TriangleSystem,
    apply_f,
    audit_similarity,
    audit_sweep,
    build_system,
    calibrate_gauge,
    check_ratio_products,
    contraction_check,
    controlled_moran_check,
    gnomonic_crosscheck,
    mi_code,
    mi_from_code,
    nesting_check,
    nondegeneracy_sweep,
    render_svg,
    sibling_disjointness_check,
    subdivide,
    system_from_json,
    system_to_json,
)
from geogasket.triangles import GeodesicTriangleRegion


def shoelace(tri):
    (x1, y1), (x2, y2), (x3, y3) = tri
    return 0.5 * abs((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))


class TestMultiIndex:
    def test_code_roundtrip(self):
        for n in (1, 2, 5):
            for code in range(3**n):
                assert mi_code(mi_from_code(code, n)) == code

    def test_bad_digit(self):
        with pytest.raises(DomainError):
            mi_code((1, 4))


class TestSubdivide:
    def test_flat_halves_sides(self, flat_base):
        c1, c2, c3, center = subdivide(flat_base)
        for idx, child in enumerate((c1, c2, c3)):
            np.testing.assert_allclose(
                child.side_lengths, flat_base.side_lengths / 2.0, rtol=1e-12
            )
            # child keeps its namesake vertex
            np.testing.assert_allclose(
                child.vertex_array()[idx], flat_base.vertex_array()[idx]
            )
        np.testing.assert_allclose(center.side_lengths, flat_base.side_lengths / 2.0, rtol=1e-12)

    def test_flat_area_additivity(self, flat_base):
        c1, c2, c3, center = subdivide(flat_base)
        total = sum(shoelace(t.vertex_array()) for t in (c1, c2, c3, center))
        assert total == pytest.approx(shoelace(flat_base.vertex_array()), abs=1e-10)

    def test_sphere_midline_rauch(self, sphere):
        tri = GeodesicTriangleRegion.from_vertices(
            sphere, (0.01, 0.0), (0.12, 0.02), (0.05, 0.1)
        )
        r = tri.diam
        c1, c2, c3, center = subdivide(tri)
        for i, child in enumerate((c1, c2, c3)):
            midline = child.side_lengths[i]
            opposite = tri.side_lengths[i]
            ratio = midline / (opposite / 2.0)
            assert 1 - r * r < ratio < 1 + r * r


class TestBuildSystem:
    def test_depth_one(self, flat_base):
        system = build_system(flat_base, 1, delta=0.5)
        assert len(system.level(1)) == 3

    def test_flat_exact_halving_depth10(self, flat_base):
        system = build_system(flat_base, 10, delta=0.5)
        diams = system.level_diams(10)
        assert len(diams) == 3**10
        np.testing.assert_allclose(diams, flat_base.diam * 2.0**-10, rtol=1e-12)

    def test_nu_value(self, sphere_system, sphere_base):
        r = sphere_base.diam
        assert sphere_system.nu == pytest.approx(0.5 * (1 + r * r))

    def test_base_must_be_nondegenerate(self, eu):
        needle = GeodesicTriangleRegion.from_vertices(eu, (0, 0), (1, 0), (0.5, 0.01))
        with pytest.raises(NondegeneracyError):
            build_system(needle, 2, delta=0.5)

    def test_cell_lookup_matches_levels(self, sphere_system):
        index = (2, 1, 3)
        cell = sphere_system.cell(index)
        lv = sphere_system.level(3)
        np.testing.assert_allclose(
            cell.vertex_array(), lv.vertices[mi_code(index)]
        )

    def test_contraction(self, sphere_system, hyperbolic_system, flat_system):
        for system in (sphere_system, hyperbolic_system, flat_system):
            assert contraction_check(system).passed

    def test_nesting(self, sphere_system, flat_system):
        for system in (sphere_system, flat_system):
            rep = nesting_check(system, cells_per_level=6, seed=3)
            assert rep.all_inside
            assert rep.max_residual_factor <= 1e-7

    def test_sibling_disjointness(self, flat_system):
        rep = sibling_disjointness_check(flat_system, max_depth=4, samples=1000, seed=5)
        assert rep.violations == 0

    def test_sibling_disjointness_curved(self, sphere_system):
        rep = sibling_disjointness_check(sphere_system, max_depth=2, samples=100, seed=5)
        assert rep.violations == 0


class TestApplyF:
    def test_fixed_vertex(self, sphere_system):
        apex = sphere_system.base.vertices[1]
        out = apply_f(sphere_system, (2,), apex)
        assert (out.u, out.v) == (apex.u, apex.v)

    def test_flat_homothety_exact(self, flat_system):
        rng = np.random.default_rng(0)
        apex = flat_system.base.vertex_array()[0]
        for _ in range(25):
            t, s = rng.uniform(0.1, 0.9), rng.uniform(0.1, 1.0)
            x = flat_system.base.phi(1, t, s).as_array()
            y = flat_system.base.phi(1, t * 0.7, s * 0.9).as_array()
            fx = apply_f(flat_system, (1,), x).as_array()
            fy = apply_f(flat_system, (1,), y).as_array()
            num = np.hypot(*(fx - fy))
            den = np.hypot(*(x - y))
            assert num / den == 0.5

    def test_sphere_dilation_band(self, sphere):
        tri = GeodesicTriangleRegion.from_vertices(
            sphere, (0.0, 0.0), (0.07, 0.005), (0.03, 0.06)
        )
        system = build_system(tri, 2, delta=0.4)
        c = calibrate_gauge(system, n_pairs=150, seed=2)
        rng = np.random.default_rng(8)
        r2 = tri.diam**2
        for _ in range(10):
            t1, s1 = rng.uniform(0.1, 0.9), rng.uniform(0.3, 1.0)
            t2, s2 = rng.uniform(0.1, 0.9), rng.uniform(0.3, 1.0)
            x = tri.phi(1, t1, s1).as_array()
            y = tri.phi(1, t2, s2).as_array()
            if sphere.distance(x, y) < 1e-4:
                continue
            fx = apply_f(system, (1,), x).as_array()
            fy = apply_f(system, (1,), y).as_array()
            ratio = sphere.distance(fx, fy) / sphere.distance(x, y)
            assert abs(ratio - 0.5) <= 0.5 * max(c, 1e-6) * r2 * 1.5

    def test_outside_point_inversion_error(self, sphere_system):
        far = np.array([0.5, 0.5])
        with pytest.raises(InversionError):
            apply_f(sphere_system, (1,), far)


class TestAudits:
    def test_flat_zero_deviation(self, flat_system):
        audit = audit_similarity(flat_system, (1, 3, 2), n_pairs=150, seed=4)
        assert audit.max_ratio_deviation == 0.0
        assert audit.passed  # envelope 0 with c = 0

    def test_budget_enforced(self, flat_system):
        with pytest.raises(DomainError):
            audit_similarity(flat_system, (1,), n_pairs=50)

    def test_sphere_all_levels_pass(self, sphere_system):
        audits = audit_sweep(sphere_system, n_pairs=100, cells_per_level=6, seed=2)
        assert audits and all(a.passed for a in audits)

    def test_quadratic_decay_across_depths(self, sphere_system):
        # deviations shrink with the parent diameter, roughly quadratically
        devs = {}
        for n in (1, 3, 5):
            audit = audit_similarity(sphere_system, tuple([1] * n), n_pairs=200, seed=6)
            devs[n] = (audit.parent_diam, audit.max_ratio_deviation)
        (d1, v1), (d5, v5) = devs[1], devs[5]
        slope = math.log(v1 / v5) / math.log(d1 / d5)
        assert slope >= 1.8

    def test_gauge_calibration_margin(self, sphere_system):
        audits = audit_sweep(sphere_system, n_pairs=100, cells_per_level=4, seed=9)
        worst = max(a.max_ratio_deviation / a.envelope for a in audits)
        assert worst <= 1.0


class TestRatioProducts:
    def test_flat_exact(self, flat_system):
        rep = check_ratio_products(flat_system)
        assert rep.passed
        assert rep.max_drift == pytest.approx(1.0, abs=1e-12)

    def test_curved_within_bound(self, sphere_system, hyperbolic_system):
        for system in (sphere_system, hyperbolic_system):
            rep = check_ratio_products(system)
            assert rep.passed
            assert rep.max_drift <= rep.bound


class TestControlledMoran:
    def test_flat_constant(self, flat_system):
        rep = controlled_moran_check(flat_system, max_total=8)
        center = 1.0 / flat_system.base.diam
        assert rep.max_ratio - rep.min_ratio <= 1e-12 * center

    def test_depth_one_vacuous(self, flat_base):
        system = build_system(flat_base, 1, delta=0.5)
        rep = controlled_moran_check(system)
        assert rep.pairs_checked == 0

    def test_sphere_band(self, sphere_system):
        rep = controlled_moran_check(sphere_system)
        # the proof-level slack allows a factor 4 around 1/diam
        assert rep.band_factor <= 4.0
        if rep.d_required:
            rep2 = controlled_moran_check(sphere_system, D=rep.d_required * 1.01)
            assert rep2.d_sufficient


class TestGnomonic:
    def test_depth1_exact_and_bilipschitz(self, sphere_system):
        rep = gnomonic_crosscheck(sphere_system, pair_budget=2000, seed=3)
        assert rep.depth1_deviation <= 1e-9
        assert rep.bilipschitz_constant <= 1.05
        assert rep.area_comparison_ok
        # deeper levels drift by O(r^2) relative, no worse
        r2 = sphere_system.base.diam ** 2
        assert rep.max_relative_deviation <= r2

    def test_requires_sphere(self, flat_system):
        with pytest.raises(DomainError):
            gnomonic_crosscheck(flat_system)

    def test_perimeter_guard(self, sphere_system):
        hacked = TriangleSystem(
            sphere_system.base,
            sphere_system.depth,
            sphere_system.delta,
            sphere_system.levels,
        )
        hacked.base = _FakePerimeter(sphere_system.base)
        with pytest.raises(DomainError):
            gnomonic_crosscheck(hacked)


class _FakePerimeter:
    """Stand-in exposing an oversized perimeter to exercise the guard."""

    def __init__(self, base):
        self.surface = base.surface
        self.side_lengths = np.array([2.5, 2.5, 2.0])
        self._base = base

    def vertex_array(self):
        return self._base.vertex_array()

    @property
    def diam(self):
        return self._base.diam


class TestNondegeneracySweep:
    def test_curved_systems(self, sphere_system, hyperbolic_system):
        for system in (sphere_system, hyperbolic_system):
            rep = nondegeneracy_sweep(system)
            assert rep.passed


class TestSerialization:
    def test_roundtrip(self, sphere_system):
        text = system_to_json(sphere_system)
        back = system_from_json(text)
        assert back.depth == sphere_system.depth
        assert back.nu == pytest.approx(sphere_system.nu)
        np.testing.assert_allclose(
            back.level(3).side_lengths, sphere_system.level(3).side_lengths
        )

    def test_deterministic(self, sphere_base):
        s1 = build_system(sphere_base, 3, delta=0.4)
        s2 = build_system(sphere_base, 3, delta=0.4)
        assert system_to_json(s1) == system_to_json(s2)

    def test_svg_valid_xml(self, flat_system):
        svg = render_svg(flat_system, 4)
        xml.dom.minidom.parseString(svg)
        assert svg.count("<polygon") == 3**4
