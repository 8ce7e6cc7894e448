import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geogasket.dimension import (
    GaugeSpec,
    RatioList,
    box_dimension_estimate,
    dimension_report_csv,
    dimension_report_json,
    disjoint_ball_intersection_count,
    enumerate_simple_family,
    gauge_admissible,
    hausdorff_upper_sum,
    product_bounds,
    simple_family_is_valid,
    simple_family_sum,
    solve_moran,
    uniform_moran_exponent,
)
from geogasket.errors import DepthExhaustedError, DomainError
from geogasket.gasket import build_system, subdivide
from geogasket.metric_core import PointCloud, greedy_pack


def bisect_moran_oracle(lams, lo=0.0, hi=50.0, iters=200):
    """Independent plain-bisection root finder for the exponent equation."""
    def f(s):
        return sum(l**s for l in lams) - 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestSolveMoran:
    def test_classical_gasket(self):
        sol = solve_moran((0.5, 0.5, 0.5))
        assert abs(sol.s - 1.584962500721156) <= 1e-12
        assert sol.residual <= 1e-12

    def test_two_halves(self):
        assert solve_moran((0.5, 0.5)).s == pytest.approx(1.0, abs=1e-13)

    def test_golden_case_with_oracle(self):
        # x + x^2 = 1 with x = 2^-s gives x = (sqrt(5)-1)/2
        sol = solve_moran((0.5, 0.25))
        x = (math.sqrt(5.0) - 1.0) / 2.0
        assert sol.s == pytest.approx(-math.log2(x), abs=1e-12)
        assert sol.s == pytest.approx(bisect_moran_oracle([0.5, 0.25]), abs=1e-11)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            solve_moran(())

    def test_single_ratio(self):
        assert solve_moran((0.7,)).s == 0.0

    @given(st.lists(st.floats(0.05, 0.95), min_size=2, max_size=5))
    @settings(max_examples=100, deadline=None)
    def test_oracle_agreement(self, lams):
        sol = solve_moran(tuple(lams))
        assert sol.s == pytest.approx(bisect_moran_oracle(lams), abs=1e-10)

    @given(st.lists(st.floats(0.1, 0.9), min_size=2, max_size=4), st.integers(0, 3))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_ratios(self, lams, idx):
        idx = idx % len(lams)
        bumped = list(lams)
        bumped[idx] = min(0.95, bumped[idx] * 1.1 + 1e-3)
        s1 = solve_moran(tuple(lams)).s
        s2 = solve_moran(tuple(bumped)).s
        assert s2 > s1

    @given(st.integers(2, 7), st.floats(0.1, 0.9))
    @settings(max_examples=100, deadline=None)
    def test_uniform_closed_form(self, k, lam):
        sol = solve_moran((lam,) * k)
        assert sol.s == pytest.approx(uniform_moran_exponent(k, lam), abs=1e-12)


class TestGauges:
    def test_square_gauge_integral(self):
        report = gauge_admissible(GaugeSpec("power", alpha=2.0), 1.0, 0.5)
        assert report.admissible
        assert report.integral == pytest.approx(1.0 / (8.0 * math.log(2.0)), abs=1e-8)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_slow_log_family_admissible(self, n):
        assert gauge_admissible(GaugeSpec("logpower", n=n), 1.0, 0.5).admissible

    def test_harmonic_log_inadmissible(self):
        assert not gauge_admissible(GaugeSpec("neglog_power", beta=1.0), 1.0, 0.5).admissible

    def test_non_increasing_table_rejected(self):
        with pytest.raises(DomainError):
            GaugeSpec("table", ys=[0.1, 0.2, 0.3], values=[1.0, 0.5, 2.0])

    def test_table_gauge_works(self):
        gauge = GaugeSpec("table", ys=[1e-6, 0.5], values=[1e-12, 0.26])
        report = gauge_admissible(gauge, 1.0, 0.5)
        assert report.admissible


class TestProductBounds:
    def test_square_gauge_vs_geometric_tail_oracle(self):
        gauge = GaugeSpec("power", alpha=2.0)
        nu, diam = 0.545, 0.3
        bounds = product_bounds(gauge, nu, diam)
        # oracle: log prod(1 + x_i) <= sum x_i = diam^2/(1 - nu^2)
        cap = math.exp(diam * diam / (1.0 - nu * nu))
        assert 1.0 < bounds.upper <= cap
        assert 0.0 < bounds.lower < 1.0

    def test_negligible_gauge_unit_products(self):
        gauge = GaugeSpec("power", alpha=300.0)
        bounds = product_bounds(gauge, 0.5, 0.3)
        assert bounds.upper == pytest.approx(1.0, abs=1e-12)
        assert bounds.lower == pytest.approx(1.0, abs=1e-12)

    def test_unit_gauge_value_rejected(self):
        gauge = GaugeSpec("table", ys=[0.1, 1.0], values=[1.5, 2.0])
        with pytest.raises(DomainError):
            product_bounds(gauge, 0.5, 0.3)


class TestSimpleFamilies:
    def test_flat_uniform_threshold(self, flat_system):
        family = enumerate_simple_family(flat_system, 2.0**-3 * flat_system.base.diam)
        assert len(family.members) == 27
        assert all(len(m) == 3 for m in family.members)

    def test_flat_intermediate_threshold(self, flat_system):
        family = enumerate_simple_family(flat_system, 0.3 * flat_system.base.diam)
        assert len(family.members) == 9

    def test_sphere_family_valid(self, sphere_system):
        family = enumerate_simple_family(sphere_system, 0.21 * sphere_system.base.diam)
        assert simple_family_is_valid(family)
        lengths = {len(m) for m in family.members}
        assert len(lengths) >= 1

    def test_depth_exhausted(self, flat_system):
        with pytest.raises(DepthExhaustedError):
            enumerate_simple_family(flat_system, 2.0**-12 * flat_system.base.diam)

    def test_uniform_family_sum_exact(self):
        members = tuple(
            (a, b) for a in (1, 2, 3) for b in (1, 2, 3)
        )
        from geogasket.dimension import SimpleFamily

        family = SimpleFamily(members=members)
        s = solve_moran((0.5, 0.5, 0.5)).s
        assert simple_family_sum(family, (0.5, 0.5, 0.5), s) == pytest.approx(1.0, abs=1e-12)

    def test_mixed_family_sum(self):
        from geogasket.dimension import SimpleFamily

        family = SimpleFamily(members=((1,), (2,), (3, 1), (3, 2), (3, 3)))
        assert simple_family_is_valid(family)
        s = solve_moran((0.5, 0.5, 0.5)).s
        assert simple_family_sum(family, (0.5, 0.5, 0.5), s) == pytest.approx(1.0, abs=1e-12)

    def test_invalid_families_detected(self):
        from geogasket.dimension import SimpleFamily

        assert not simple_family_is_valid(SimpleFamily(members=((1,), (2,))))
        assert not simple_family_is_valid(
            SimpleFamily(members=((1,), (2,), (3,), (3, 1)))
        )

    def test_random_ratio_sums(self, flat_system):
        rng = np.random.default_rng(31)
        thresholds = [0.4, 0.21, 0.1, 0.06]
        for _ in range(50):
            lams = tuple(rng.uniform(0.2, 0.8, size=3))
            s = solve_moran(lams).s
            threshold = flat_system.base.diam * thresholds[int(rng.integers(0, 4))]
            family = enumerate_simple_family(flat_system, threshold)
            total = simple_family_sum(family, lams, s)
            assert abs(total - 1.0) <= 1e-10


class TestHausdorffUpperSum:
    def test_flat_constant_in_depth(self, flat_system):
        s = math.log(3.0) / math.log(2.0)
        base = flat_system.base.diam**s
        for n in range(0, 9):
            assert hausdorff_upper_sum(flat_system, s, n) == pytest.approx(base, rel=1e-9)

    def test_sphere_bounded_by_product_envelope(self, sphere_system):
        s = math.log(3.0) / math.log(2.0)
        gauge = GaugeSpec("power", alpha=2.0)
        c = sphere_system.gauge_c or 1.0
        scaled = GaugeSpec("table",
                           ys=[1e-9, sphere_system.base.diam * 1.1],
                           values=[c * 1e-18, c * (sphere_system.base.diam * 1.1) ** 2])
        bounds = product_bounds(scaled, sphere_system.nu, sphere_system.base.diam)
        cap = bounds.upper**s * sphere_system.base.diam**s
        for n in range(1, sphere_system.depth + 1):
            assert hausdorff_upper_sum(sphere_system, s, n) <= cap


class TestBoxDimension:
    def test_flat_exact_slope(self, flat_system):
        est = box_dimension_estimate(flat_system, 2, 8)
        assert est.slope == pytest.approx(math.log(3) / math.log(2), abs=1e-10)

    def test_insufficient_levels(self, flat_system):
        with pytest.raises(DomainError):
            box_dimension_estimate(flat_system, 3, 5)

    def test_full_subdivision_harness_fills_area(self, flat_base):
        # keep all four children: counts 4^n with halved diameters -> slope 2
        levels = [[flat_base]]
        for _ in range(6):
            nxt = []
            for tri in levels[-1]:
                c1, c2, c3, center = subdivide(tri)
                nxt.extend([c1, c2, c3, center])
            levels.append(nxt)
        xs = []
        ys = []
        for n, tris in enumerate(levels):
            xs.append(-math.log(max(t.diam for t in tris)))
            ys.append(math.log(len(tris)))
        slope = np.polyfit(xs, ys, 1)[0]
        assert slope == pytest.approx(2.0, abs=1e-9)

    def test_report_serialization(self, flat_system):
        est = box_dimension_estimate(flat_system, 2, 8)
        csv_text = dimension_report_csv(flat_system, est)
        assert csv_text.startswith("epsilon,count,sum")
        json_text = dimension_report_json(flat_system, est)
        assert '"slope"' in json_text


class TestBallIntersection:
    def test_far_ball_empty(self, flat_system):
        rep = disjoint_ball_intersection_count(flat_system, 3, (10.0, 10.0), 0.01)
        assert rep.count == 0

    def test_flat_cell_scale_counts(self, eu, flat_system):
        # frozen from the exhaustive probe: with rho equal to the cell
        # diameter a closed ball touches at most 7 closed cells (adversarial
        # centers near a removed hole reach all three siblings plus
        # neighbors), and at most 3 at half that radius
        level = 4
        rho = float(np.max(flat_system.level_diams(level)))
        rng = np.random.default_rng(3)
        worst = 0
        worst_half = 0
        for _ in range(1000):
            center = rng.uniform(0, 1, size=2)
            worst = max(
                worst,
                disjoint_ball_intersection_count(flat_system, level, center, rho).count,
            )
            worst_half = max(
                worst_half,
                disjoint_ball_intersection_count(flat_system, level, center, rho / 2).count,
            )
        assert worst <= 7
        assert worst_half <= 3

    def test_count_vs_packing_bound(self, eu, flat_system):
        level = 3
        rho = float(np.max(flat_system.level_diams(level)))
        rep = disjoint_ball_intersection_count(flat_system, level, (0.5, 0.3), rho)
        # doubling probe: greedy packing of delta*r balls inside an r-ball
        # on a dense grid, at the witness-derived packing fraction
        delta = max(rep.delta_stated, 0.05)
        xs = np.linspace(-1, 1, 41)
        grid = np.array([(x, y) for x in xs for y in xs])
        keep = np.hypot(grid[:, 0], grid[:, 1]) <= 1.0
        cloud = PointCloud.from_points(eu, grid[keep])
        center_idx = int(np.argmin(np.hypot(*np.array(cloud.points).T)))
        c_delta = greedy_pack(center_idx, 1.0, delta, cloud).achieved
        assert rep.count <= max(c_delta, 1)
        assert 0 < rep.delta_stated <= rep.delta_chain < 1
