import math

import numpy as np
import pytest

from geogasket.gasket import build_system, calibrate_gauge
from geogasket.surfaces import (
    euclidean_surface,
    poincare_disk_surface,
    unit_sphere_surface,
)
from geogasket.triangles import GeodesicTriangleRegion


@pytest.fixture(scope="session")
def eu():
    return euclidean_surface()


@pytest.fixture(scope="session")
def sphere():
    return unit_sphere_surface()


@pytest.fixture(scope="session")
def hyperbolic():
    return poincare_disk_surface()


def equilateral_base(surface, diam, chart_metric_scale):
    """Near-equilateral triangle around the chart origin with sides ~diam."""
    verts = []
    for ang in (90, 210, 330):
        a = math.radians(ang)
        w = np.array([math.cos(a), math.sin(a)]) * chart_metric_scale
        p = surface.exp_map((0.0, 0.0), w, diam / math.sqrt(3))
        verts.append(p.as_array())
    return GeodesicTriangleRegion.from_vertices(surface, *verts)


@pytest.fixture(scope="session")
def flat_base(eu):
    return GeodesicTriangleRegion.from_vertices(
        eu, (0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0)
    )


@pytest.fixture(scope="session")
def sphere_base(sphere):
    return equilateral_base(sphere, 0.3, 0.5)


@pytest.fixture(scope="session")
def hyperbolic_base(hyperbolic):
    return equilateral_base(hyperbolic, 0.3, 0.5)


@pytest.fixture(scope="session")
def flat_system(flat_base):
    return build_system(flat_base, 8, delta=0.5)


@pytest.fixture(scope="session")
def sphere_system(sphere_base):
    system = build_system(sphere_base, 6, delta=0.4)
    calibrate_gauge(system, n_pairs=100, seed=1)
    return system


@pytest.fixture(scope="session")
def hyperbolic_system(hyperbolic_base):
    system = build_system(hyperbolic_base, 6, delta=0.4)
    calibrate_gauge(system, n_pairs=100, seed=1)
    return system
