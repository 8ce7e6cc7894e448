"""Geodesic Sierpinski gaskets on curved surfaces.

Build midpoint-subdivision triangle systems on 2D Riemannian charts,
certify the almost-similarity structure numerically, and estimate the
Hausdorff/box dimension of the limit set.
"""

from .dimension import (
    GaugeSpec,
    MoranSolution,
    RatioList,
    SimpleFamily,
    box_dimension_estimate,
    enumerate_simple_family,
    gauge_admissible,
    hausdorff_upper_sum,
    product_bounds,
    simple_family_sum,
    solve_moran,
    uniform_moran_exponent,
)
from .gasket import (
    SimilarityAudit,
    TriangleSystem,
    apply_f,
    audit_similarity,
    audit_sweep,
    build_system,
    calibrate_gauge,
    check_ratio_products,
    controlled_moran_check,
    gnomonic_crosscheck,
    render_svg,
    subdivide,
    system_from_json,
    system_to_json,
)
from .measures import (
    DiscreteMeasure,
    cell_masses,
    kr_distance,
    kr_distance_bounded,
    pushforward_fixpoint,
)
from .metric_core import (
    CoverRecord,
    PackingReport,
    PointCloud,
    box_count,
    cover_records_to_csv,
    diameter,
    greedy_pack,
)
from .scene import SceneConfig
from .surfaces import (
    GeodesicSegment,
    SurfaceModel,
    SurfacePoint,
    euclidean_surface,
    jacobi_field,
    make_surface,
    poincare_disk_surface,
    surface_from_json,
    unit_sphere_surface,
)
from .triangles import (
    ComparisonAngles,
    GeodesicTriangleRegion,
    SubtriangleSlice,
    angle_stability,
    edge_quotient_bound,
    hyperbolic_comparison_angles,
    is_delta_nondegenerate,
    perturbation_epsilon,
    planar_comparison_angles,
    spherical_comparison_angles,
    subtriangle_slice,
)

__version__ = "0.1.0"
