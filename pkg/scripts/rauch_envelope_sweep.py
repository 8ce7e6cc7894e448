#!/usr/bin/env python3
"""Cross-geodesic length envelope sweep over random curved triangles.

For random geodesic triangles with diameter r, the cross geodesic at
fractional arclength s must have length a1(s) with a1(s)/(s a1) inside
(1 - r^2, 1 + r^2).  Prints violation counts and worst margins.

Usage: python scripts/rauch_envelope_sweep.py --triangles 500
"""

import argparse
import math
import sys

import numpy as np

from geogasket.surfaces import poincare_disk_surface, unit_sphere_surface
from geogasket.triangles import planar_angles_batch


def sweep(surface, n_triangles, rng):
    apexes, w_b, w_c, sides = [], [], [], []
    while len(apexes) < n_triangles:
        m = 2 * n_triangles
        a_pts = rng.uniform(-0.08, 0.08, size=(m, 2))
        ang1 = rng.uniform(0, 2 * math.pi, m)
        ang2 = ang1 + rng.uniform(0.6, math.pi - 0.6, m)
        len1 = rng.uniform(0.08, 0.14, m)
        len2 = rng.uniform(0.08, 0.14, m)
        lam = np.sqrt(surface.metric(a_pts[:, 0], a_pts[:, 1])[0])
        wb = np.stack([np.cos(ang1), np.sin(ang1)], axis=1) * (len1 / lam)[:, None]
        wc = np.stack([np.cos(ang2), np.sin(ang2)], axis=1) * (len2 / lam)[:, None]
        b_pts = surface.exp_many(a_pts, wb)
        c_pts = surface.exp_many(a_pts, wc)
        tri = np.stack(
            [
                surface.distance_many(b_pts, c_pts),
                surface.distance_many(a_pts, c_pts),
                surface.distance_many(a_pts, b_pts),
            ],
            axis=1,
        )
        good = np.max(tri, axis=1) <= 0.3
        with np.errstate(invalid="ignore"):
            ang = planar_angles_batch(tri)
        good &= np.all((ang > 0.15) & (ang < math.pi - 0.15), axis=1)
        for i in np.where(good)[0][: n_triangles - len(apexes)]:
            apexes.append(a_pts[i])
            w_b.append(wb[i])
            w_c.append(wc[i])
            sides.append(tri[i])
    apexes, w_b, w_c = np.array(apexes), np.array(w_b), np.array(w_c)
    sides = np.array(sides)
    r2 = np.max(sides, axis=1) ** 2
    a1 = sides[:, 0]
    violations = 0
    worst = math.inf
    for s in np.arange(0.1, 0.95, 0.1):
        b_s = surface.exp_many(apexes, s * w_b)
        c_s = surface.exp_many(apexes, s * w_c)
        ratio = surface.distance_many(b_s, c_s) / (s * a1)
        violations += int(np.sum((ratio <= 1 - r2) | (ratio >= 1 + r2)))
        worst = min(worst, float(np.min((1 + r2) - ratio)), float(np.min(ratio - (1 - r2))))
    return violations, worst


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--triangles", type=int, default=500)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    status = 0
    for surface in (unit_sphere_surface(), poincare_disk_surface()):
        violations, worst = sweep(surface, args.triangles, rng)
        print(
            f"{surface.kind}: {args.triangles} triangles x 9 sections -> "
            f"{violations} violations, smallest margin {worst:.3e}"
        )
        status |= violations > 0
    return status


if __name__ == "__main__":
    sys.exit(main())
