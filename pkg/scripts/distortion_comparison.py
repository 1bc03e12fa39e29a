"""Angle and area distortion of the toric cover against an equirectangular map of the sphere.

Both parameterizations get the same pixel budget ``N x N``.  Area scales
are normalized so 1 means a fair share of the image.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from _cli import parse_into

from branchcover.cover import build_cover
from branchcover.flatten import compute_distortion, flatten
from branchcover.geodesic import default_base_vertex, disjoint_cut_paths, farthest_point_sample
from branchcover.monodromy import gluing_for, uniform_ramification
from branchcover.raster import best_copy, normalized_area_scale
from branchcover.spherical import equirectangular_distortion, icosphere


@dataclass
class Settings:
    subdivisions: int = 3
    resolution: int = 512
    types: list = field(default_factory=lambda: ["6,2,3", "4,2,2", "3,3,3", "5,3,5", "4,3,4"])
    percentiles: list = field(default_factory=lambda: [50, 90, 99])
    out: str = "distortion_comparison.json"


def _stats(area, angle, pcts):
    return {
        "angle": {f"p{p}": float(np.percentile(angle, p)) for p in pcts},
        "log_area_abs": {f"p{p}": float(np.percentile(np.abs(np.log10(area)), p)) for p in pcts},
    }


def main(cfg):
    sphere = icosphere(cfg.subdivisions)
    eq = equirectangular_distortion(cfg.resolution)
    # equator cells have scale 1; the whole map has mean scale 2/pi relative to the sphere
    eq_area = eq.area_scale * (np.pi / 2) / np.mean(eq.area_scale)
    result = {"equirectangular": _stats(eq_area.ravel(), eq.angle_distortion.ravel(), cfg.percentiles)}
    for spec in cfg.types:
        k, r, d = (int(x) for x in spec.split(","))
        rho, ok = uniform_ramification(k, r, d)
        if not ok:
            print(f"skip {spec}: not a torus cover")
            continue
        branch = farthest_point_sample(sphere, k, 0)
        mesh, cuts = disjoint_cut_paths(sphere, default_base_vertex(sphere, branch), branch)
        cov = build_cover(mesh, cuts, gluing_for(rho))
        emb = flatten(cov)
        dist = compute_distortion(cov, emb)
        sel = best_copy(cov, emb, "combined", dist)
        area = normalized_area_scale(cov, dist)
        result[f"cover {spec}"] = {
            "all": _stats(area, dist.angle_distortion, cfg.percentiles),
            "best": _stats(area[sel], dist.angle_distortion[sel], cfg.percentiles),
        }
    for name, val in result.items():
        s = val.get("all", val)
        print(f"{name:18s} angle {s['angle']}  |log10 area| {s['log_area_abs']}")
    with open(cfg.out, "w") as fh:
        json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main(parse_into(Settings, __doc__))
