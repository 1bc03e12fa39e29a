"""End-to-end build: mesh -> cut -> glue -> flatten -> rasterize, with artifacts on disk."""

import json
import logging
import os
import time

import numpy as np

from . import cover as cover_mod
from . import flatten as flat_mod
from . import raster
from .config import ConfigError
from .geodesic import default_base_vertex, disjoint_cut_paths, farthest_point_sample
from .mesh import TriangleMesh
from .meshio import load_labels, load_mesh, save_labels, save_off
from .monodromy import check_gluing_conditions, gluing_for
from .shapes import humanoid, octahedron, tetrahedron
from .spherical import CHANNELS, icosphere, raycast_signal

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A failure inside one pipeline stage; ``cause`` is the original exception."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *args, **kwargs):
        t = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except Exception as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - t, 4)
        logger.info("%s done in %.2f s", name, self.timings[name])
        return out


_SHAPES = {
    "icosphere": lambda p: icosphere(int(p or 3)),
    "humanoid": lambda p: humanoid(int(p or 26)),
    "octahedron": lambda p: octahedron(),
    "tetrahedron": lambda p: tetrahedron(),
}


def open_mesh(spec, labels=None):
    """A mesh file path, or ``shape:<name>[:<param>]`` for a built-in synthetic mesh."""
    if spec.startswith("shape:"):
        _, name, *param = spec.split(":")
        if name not in _SHAPES:
            raise ConfigError(f"unknown shape {name!r}; choose from {sorted(_SHAPES)}")
        mesh = _SHAPES[name](param[0] if param else None)
        if labels is not None:
            mesh = mesh.with_signals(face_signals={"labels": load_labels(labels, mesh.n_faces)})
        return mesh
    return load_mesh(spec, labels=labels)


def _spherical_channels(mesh, names):
    """Replace ``spherical:<model>`` entries by ray-cast channels attached to ``mesh``."""
    out = []
    for name in names:
        if name.startswith("spherical:"):
            model = open_mesh(name.split(":", 1)[1])
            sig = raycast_signal(model, mesh)
            mesh = mesh.with_signals(vertex_signals=sig.channels())
            out.extend(CHANNELS)
        else:
            out.append(name)
    return mesh, out


def build(cfg):
    """Run the full pipeline for ``cfg`` and write every artifact into ``cfg.out``."""
    st = _Stages()
    st.run("validate_config", cfg.validate)
    mesh = st.run("load_mesh", open_mesh, cfg.mesh, cfg.labels)
    sigma = st.run("load_gluing", cfg.gluing)
    if sigma is None:
        rho = st.run("ramification", cfg.ramification)
        sigma = st.run("solve_gluing", gluing_for, rho, cfg.time_budget)
    else:
        rho = sigma.ramification_type()

    def _check():
        res = check_gluing_conditions(sigma, rho)
        if not res.ok:
            raise ConfigError(f"gluing instructions fail: {'; '.join(res.failures)}")

    st.run("check_gluing", _check)
    k = rho.k
    if not 0 <= cfg.seed_vertex < mesh.n_vertices:
        raise StageError("branch_points", ConfigError(f"seed vertex {cfg.seed_vertex} out of range"))
    branch = st.run("branch_points", farthest_point_sample, mesh, k, cfg.seed_vertex)
    base_vertex = cfg.base_vertex if cfg.base_vertex is not None else default_base_vertex(mesh, branch)
    n_input = mesh.n_vertices
    mesh, cuts = st.run("cut_paths", disjoint_cut_paths, mesh, base_vertex, branch)
    cov = st.run("glue", cover_mod.build_cover, mesh, cuts, sigma)
    check = st.run("verify_cover", cover_mod.verify_cover, cov, rho)
    if not check["ok"]:
        raise StageError("verify_cover", RuntimeError(f"cover checks failed: {check}"))
    cut = st.run("cut_generators", flat_mod.cut_torus_generators, cov)
    emb = st.run("flatten", flat_mod.solve_flatten, cut, cfg.tol)
    dist = st.run("distortion", flat_mod.compute_distortion, cov, emb)
    base, channels = st.run("signals", _spherical_channels, cov.base, cfg.channels)
    cov.base = base
    img = st.run("rasterize", raster.rasterize, cov, emb, channels, cfg.res)
    sel = st.run("best_copy", raster.best_copy, cov, emb, cfg.score, dist)
    report = st.run("distortion_report", raster.distortion_report, cov, emb, sel, dist)

    out = cfg.out
    os.makedirs(out, exist_ok=True)

    def _write():
        save_off(os.path.join(out, "base.off"), cov.base)
        if "labels" in cov.base.face_signals:
            save_labels(os.path.join(out, "base_labels.txt"), cov.base.face_signals["labels"])
        with open(os.path.join(out, "gluing.txt"), "w") as fh:
            fh.write(sigma.to_text())
        cover_mod.save_cover(cov, os.path.join(out, "cover.off"), os.path.join(out, "cover.txt"))
        flat_mod.save_embedding(os.path.join(out, "embedding.txt"), emb)
        flat_mod.save_distortion_csv(os.path.join(out, "distortion.csv"), dist)
        raster.save_raw(os.path.join(out, "image.raw"), img)
        raster.save_provenance(os.path.join(out, "provenance.bin"), img)
        for c, name in enumerate(img.names):
            raster.save_png(os.path.join(out, f"preview_{name}.png"), img.data[c])

    st.run("write", _write)
    summary = {
        "mesh": cfg.mesh,
        "rho": str(rho),
        "sigma": [str(s) for s in sigma.sigmas],
        "branch_vertices": list(cuts.branch_vertices),
        "base_vertex": cuts.base_vertex,
        "refined_vertices": int(cov.base.n_vertices - n_input),
        "base": {"vertices": cov.base.n_vertices, "faces": cov.base.n_faces, "euler": int(cov.base.euler_characteristic())},
        "torus": {"vertices": cov.torus.n_vertices, "faces": cov.torus.n_faces, "euler": int(check["euler_characteristic"])},
        "cover_checks": {k_: v for k_, v in check.items() if isinstance(v, (bool, int))},
        "ramification": check["ramification"],
        "loops": [len(cut.loops[0]), len(cut.loops[1])],
        "flipped_faces": int(len(emb.flipped_faces)),
        "residual": emb.residual,
        "uv_area": emb.total_area,
        "max_twin_error": float(emb.twin_errors().max()) if len(emb.twin_pairs) else 0.0,
        "resolution": cfg.res,
        "channels": list(img.names),
        "score": cfg.score,
        "percentiles": report.percentiles,
        "histograms": report.to_json()["histograms"],
        "timings": st.timings,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _load_build(embedding, cover, sidecar=None):
    sidecar = sidecar or os.path.splitext(cover)[0] + ".txt"
    cov = cover_mod.load_cover(cover, sidecar)
    emb = flat_mod.load_embedding(embedding, cov.torus)
    return cov, emb


def reconstruct(image, embedding, cover, out, sidecar=None, score="area"):
    """Rebuild the base mesh from an ``x, y, z`` image; writes OFF and a per-vertex error CSV."""
    st = _Stages()
    img = st.run("load_image", raster.load_raw, image)
    cov, emb = st.run("load_cover", _load_build, embedding, cover, sidecar)
    missing = [c for c in "xyz" if c not in img.names]
    if missing:
        raise StageError("load_image", ConfigError(f"image lacks channels {missing}"))
    dist = st.run("distortion", flat_mod.compute_distortion, cov, emb)
    sel = st.run("best_copy", raster.best_copy, cov, emb, score, dist)
    samples = st.run("pullback", raster.pullback_vertex_samples, img, cov, emb, sel, score, dist)
    xyz = samples[:, [img.names.index(c) for c in "xyz"]]
    os.makedirs(out, exist_ok=True)
    mesh = TriangleMesh(xyz, cov.base.faces, check=False)
    save_off(os.path.join(out, "reconstructed.off"), mesh)
    err = np.linalg.norm(xyz - cov.base.vertices, axis=1)
    rel = err / cov.base.bbox_diagonal
    with open(os.path.join(out, "vertex_error.csv"), "w") as fh:
        fh.write("vertex,error,relative_error\n")
        for i, (e, r) in enumerate(zip(err, rel)):
            fh.write(f"{i},{float(e)!r},{float(r)!r}\n")
    return {
        "vertices": int(len(xyz)),
        "median_relative_error": float(np.median(rel)),
        "p95_relative_error": float(np.percentile(rel, 95)),
        "max_relative_error": float(rel.max()),
        "timings": st.timings,
    }


def transfer_labels(image, embedding, cover, out, sidecar=None):
    """Push a logit image forward to per-face labels of the base mesh."""
    st = _Stages()
    img = st.run("load_image", raster.load_raw, image)
    cov, emb = st.run("load_cover", _load_build, embedding, cover, sidecar)
    labels = st.run("pushforward", raster.pushforward_labels, img, cov, emb)
    d = os.path.dirname(out)
    if d:
        os.makedirs(d, exist_ok=True)
    save_labels(out, labels)
    return {"faces": int(len(labels)), "histogram": np.bincount(labels, minlength=img.data.shape[0]).tolist(), "timings": st.timings}
