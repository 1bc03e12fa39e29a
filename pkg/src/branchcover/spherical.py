"""Spherical signals by ray casting, plus the equirectangular baseline."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._topology import undirected_edges
from .mesh import MeshError, TriangleMesh
from .shapes import _icosahedron

logger = logging.getLogger(__name__)

MISS_DISTANCE = 2.0
MAX_SUBDIVISIONS = 8
CHANNELS = ("distance", "sin_angle", "cos_angle")


def icosphere(subdivisions):
    """Icosahedron with ``subdivisions`` rounds of 1-to-4 midpoint splits, on the unit sphere."""
    if not 0 <= subdivisions <= MAX_SUBDIVISIONS:
        raise ValueError(f"subdivisions must lie in [0, {MAX_SUBDIVISIONS}]")
    v, f = _icosahedron()
    for _ in range(subdivisions):
        edges, he_edge = undirected_edges(f)
        mid = v[edges[:, 0]] + v[edges[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = len(v) + he_edge.reshape(-1, 3)
        # he_edge[:, j] is edge (f[:, j], f[:, j+1])
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
        f = np.concatenate([np.stack(t, 1) for t in ((a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca))])
        v = np.vstack([v, mid])
    return TriangleMesh(v, f)


@dataclass(eq=False)
class SphericalSignal:
    """Per sphere vertex: ray length to the model and sin/cos of the incidence angle.

    Misses carry ``distance = 2`` and ``sin = cos = 0``.
    """

    sphere_mesh: TriangleMesh
    distance: np.ndarray
    sin_angle: np.ndarray
    cos_angle: np.ndarray
    hit: np.ndarray
    hit_face: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def channels(self):
        return {name: getattr(self, name) for name in CHANNELS}

    def stacked(self):
        return np.stack([getattr(self, name) for name in CHANNELS], axis=1)


def normalize_model(model):
    """Center on the area-weighted centroid; shrink, never enlarge, to fit the unit ball."""
    if model.n_faces == 0:
        raise MeshError("model is empty", "faces")
    a = model.face_areas
    cent = (model.vertices[model.faces].mean(axis=1) * a[:, None]).sum(0) / a.sum()
    v = model.vertices - cent
    s = min(1.0, 1.0 / np.linalg.norm(v, axis=1).max())
    return v * s, cent, s


def ray_triangle(origins, dirs, tri, eps=1e-12, slack=1e-10):
    """Moller-Trumbore for every (ray, triangle) pair; ``t`` is inf on a miss.

    Returns ``t`` of shape (rays, faces).  Edges and vertices count as hits,
    with ``slack`` in barycentric units, so rays through a shared vertex
    cannot slip between rounded neighbours.
    """
    v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(dirs[:, None, :], e2[None])
    det = np.einsum("rfk,fk->rf", p, e1)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origins[:, None, :] - v0[None]
    u = np.einsum("rfk,rfk->rf", s, p) * inv
    q = np.cross(s, e1[None])
    w = np.einsum("rk,rfk->rf", dirs, q) * inv
    t = np.einsum("rfk,fk->rf", q, e2) * inv
    hit = ok & (u >= -slack) & (w >= -slack) & (u + w <= 1 + slack) & (t >= 0)
    return np.where(hit, t, np.inf)


def raycast_signal(model, sphere, chunk=256):
    """Cast from every sphere vertex towards the origin onto the normalized model.

    Brute force over all faces in chunks of rays; the nearest hit wins, ties
    go to the lowest face index.
    """
    verts, center, scale = normalize_model(model)
    assert np.linalg.norm(verts, axis=1).max() <= 1.0 + 1e-12
    tri = verts[model.faces]
    nrm = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    origins = sphere.vertices / np.linalg.norm(sphere.vertices, axis=1, keepdims=True)
    dirs = -origins
    n = len(origins)
    dist = np.full(n, MISS_DISTANCE)
    face = np.full(n, -1, dtype=np.int64)
    for start in range(0, n, chunk):
        t = ray_triangle(origins[start : start + chunk], dirs[start : start + chunk], tri)
        f = np.argmin(t, axis=1)
        tmin = t[np.arange(len(f)), f]
        hit = np.isfinite(tmin)
        dist[start : start + chunk][hit] = tmin[hit]
        face[start : start + chunk][hit] = f[hit]
    hit = face >= 0
    cos = np.zeros(n)
    cos[hit] = np.abs(np.einsum("ij,ij->i", dirs[hit], nrm[face[hit]]))
    cos = np.clip(cos, 0.0, 1.0)
    sin = np.where(hit, np.sqrt(1.0 - cos**2), 0.0)
    logger.info("ray casting: %d of %d rays hit", int(hit.sum()), n)
    return SphericalSignal(sphere, dist, sin, cos, hit, face, center, scale)


def equirectangular_directions(n):
    """Unit directions of the ``n x n`` pixel centers; also returns (lon, lat)."""
    lon = 2 * np.pi * (np.arange(n) + 0.5) / n
    lat = np.pi * (np.arange(n) + 0.5) / n - np.pi / 2
    lo, la = np.meshgrid(lon, lat)
    d = np.stack([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)], axis=-1)
    return d, lo, la


def _vertex_faces(mesh):
    f = mesh.faces
    v = f.ravel()
    fid = np.repeat(np.arange(len(f)), 3)
    order = np.argsort(v, kind="stable")
    counts = np.bincount(v, minlength=mesh.n_vertices)
    width = counts.max()
    out = np.full((mesh.n_vertices, width), -1, dtype=np.int64)
    start = np.cumsum(counts) - counts
    slot = np.arange(len(v)) - start[v[order]]
    out[v[order], slot] = fid[order]
    return out


def locate_on_sphere(mesh, dirs, k=3):
    """Containing face and gnomonic barycentrics for unit directions ``dirs`` (n, 3)."""
    tree = cKDTree(mesh.vertices)
    _, near = tree.query(dirs, k=k)
    vf = _vertex_faces(mesh)
    cand = vf[near.reshape(len(dirs), -1)].reshape(len(dirs), -1)
    valid = cand >= 0
    safe = np.where(valid, cand, 0)
    M = mesh.vertices[mesh.faces[safe]]  # (n, c, 3 corners, 3 xyz)
    lam = np.linalg.solve(np.swapaxes(M, -1, -2), np.broadcast_to(dirs[:, None, :], M.shape[:2] + (3,))[..., None])[..., 0]
    lam = lam / lam.sum(axis=-1, keepdims=True)
    score = np.where(valid, lam.min(axis=-1), -np.inf)
    best = np.argmax(score, axis=1)
    rows = np.arange(len(dirs))
    return safe[rows, best], lam[rows, best], score[rows, best]


@dataclass
class EquirectDistortion:
    area_scale: np.ndarray
    angle_distortion: np.ndarray
    latitude: np.ndarray


def equirectangular_distortion(n):
    """Per-cell area scale (relative to the equator) and angle distortion.

    The area scale of row ``i`` is ``dlat / (sin lat_top - sin lat_bottom)``,
    which tends to ``1 / cos(lat)``.  The map stretches longitude by
    ``2 pi cos(lat)`` and latitude by ``pi``.
    """
    edges = np.pi * np.arange(n + 1) / n - np.pi / 2
    lat = 0.5 * (edges[1:] + edges[:-1])
    area = (np.pi / n) / (np.sin(edges[1:]) - np.sin(edges[:-1]))
    s = 2 * np.cos(lat)
    angle = np.maximum(s, 1.0) / np.minimum(s, 1.0)
    return EquirectDistortion(
        area_scale=np.repeat(area[:, None], n, axis=1),
        angle_distortion=np.repeat(angle[:, None], n, axis=1),
        latitude=np.repeat(lat[:, None], n, axis=1),
    )


def equirectangular_image(sig, n):
    """``(image (C, n, n), EquirectDistortion)`` sampling per-vertex channels of ``sig``.

    ``sig`` is a ``SphericalSignal`` or a ``(sphere mesh, values (V, C))`` pair.
    """
    if isinstance(sig, SphericalSignal):
        mesh, vals = sig.sphere_mesh, sig.stacked()
    else:
        mesh, vals = sig
        vals = np.asarray(vals, dtype=float).reshape(mesh.n_vertices, -1)
    dirs, _, _ = equirectangular_directions(n)
    face, lam, _ = locate_on_sphere(mesh, dirs.reshape(-1, 3))
    corners = mesh.faces[face]
    img = np.einsum("pk,pkc->cp", lam, vals[corners]).reshape(-1, n, n)
    return img, equirectangular_distortion(n)


def save_signal_table(path, sig):
    with open(path, "w") as fh:
        fh.write("# vertex distance sin_angle cos_angle (misses: distance 2, sin 0, cos 0)\n")
        for i, (d, s, c) in enumerate(zip(sig.distance, sig.sin_angle, sig.cos_angle)):
            fh.write(f"{i} {float(d)!r} {float(s)!r} {float(c)!r}\n")
