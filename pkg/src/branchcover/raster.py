"""Toric images: rasterize surface signals through a flat embedding and back.

Pixel ``(i, j)`` (row ``i``, column ``j``) has its center at
``u = (j + 0.5) / N``, ``v = (i + 0.5) / N``; all pixel arithmetic wraps
modulo ``N``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .flatten import compute_distortion

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8
HIST_BINS = 64
HIST_RANGE = (-3.0, 3.0)
PERCENTILES = (50, 90, 99)
SCORES = ("area", "angle", "combined")


class RasterError(RuntimeError):
    pass


@dataclass(eq=False)
class ToricImage:
    """``data[c, i, j]`` is channel ``names[c]`` at pixel ``(i, j)``.

    ``face[i, j]`` is the torus face containing the pixel center and
    ``bary[i, j]`` its barycentric coordinates in that face.
    """

    data: np.ndarray
    names: tuple
    face: np.ndarray = None
    bary: np.ndarray = None
    periodic: bool = field(default=True, init=False)

    @property
    def resolution(self):
        return self.data.shape[-1]

    @property
    def channels(self):
        return {n: self.data[c] for c, n in enumerate(self.names)}

    def channel(self, name):
        return self.data[self.names.index(name)]

    def sample(self, uv):
        """Bilinear periodic sampling at ``uv`` (n, 2); returns (n, C)."""
        return bilinear_sample(self.data, uv)


def pixel_centers(n):
    c = (np.arange(n) + 0.5) / n
    return c


def _bbox_pairs(tri, n):
    """Candidate (face, global row, global column) for every pixel center in a face's bbox."""
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    jmin = np.ceil(lo[:, 0] * n - 0.5).astype(np.int64)
    jmax = np.floor(hi[:, 0] * n - 0.5).astype(np.int64)
    imin = np.ceil(lo[:, 1] * n - 0.5).astype(np.int64)
    imax = np.floor(hi[:, 1] * n - 0.5).astype(np.int64)
    nj = np.maximum(jmax - jmin + 1, 0)
    ni = np.maximum(imax - imin + 1, 0)
    count = ni * nj
    face = np.repeat(np.arange(len(tri)), count)
    start = np.cumsum(count) - count
    k = np.arange(count.sum()) - start[face]
    jj = jmin[face] + k % nj[face]
    ii = imin[face] + k // nj[face]
    return face, ii, jj


def _edge_functions(tri, face, x, y):
    """Oriented edge functions with a canonical evaluation order per edge.

    Edge ``e`` runs from corner ``e+1`` to ``e+2`` of the face.  It is always
    evaluated from its lexicographically smaller endpoint, so two faces sharing
    an edge compute bitwise-opposite values.  Returns ``(values, owned)``.
    """
    vals = np.empty((len(face), 3))
    owned = np.empty((len(face), 3), dtype=bool)
    for e in range(3):
        a = tri[face, (e + 1) % 3]
        b = tri[face, (e + 2) % 3]
        swap = (a[:, 0] > b[:, 0]) | ((a[:, 0] == b[:, 0]) & (a[:, 1] > b[:, 1]))
        p = np.where(swap[:, None], b, a)
        q = np.where(swap[:, None], a, b)
        val = (q[:, 0] - p[:, 0]) * (y - p[:, 1]) - (q[:, 1] - p[:, 1]) * (x - p[:, 0])
        vals[:, e] = np.where(swap, -val, val)
        dx = b[:, 0] - a[:, 0]
        dy = b[:, 1] - a[:, 1]
        owned[:, e] = (dy > 0) | ((dy == 0) & (dx < 0))
    return vals, owned


def locate_pixels(torus_uv, n):
    """Per-pixel containing face and barycentrics under the top-left rule."""
    if n < MIN_RESOLUTION:
        raise RasterError(f"resolution {n} is below the minimum {MIN_RESOLUTION}")
    tri = np.asarray(torus_uv, dtype=float)
    face, ii, jj = _bbox_pairs(tri, n)
    x = (jj + 0.5) / n
    y = (ii + 0.5) / n
    vals, owned = _edge_functions(tri, face, x, y)
    inside = np.all((vals > 0) | ((vals == 0) & owned), axis=1)
    pix = np.mod(ii, n) * n + np.mod(jj, n)
    total = vals.sum(axis=1)
    total = np.where(total == 0, 1.0, total)
    bary = vals / total[:, None]
    out_face = np.full(n * n, -1, dtype=np.int64)
    out_bary = np.zeros((n * n, 3))
    hit = np.nonzero(inside)[0]
    order = hit[np.lexsort((face[hit], pix[hit]))]
    _, first = np.unique(pix[order], return_index=True)
    win = order[first]
    out_face[pix[win]] = face[win]
    out_bary[pix[win]] = bary[win]
    miss = np.nonzero(out_face < 0)[0]
    if len(miss):
        # numerically uncovered centers go to the candidate face they are least outside of
        cand = np.isin(pix, miss)
        idx = np.nonzero(cand)[0]
        score = bary[idx].min(axis=1)
        order = idx[np.lexsort((face[idx], -score, pix[idx]))]
        _, first = np.unique(pix[order], return_index=True)
        win = order[first]
        out_face[pix[win]] = face[win]
        out_bary[pix[win]] = bary[win]
        still = np.nonzero(out_face < 0)[0]
        if len(still):
            i, j = divmod(int(still[0]), n)
            raise RasterError(f"{len(still)} pixels are not covered by the embedding, first ({i}, {j})")
        logger.warning("%d pixel centers fell between faces and were assigned to the nearest face", len(miss))
    return out_face.reshape(n, n), out_bary.reshape(n, n, 3)


def resolve_channels(mesh, names):
    """Expand channel names into ``(name, kind, values)`` with values of shape (n, c).

    ``xyz`` and ``normals`` give three vertex channels, ``labels`` a one-hot
    face channel per label; other names look up the mesh's signals.
    """
    out = []
    for name in names:
        if name == "xyz":
            for c, ax in enumerate("xyz"):
                out.append((ax, "vertex", mesh.vertices[:, c]))
        elif name == "normals":
            nrm = mesh.vertex_normals
            for c, ax in enumerate("xyz"):
                out.append((f"n{ax}", "vertex", nrm[:, c]))
        elif name == "labels":
            lab = np.asarray(mesh.face_signals["labels"], dtype=np.int64)
            for k in range(int(lab.max()) + 1):
                out.append((f"label_{k}", "face", (lab == k).astype(float)))
        elif name in mesh.vertex_signals:
            val = np.asarray(mesh.vertex_signals[name], dtype=float)
            out.extend(_split(name, "vertex", val))
        elif name in mesh.face_signals:
            val = np.asarray(mesh.face_signals[name], dtype=float)
            out.extend(_split(name, "face", val))
        else:
            raise KeyError(f"unknown channel {name!r}")
    return out


def _split(name, kind, val):
    if val.ndim == 1:
        return [(name, kind, val)]
    return [(f"{name}_{c}", kind, val[:, c]) for c in range(val.shape[1])]


def rasterize(cover, emb, signals, n):
    """Toric image of the named ``signals`` of ``cover.base`` at resolution ``n``."""
    face, bary = locate_pixels(emb.torus_uv, n)
    chans = resolve_channels(cover.base, signals) if signals and isinstance(signals[0], str) else list(signals)
    base_face = cover.psi_face[face]
    corners = cover.base.faces[base_face]
    data = np.empty((len(chans), n, n))
    for c, (_, kind, val) in enumerate(chans):
        if kind == "vertex":
            data[c] = np.einsum("ijk,ijk->ij", val[corners], bary)
        else:
            data[c] = val[base_face]
    return ToricImage(data=data, names=tuple(ch[0] for ch in chans), face=face, bary=bary)


def bilinear_sample(data, uv):
    data = np.asarray(data)
    n = data.shape[-1]
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    x = uv[:, 0] * n - 0.5
    y = uv[:, 1] * n - 0.5
    j0 = np.floor(x).astype(np.int64)
    i0 = np.floor(y).astype(np.int64)
    fx = (x - j0)[None, :]
    fy = (y - i0)[None, :]
    j0, i0 = np.mod(j0, n), np.mod(i0, n)
    j1, i1 = np.mod(j0 + 1, n), np.mod(i0 + 1, n)
    top = data[:, i0, j0] * (1 - fx) + data[:, i0, j1] * fx
    bot = data[:, i1, j0] * (1 - fx) + data[:, i1, j1] * fx
    return (top * (1 - fy) + bot * fy).T


def normalized_area_scale(cover, dist):
    """Area scale relative to the uniform value ``d * area(M)``; 1 means no area distortion."""
    return dist.area_scale / (cover.degree * cover.base.face_areas.sum())


def copy_scores(cover, dist, score="combined"):
    if score not in SCORES:
        raise ValueError(f"score must be one of {SCORES}")
    a = normalized_area_scale(cover, dist)
    area = np.maximum(a, 1.0 / a)
    if score == "area":
        return area
    if score == "angle":
        return dist.angle_distortion.copy()
    return dist.angle_distortion * area


def best_copy(cover, emb, score="combined", dist=None):
    """Per original face, the torus face of its least distorted copy."""
    dist = compute_distortion(cover, emb) if dist is None else dist
    s = copy_scores(cover, dist, score)
    t = np.arange(len(s))
    order = np.lexsort((t, s, cover.psi_face))
    _, first = np.unique(cover.psi_face[order], return_index=True)
    sel = order[first]
    if len(sel) != cover.base.n_faces:
        raise RasterError("some original faces have no copy")
    return sel


def vertex_copies(cover, emb, selection, score="combined", dist=None):
    """Per original vertex, a (torus face, corner) among its incident selected faces.

    The incident selected face with the lowest score wins, ties to the lowest
    torus face id.
    """
    dist = compute_distortion(cover, emb) if dist is None else dist
    s = copy_scores(cover, dist, score)
    faces = cover.base.faces
    nv = cover.base.n_vertices
    tf = np.repeat(selection, 3)
    corner = np.tile(np.arange(3), len(selection))
    v = faces.reshape(-1)
    order = np.lexsort((tf, s[tf], v))
    _, first = np.unique(v[order], return_index=True)
    win = order[first]
    out_face = np.full(nv, -1, dtype=np.int64)
    out_corner = np.zeros(nv, dtype=np.int64)
    out_face[v[win]] = tf[win]
    out_corner[v[win]] = corner[win]
    return out_face, out_corner


def pullback_vertex_samples(img, cover, emb, selection, score="combined", dist=None):
    """Sample every channel at each original vertex's selected UV location; (n_vertices, C)."""
    tf, corner = vertex_copies(cover, emb, selection, score, dist)
    uv = emb.uv[emb.faces[tf, corner]]
    return img.sample(uv)


def pushforward_labels(img, cover, emb, dist=None, return_scores=False):
    """Per original face, argmax of the copy logits averaged with UV-area weights.

    A copy's UV area is inversely proportional to its area scale, so less
    stretched copies count more.
    """
    dist = compute_distortion(cover, emb) if dist is None else dist
    cent = emb.torus_uv.mean(axis=1)
    logits = img.sample(cent)
    w = 1.0 / dist.area_scale
    nf = cover.base.n_faces
    acc = np.zeros((nf, logits.shape[1]))
    np.add.at(acc, cover.psi_face, logits * w[:, None])
    wsum = np.bincount(cover.psi_face, weights=w, minlength=nf)
    avg = acc / wsum[:, None]
    labels = np.argmax(avg, axis=1)
    return (labels, avg) if return_scores else labels


@dataclass
class DistortionReport:
    bin_edges: np.ndarray
    histograms: dict
    percentiles: dict

    def to_json(self):
        return {
            "bins": {"count": HIST_BINS, "log10_range": list(HIST_RANGE)},
            "histograms": {k: v.tolist() for k, v in self.histograms.items()},
            "percentiles": self.percentiles,
        }


def distortion_report(cover, emb, selection, dist=None):
    """Log10 histograms and percentiles of area scale and angle distortion.

    Area scale is normalized by ``d * area(M)`` so that 1 means the copy has
    exactly its fair share of the square.
    """
    dist = compute_distortion(cover, emb) if dist is None else dist
    area = normalized_area_scale(cover, dist)
    sets = {
        "area_scale_all": area,
        "angle_distortion_all": dist.angle_distortion,
        "area_scale_best": area[selection],
        "angle_distortion_best": dist.angle_distortion[selection],
    }
    edges = np.linspace(*HIST_RANGE, HIST_BINS + 1)
    hist, pct = {}, {}
    for name, val in sets.items():
        lv = np.clip(np.log10(val), HIST_RANGE[0], HIST_RANGE[1])
        hist[name] = np.histogram(lv, bins=edges)[0]
        pct[name] = {f"p{p}": float(np.percentile(val, p)) for p in PERCENTILES}
    return DistortionReport(edges, hist, pct)


def save_raw(path, img):
    n = img.resolution
    with open(path, "wb") as fh:
        fh.write(f"TORIC {n} {len(img.names)} {' '.join(img.names)}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def load_raw(path):
    with open(path, "rb") as fh:
        head = fh.readline().decode("ascii").split()
        if not head or head[0] != "TORIC":
            raise ValueError(f"{path}: not a toric image")
        n, c = int(head[1]), int(head[2])
        names = tuple(head[3 : 3 + c])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != c * n * n:
        raise ValueError(f"{path}: expected {c * n * n} floats, found {data.size}")
    return ToricImage(data=data.reshape(c, n, n).astype(float), names=names)


_PROV = np.dtype([("face", "<u4"), ("b0", "<f4"), ("b1", "<f4")])


def save_provenance(path, img):
    rec = np.empty(img.face.size, dtype=_PROV)
    rec["face"] = img.face.ravel()
    rec["b0"] = img.bary[..., 0].ravel()
    rec["b1"] = img.bary[..., 1].ravel()
    rec.tofile(path)


def load_provenance(path, n):
    rec = np.fromfile(path, dtype=_PROV)
    if rec.size != n * n:
        raise ValueError(f"{path}: expected {n * n} records")
    face = rec["face"].astype(np.int64).reshape(n, n)
    b0 = rec["b0"].astype(float).reshape(n, n)
    b1 = rec["b1"].astype(float).reshape(n, n)
    return face, np.stack([b0, b1, 1.0 - b0 - b1], axis=-1)


def save_png(path, plane):
    """Min-max normalized 8-bit preview (lossy)."""
    from PIL import Image

    p = np.asarray(plane, dtype=float)
    lo, hi = p.min(), p.max()
    q = np.zeros_like(p) if hi <= lo else (p - lo) / (hi - lo)
    # row 0 is v near 0; flip so v points up in the preview
    Image.fromarray(np.round(q[::-1] * 255).astype(np.uint8)).save(path)
