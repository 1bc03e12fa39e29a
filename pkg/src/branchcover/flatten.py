"""Cut the torus along two generators and flatten it onto the unit square.

Square layout: loop L1 runs along the bottom/top edges, L2 along the
left/right edges.  A vertex of L1 has a *left* copy (faces on the left of the
loop direction, bottom edge) and a *right* copy (top edge), so right - left is
(0, 1).  For L2 the left copy is on the right edge: left - right is (1, 0).
"""

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra, minimum_spanning_tree
from scipy.sparse.linalg import splu

from ._topology import boundary_loops, corner_wedges, undirected_edges
from .mesh import MeshError, TriangleMesh, euler_characteristic, triangle_areas

logger = logging.getLogger(__name__)

L1, L2 = 0, 1
CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
TWIN_OFFSET = {L1: np.array([0.0, 1.0]), L2: np.array([1.0, 0.0])}
TWIN_TOL = 1e-9
AREA_TOL = 1e-6


class FlattenError(RuntimeError):
    """Numerical failure of the embedding; ``faces`` lists flipped faces."""

    def __init__(self, message, faces=()):
        super().__init__(message)
        self.faces = list(faces)


@dataclass(eq=False)
class TorusCut:
    """The torus cut open along L1 and L2.

    ``twin_pairs[t] = (p, q)`` with ``uv[q] - uv[p] == TWIN_OFFSET[twin_tags[t]]``.
    ``corner_copies`` lists the four copies of the loops' common vertex in the
    order (0,0), (1,0), (1,1), (0,1).  Disk face ``f`` is torus face ``f``.
    """

    disk: TriangleMesh
    origin_vertex: np.ndarray
    loops: tuple
    loop_tags: dict
    corner_copies: tuple
    twin_pairs: np.ndarray
    twin_tags: np.ndarray
    torus: TriangleMesh = field(repr=False, default=None)

    @property
    def intersection_vertex(self):
        return self.loops[0][0]


def _torus_of(obj):
    if isinstance(obj, TriangleMesh):
        return obj, 0
    root = 0
    if getattr(obj, "base_vertex", None) is not None:
        pre = np.nonzero(obj.psi_vertex == obj.base_vertex)[0]
        if len(pre):
            root = int(pre[0])
    return obj.torus, root


def _tree_path(pred, v):
    out = [v]
    while pred[out[-1]] >= 0:
        out.append(int(pred[out[-1]]))
    return out


def _fundamental_cycle(pred, u, w):
    """Simple cycle ``lca -> ... -> u -> w -> ... -> lca`` through tree paths."""
    pu = _tree_path(pred, u)
    pw = _tree_path(pred, w)
    on_w = set(pw)
    lca = next(x for x in pu if x in on_w)
    up = pu[: pu.index(lca) + 1][::-1]
    down = pw[: pw.index(lca)]
    return up + down


def _tree_cotree_leftovers(torus, root):
    """Shortest-path tree, maximum-length cotree; returns the leftover edges."""
    edges, he_edge = undirected_edges(torus.faces)
    g = torus.edge_graph
    dist, pred = dijkstra(g, directed=False, indices=root, return_predecessors=True)
    pred = np.where(pred < 0, -1, pred)
    n = torus.n_vertices
    child = np.arange(n)
    in_tree = np.zeros(len(edges), dtype=bool)
    has = pred >= 0
    lo = np.minimum(child[has], pred[has])
    hi = np.maximum(child[has], pred[has])
    tree_ids = np.searchsorted(edges[:, 0] * n + edges[:, 1], lo * n + hi)
    in_tree[tree_ids] = True
    length = np.linalg.norm(torus.vertices[edges[:, 0]] - torus.vertices[edges[:, 1]], axis=1)
    cyc = dist[edges[:, 0]] + dist[edges[:, 1]] + length
    # dual edges: faces on both sides of every non-tree edge
    he = torus.halfedges
    twin = he.twins()
    h = np.arange(len(twin))
    first = h < twin
    f1, f2 = h[first] // 3, twin[first] // 3
    eid = he_edge[h[first]]
    keep = ~in_tree[eid]
    f1, f2, eid = f1[keep], f2[keep], eid[keep]
    # maximum spanning tree on cycle length; keep one dual edge per face pair
    weight = cyc.max() + 1.0 - cyc[eid]
    order = np.lexsort((eid, weight))
    a, b = np.minimum(f1, f2)[order], np.maximum(f1, f2)[order]
    _, first_pair = np.unique(a * torus.n_faces + b, return_index=True)
    sel = order[np.sort(first_pair)]
    m = sparse.coo_matrix((weight[sel], (f1[sel], f2[sel])), shape=(torus.n_faces,) * 2).tocsr()
    mst = minimum_spanning_tree(m).tocoo()
    cot_pairs = set(zip(np.minimum(mst.row, mst.col).tolist(), np.maximum(mst.row, mst.col).tolist()))
    in_cotree = np.zeros(len(edges), dtype=bool)
    for x, y, e in zip(np.minimum(f1, f2)[sel], np.maximum(f1, f2)[sel], eid[sel]):
        if (int(x), int(y)) in cot_pairs:
            in_cotree[e] = True
    left = np.nonzero(~in_tree & ~in_cotree)[0]
    return edges, pred, cyc, left


def _left_right_wedges(faces, he, wedge, loop):
    """Per loop vertex, (left wedge, right wedge) relative to the loop direction."""
    out = []
    n = len(loop)
    for i in range(n):
        v, nx = loop[i], loop[(i + 1) % n]
        h = int(he.find(v, nx))
        left = int(wedge[h])
        h2 = int(he.find(nx, v))
        # corner of v in the face across the edge is the head of h2
        f, j = h2 // 3, h2 % 3
        right = int(wedge[3 * f + (j + 1) % 3])
        out.append((left, right))
    return out


def _second_loop(torus, l1):
    """Shortest loop crossing ``l1`` exactly once, trying every vertex of ``l1``."""
    he = torus.halfedges
    cut = list(zip(l1, l1[1:] + l1[:1]))
    wedge, wedge_vertex = corner_wedges(torus.faces, cut, torus.n_vertices)
    ann_faces = wedge.reshape(-1, 3)
    ann = TriangleMesh(torus.vertices[wedge_vertex], ann_faces, check=False)
    on_l1 = np.zeros(len(wedge_vertex), dtype=bool)
    on_l1[np.isin(wedge_vertex, l1)] = True
    sides = _left_right_wedges(torus.faces, he, wedge, l1)
    g = ann.edge_graph.tocsr()
    for i, v in enumerate(l1):
        src, dst = sides[i]
        keep = ~on_l1
        keep[[src, dst]] = True
        mask = sparse.diags(keep.astype(float))
        sub = (mask @ g @ mask).tocsr()
        sub.eliminate_zeros()
        dist, pred = dijkstra(sub, directed=False, indices=src, return_predecessors=True)
        if not np.isfinite(dist[dst]):
            continue
        path = _tree_path(np.where(pred < 0, -1, pred), dst)[::-1]
        if any(on_l1[p] for p in path[1:-1]) or len(path) < 3:
            continue
        loop = [int(wedge_vertex[p]) for p in path[:-1]]
        return i, loop
    return None


def _rotate(loop, start):
    i = loop.index(start)
    return loop[i:] + loop[:i]


def cut_torus_generators(cover):
    """Cut a toric cover (or a bare torus mesh) into a disk along two generators."""
    torus, root = _torus_of(cover)
    chi = euler_characteristic(torus)
    if chi != 0:
        raise MeshError(f"cannot cut generators of a surface with Euler characteristic {chi}", "euler", chi)
    edges, pred, cyc, left = _tree_cotree_leftovers(torus, root)
    if len(left) != 2:
        raise MeshError(f"tree-cotree left {len(left)} edges, expected 2", "cut")
    choices = sorted(left.tolist(), key=lambda e: (cyc[e], e))
    for e1 in choices:
        l1 = _fundamental_cycle(pred, int(edges[e1, 0]), int(edges[e1, 1]))
        found = _second_loop(torus, l1)
        if found is None:
            logger.info("no single-crossing second loop for leftover edge %d", e1)
            continue
        i, l2 = found
        l1 = _rotate(l1, l1[i])
        return _cut_along(torus, l1, l2)
    raise MeshError("could not find two generator loops meeting in a single vertex", "cut")


def _cut_along(torus, l1, l2):
    he = torus.halfedges
    c1 = list(zip(l1, l1[1:] + l1[:1]))
    c2 = list(zip(l2, l2[1:] + l2[:1]))
    wedge, wedge_vertex = corner_wedges(torus.faces, c1 + c2, torus.n_vertices)
    faces = wedge.reshape(-1, 3)
    disk = TriangleMesh(torus.vertices[wedge_vertex], faces, check=False)
    chi = euler_characteristic(disk)
    loops = boundary_loops(faces, disk.n_vertices)
    if chi != 1 or len(loops) != 1:
        raise MeshError(f"generator cut is not a disk (chi={chi}, {len(loops)} boundary loops)", "cut")
    v = l1[0]
    n1, p1, n2, p2 = l1[1], l1[-1], l2[1], l2[-1]

    def wedge_at(a, b, at_tail=True):
        h = int(he.find(a, b))
        return int(wedge[h]) if at_tail else int(wedge[3 * (h // 3) + (h % 3 + 1) % 3])

    corners = (wedge_at(v, n1), wedge_at(v, n2), wedge_at(v, p1), wedge_at(v, p2))
    if len(set(corners)) != 4 or np.count_nonzero(wedge_vertex == v) != 4:
        raise MeshError("loop intersection does not split into four corners", "vertex", v)
    pairs, tags = [], []
    for tag, loop in ((L1, l1), (L2, l2)):
        sides = _left_right_wedges(torus.faces, he, wedge, loop)
        for left, right in sides[1:]:
            pairs.append((left, right) if tag == L1 else (right, left))
            tags.append(tag)
    loop_tags = {}
    for tag, cut in ((L1, c1), (L2, c2)):
        for a, b in cut:
            loop_tags[(min(a, b), max(a, b))] = tag
    return TorusCut(
        disk=disk,
        origin_vertex=wedge_vertex,
        loops=(tuple(l1), tuple(l2)),
        loop_tags=loop_tags,
        corner_copies=corners,
        twin_pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
        twin_tags=np.asarray(tags, dtype=np.int64),
        torus=torus,
    )


def cotangent_weights(points, faces):
    """Half-cotangent of each face angle, attached to the opposite edge.

    Returns ``(i, j, w)`` arrays with one entry per face and edge.  Faces too
    thin for a reliable cotangent get weight 1/2 on all three edges, so an
    edge with two such faces has uniform weight 1.
    """
    p = np.asarray(points, dtype=float)
    f = np.asarray(faces, dtype=np.int64)
    ii, jj, ww = [], [], []
    area2 = 2.0 * triangle_areas(p, f)
    scale = np.max(np.linalg.norm(p.max(0) - p.min(0)))
    bad = area2 <= 1e-14 * scale**2
    if bad.any():
        warnings.warn(f"{int(bad.sum())} degenerate faces use uniform weights", RuntimeWarning, stacklevel=2)
    safe = np.where(bad, 1.0, area2)
    for k in range(3):
        a, b, c = f[:, k], f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        e1 = p[b] - p[a]
        e2 = p[c] - p[a]
        cot = np.einsum("ij,ij->i", e1, e2) / safe
        ii.append(b)
        jj.append(c)
        ww.append(np.where(bad, 0.5, 0.5 * cot))
    return np.concatenate(ii), np.concatenate(jj), np.concatenate(ww)


def laplacian(points, faces, n):
    i, j, w = cotangent_weights(points, faces)
    W = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
    return (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()


def assemble_tutte_system(cut):
    """Square sparse system, one row per disk vertex, with a two-column RHS."""
    m = cut.disk.n_vertices
    L = laplacian(cut.disk.vertices, cut.disk.faces, m)
    corners = np.asarray(cut.corner_copies)
    p, q = cut.twin_pairs[:, 0], cut.twin_pairs[:, 1]
    offs = np.array([TWIN_OFFSET[int(t)] for t in cut.twin_tags]).reshape(-1, 2)
    role = np.zeros(m, dtype=np.int8)
    role[corners] = 1
    role[p] = 2
    role[q] = 3
    harmonic = np.nonzero(role == 0)[0]
    boundary = {v for loop in boundary_loops(cut.disk.faces, m) for v in loop}
    if len(harmonic) + 4 + 2 * len(p) != m or boundary != set(np.nonzero(role)[0].tolist()):
        raise MeshError("twin pairs and corners do not partition the boundary", "cut")
    # translation rows live at p, merged harmonic rows at q
    merged = (sparse.csr_matrix(L[p]) + sparse.csr_matrix(L[q])).tocoo()
    harm = L[harmonic].tocoo()
    rows = [harmonic[harm.row], q[merged.row], corners, p, p]
    cols = [harm.col, merged.col, corners, q, p]
    vals = [harm.data, merged.data, np.ones(4), np.ones(len(p)), -np.ones(len(p))]
    A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)).tocsr()
    b = np.zeros((m, 2))
    b[corners] = CORNERS
    b[p] = offs
    return A, b


@dataclass(eq=False)
class FlatEmbedding:
    """UV coordinates of the cut torus; disk face ``f`` is torus face ``f``."""

    uv: np.ndarray
    faces: np.ndarray
    origin_vertex: np.ndarray
    corner_copies: tuple
    twin_pairs: np.ndarray
    twin_tags: np.ndarray
    positions: np.ndarray = field(default=None, repr=False)
    residual: float = float("nan")

    @property
    def torus_uv(self):
        """Per torus face, its three UV corners (an affine chart of the torus)."""
        return self.uv[self.faces]

    @cached_property
    def signed_areas(self):
        t = self.torus_uv
        e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def flipped_faces(self):
        return np.nonzero(self.signed_areas <= 0)[0]

    @property
    def total_area(self):
        return float(self.signed_areas.sum())

    @cached_property
    def face_jacobian(self):
        """Per face, the 2x2 differential UV -> surface in an orthonormal frame of the face."""
        if self.positions is None:
            raise ValueError("embedding has no surface positions attached")
        return face_jacobians(self.positions, self.faces, self.uv)

    def twin_errors(self):
        offs = np.array([TWIN_OFFSET[int(t)] for t in self.twin_tags]).reshape(-1, 2)
        d = self.uv[self.twin_pairs[:, 1]] - self.uv[self.twin_pairs[:, 0]] - offs
        return np.abs(d).max(axis=1) if len(d) else np.zeros(0)


def face_jacobians(positions, faces, uv):
    p = np.asarray(positions, dtype=float)
    a = p[faces[:, 1]] - p[faces[:, 0]]
    b = p[faces[:, 2]] - p[faces[:, 0]]
    la = np.linalg.norm(a, axis=1)
    e1 = a / la[:, None]
    bx = np.einsum("ij,ij->i", b, e1)
    by = np.linalg.norm(b - bx[:, None] * e1, axis=1)
    P = np.zeros((len(faces), 2, 2))
    P[:, 0, 0], P[:, 0, 1], P[:, 1, 1] = la, bx, by
    t = uv[faces]
    Q = np.stack([t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]], axis=2)
    return P @ np.linalg.inv(Q)


def solve_flatten(cut, tolerance=1e-10):
    """Solve the Tutte system and check every embedding invariant."""
    A, b = assemble_tutte_system(cut)
    lu = splu(A.tocsc())
    x = lu.solve(b)
    res = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
    corners = np.asarray(cut.corner_copies)
    x[corners] = CORNERS
    emb = FlatEmbedding(
        uv=x,
        faces=cut.disk.faces,
        origin_vertex=cut.origin_vertex,
        corner_copies=tuple(int(c) for c in corners),
        twin_pairs=cut.twin_pairs,
        twin_tags=cut.twin_tags,
        positions=cut.disk.vertices,
        residual=res,
    )
    if not res <= tolerance:
        raise FlattenError(f"relative residual {res:.3g} exceeds tolerance {tolerance:.3g}")
    tw = emb.twin_errors()
    if len(tw) and tw.max() > TWIN_TOL:
        raise FlattenError(f"twin offsets off by {tw.max():.3g}")
    flipped = emb.flipped_faces
    if len(flipped):
        raise FlattenError(f"{len(flipped)} flipped triangles, first {flipped[:10].tolist()}", flipped)
    if abs(emb.total_area - 1.0) > AREA_TOL:
        raise FlattenError(f"total UV area {emb.total_area:.9f} differs from 1")
    return emb


def flatten(cover, tolerance=1e-10):
    return solve_flatten(cut_torus_generators(cover), tolerance)


@dataclass
class Distortion:
    area_scale: np.ndarray
    angle_distortion: np.ndarray

    def __len__(self):
        return len(self.area_scale)


def compute_distortion(cover, emb):
    """Per torus face ``|det J|`` and ``sigma_max / sigma_min`` of UV -> surface."""
    if emb.positions is None:
        torus, _ = _torus_of(cover)
        emb.positions = torus.vertices[emb.origin_vertex]
    J = emb.face_jacobian
    s = np.linalg.svd(J, compute_uv=False)
    return Distortion(area_scale=np.abs(np.linalg.det(J)), angle_distortion=s[:, 0] / s[:, 1])


def save_embedding(path, emb):
    with open(path, "w") as fh:
        fh.write("# flat embedding: u v torus_vertex\n")
        fh.write(f"vertices {len(emb.uv)}\n")
        for (u, v), t in zip(emb.uv, emb.origin_vertex):
            fh.write(f"{float(u)!r} {float(v)!r} {t}\n")
        fh.write(f"faces {len(emb.faces)}\n")
        for a, b, c in emb.faces:
            fh.write(f"{a} {b} {c}\n")
        fh.write("corners " + " ".join(str(c) for c in emb.corner_copies) + "\n")
        fh.write(f"residual {float(emb.residual)!r}\n")
        fh.write(f"seams {len(emb.twin_pairs)}\n")
        for (p, q), t in zip(emb.twin_pairs, emb.twin_tags):
            fh.write(f"{p} {q} {'L1' if t == L1 else 'L2'}\n")


def load_embedding(path, torus=None):
    with open(path) as fh:
        lines = [l.split() for l in fh if l.strip() and not l.startswith("#")]
    pos = 0
    out = {}
    while pos < len(lines):
        key = lines[pos][0]
        if key in ("vertices", "faces", "seams"):
            n = int(lines[pos][1])
            out[key] = lines[pos + 1 : pos + 1 + n]
            pos += n + 1
        else:
            out[key] = lines[pos][1:]
            pos += 1
    verts = out["vertices"]
    uv = np.array([[float(r[0]), float(r[1])] for r in verts]).reshape(-1, 2)
    origin = np.array([int(r[2]) for r in verts], dtype=np.int64)
    faces = np.array(out["faces"], dtype=np.int64).reshape(-1, 3)
    seams = out.get("seams", [])
    pairs = np.array([[int(r[0]), int(r[1])] for r in seams], dtype=np.int64).reshape(-1, 2)
    tags = np.array([L1 if r[2] == "L1" else L2 for r in seams], dtype=np.int64)
    return FlatEmbedding(
        uv=uv,
        faces=faces,
        origin_vertex=origin,
        corner_copies=tuple(int(c) for c in out["corners"]),
        twin_pairs=pairs,
        twin_tags=tags,
        positions=None if torus is None else torus.vertices[origin],
        residual=float(out.get("residual", ["nan"])[0]),
    )


def save_distortion_csv(path, dist):
    with open(path, "w") as fh:
        fh.write("face,area_scale,angle_distortion\n")
        for f, (a, c) in enumerate(zip(dist.area_scale, dist.angle_distortion)):
            fh.write(f"{f},{float(a)!r},{float(c)!r}\n")
