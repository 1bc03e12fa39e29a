"""Triangle mesh container and topological validation."""

import logging
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from ._topology import HalfEdges, corner_wedges, undirected_edges

logger = logging.getLogger(__name__)

DEGENERATE_AREA_TOL = 1e-12


class MeshError(ValueError):
    """Invalid mesh input.  ``element`` names the offending face/edge/vertex."""

    def __init__(self, message, kind=None, element=None):
        super().__init__(message)
        self.kind = kind
        self.element = element


class GenusError(MeshError):
    def __init__(self, chi):
        super().__init__(f"mesh is not genus zero: Euler characteristic {chi} != 2", "genus", None)
        self.chi = chi


def triangle_areas(points, faces):
    """Unsigned areas; works for vertices of any dimension >= 2."""
    p = np.asarray(points, dtype=float)
    f = np.asarray(faces)
    e1 = p[f[:, 1]] - p[f[:, 0]]
    e2 = p[f[:, 2]] - p[f[:, 0]]
    aa = np.einsum("ij,ij->i", e1, e1)
    bb = np.einsum("ij,ij->i", e2, e2)
    ab = np.einsum("ij,ij->i", e1, e2)
    return 0.5 * np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))


class TriangleMesh:
    """Closed, oriented, connected triangle mesh with optional signals.

    Parameters
    ----------
    vertices : array_like, shape (n, D)
        Vertex positions.  ``D`` is 3 for everything read from disk; synthetic
        flat tori use ``D = 4``.
    faces : array_like of int, shape (m, 3)
        Counter-clockwise vertex triples.
    vertex_signals, face_signals : dict, optional
        Named per-vertex / per-face channels.
    check : bool
        Validate closedness, manifoldness, orientation, connectivity and
        non-degeneracy on construction.
    """

    def __init__(self, vertices, faces, vertex_signals=None, face_signals=None, check=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if self.vertices.ndim != 2 or self.vertices.shape[1] < 2:
            raise MeshError("vertices must be an (n, D) array with D >= 2", "vertices")
        self.vertex_signals = {k: np.asarray(v) for k, v in (vertex_signals or {}).items()}
        self.face_signals = {k: np.asarray(v) for k, v in (face_signals or {}).items()}
        for name, val in self.vertex_signals.items():
            if len(val) != self.n_vertices:
                raise MeshError(f"vertex signal {name!r} has {len(val)} rows, expected {self.n_vertices}")
        for name, val in self.face_signals.items():
            if len(val) != self.n_faces:
                raise MeshError(f"face signal {name!r} has {len(val)} rows, expected {self.n_faces}")
        if check:
            self.validate()

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def edges(self):
        return undirected_edges(self.faces)[0]

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def halfedges(self):
        return HalfEdges(self.faces, self.n_vertices)

    @cached_property
    def face_areas(self):
        return triangle_areas(self.vertices, self.faces)

    @cached_property
    def bbox_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def face_normals(self):
        v = self.vertices[:, :3]
        n = np.cross(v[self.faces[:, 1]] - v[self.faces[:, 0]], v[self.faces[:, 2]] - v[self.faces[:, 0]])
        return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)

    @cached_property
    def vertex_normals(self):
        v = self.vertices[:, :3]
        n = np.cross(v[self.faces[:, 1]] - v[self.faces[:, 0]], v[self.faces[:, 2]] - v[self.faces[:, 0]])
        out = np.zeros((self.n_vertices, 3))
        for j in range(3):
            np.add.at(out, self.faces[:, j], n)
        return out / np.maximum(np.linalg.norm(out, axis=1, keepdims=True), 1e-300)

    @cached_property
    def edge_graph(self):
        """Symmetric sparse adjacency weighted by Euclidean edge length."""
        e = self.edges
        w = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        n = self.n_vertices
        g = sparse.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
        return g.tocsr()

    def neighbors(self, v):
        g = self.edge_graph
        return g.indices[g.indptr[v] : g.indptr[v + 1]]

    def one_ring(self, v):
        """Neighbours of ``v`` in counter-clockwise order (closed meshes)."""
        faces = self.faces
        rows = np.nonzero((faces == v).any(axis=1))[0]
        nxt = {}
        for f in rows:
            j = int(np.nonzero(faces[f] == v)[0][0])
            nxt[int(faces[f, (j + 1) % 3])] = int(faces[f, (j + 2) % 3])
        start = min(nxt)
        ring = [start]
        while nxt[ring[-1]] != start:
            ring.append(nxt[ring[-1]])
        return ring

    def euler_characteristic(self):
        return euler_characteristic(self)

    def validate(self):
        validate_closed_manifold(self.vertices, self.faces)

    def with_signals(self, vertex_signals=None, face_signals=None):
        vs = dict(self.vertex_signals)
        vs.update(vertex_signals or {})
        fs = dict(self.face_signals)
        fs.update(face_signals or {})
        return TriangleMesh(self.vertices, self.faces, vs, fs, check=False)


def euler_characteristic(mesh):
    """|V| - |E| + |F| with E the derived undirected edge set."""
    return int(mesh.n_vertices - mesh.n_edges + mesh.n_faces)


def validate_genus_zero(mesh):
    chi = euler_characteristic(mesh)
    if chi != 2:
        raise GenusError(chi)


def validate_closed_manifold(vertices, faces, closed=True):
    """Raise ``MeshError`` naming the first offending element."""
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    n = len(vertices)
    if len(faces) == 0:
        raise MeshError("mesh has no faces", "faces")
    bad = np.nonzero((faces < 0) | (faces >= n))[0]
    if len(bad):
        raise MeshError(f"face {bad[0]} references a vertex index out of range", "face", int(bad[0]))
    rep = np.nonzero((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2]))[0]
    if len(rep):
        raise MeshError(f"face {rep[0]} repeats a vertex index", "face", int(rep[0]))
    diag = np.linalg.norm(vertices.max(0) - vertices.min(0))
    areas = triangle_areas(vertices, faces)
    tiny = np.nonzero(areas < DEGENERATE_AREA_TOL * diag**2)[0]
    if len(tiny):
        raise MeshError(f"face {tiny[0]} is degenerate (area {areas[tiny[0]]:.3g})", "face", int(tiny[0]))
    he = HalfEdges(faces, n)
    dup = he.has_duplicates()
    if len(dup):
        h = int(dup[0])
        raise MeshError(
            f"edge ({he.tail[h]}, {he.head[h]}) is non-manifold or inconsistently oriented (face {h // 3})",
            "edge",
            (int(he.tail[h]), int(he.head[h])),
        )
    if closed:
        open_he = np.nonzero(he.twins() < 0)[0]
        if len(open_he):
            h = int(open_he[0])
            raise MeshError(
                f"edge ({he.tail[h]}, {he.head[h]}) lies on an open boundary (face {h // 3})",
                "edge",
                (int(he.tail[h]), int(he.head[h])),
            )
    _, wedge_vertex = corner_wedges(faces, n_vertices=n)
    counts = np.bincount(wedge_vertex, minlength=n)
    pinched = np.nonzero(counts > 1)[0]
    if len(pinched):
        raise MeshError(f"vertex {pinched[0]} is non-manifold (its faces form several fans)", "vertex", int(pinched[0]))
    unused = np.nonzero(counts == 0)[0]
    if len(unused):
        raise MeshError(f"vertex {unused[0]} is not referenced by any face", "vertex", int(unused[0]))
    twin = he.twins()
    has = twin >= 0
    f1 = np.arange(len(twin))[has] // 3
    f2 = twin[has] // 3
    adj = sparse.coo_matrix((np.ones(len(f1)), (f1, f2)), shape=(len(faces), len(faces)))
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp > 1:
        other = int(np.nonzero(labels != labels[0])[0][0])
        raise MeshError(f"mesh is disconnected: face {other} is not reachable from face 0", "face", other)
