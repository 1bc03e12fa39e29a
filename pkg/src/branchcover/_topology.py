"""Combinatorial helpers shared by the mesh, cover and flatten modules.

Corners are indexed ``3 * face + j`` where ``j`` is the local position of the
vertex inside the face.  A *wedge* is a maximal fan of corners around one
vertex that are connected through uncut interior edges; cutting a mesh along
a set of edges amounts to giving every wedge its own vertex.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components


class HalfEdges:
    """Sorted lookup table of the directed edges of a triangle list."""

    def __init__(self, faces, n_vertices=None):
        faces = np.asarray(faces, dtype=np.int64)
        self.faces = faces
        self.n_vertices = int(faces.max()) + 1 if n_vertices is None else int(n_vertices)
        self.tail = faces.reshape(-1)
        self.head = faces[:, [1, 2, 0]].reshape(-1)
        keys = self.tail * self.n_vertices + self.head
        self._order = np.argsort(keys, kind="stable")
        self._keys = keys[self._order]

    def find(self, a, b):
        """Half-edge index (3*face + j, edge j runs from corner j to j+1) or -1."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        key = a * self.n_vertices + b
        pos = np.searchsorted(self._keys, key)
        pos = np.minimum(pos, len(self._keys) - 1)
        hit = self._keys[pos] == key
        return np.where(hit, self._order[pos], -1)

    def twins(self):
        return self.find(self.head, self.tail)

    def has_duplicates(self):
        dup = np.nonzero(self._keys[1:] == self._keys[:-1])[0]
        return self._order[dup + 1]


def face_of(halfedge):
    return np.asarray(halfedge) // 3


def corner_wedges(faces, cut_edges=(), n_vertices=None):
    """Group face corners into wedges, treating ``cut_edges`` as boundary.

    Returns ``(wedge_of_corner, wedge_vertex)``: wedge ids are ordered by
    (vertex, smallest corner), so for an uncut closed manifold the wedge ids
    coincide with the vertex ids.
    """
    faces = np.asarray(faces, dtype=np.int64)
    he = HalfEdges(faces, n_vertices)
    n_corner = 3 * len(faces)
    twin = he.twins()
    idx = np.arange(n_corner)
    mask = (twin >= 0) & (idx < twin)
    if len(cut_edges):
        cut = np.asarray(cut_edges, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(cut[:, 0], cut[:, 1])
        hi = np.maximum(cut[:, 0], cut[:, 1])
        cut_keys = np.unique(lo * he.n_vertices + hi)
        a, b = he.tail, he.head
        keys = np.minimum(a, b) * he.n_vertices + np.maximum(a, b)
        pos = np.clip(np.searchsorted(cut_keys, keys), 0, len(cut_keys) - 1)
        mask &= cut_keys[pos] != keys
    h1 = idx[mask]
    h2 = twin[mask]
    # half-edge h = corner j -> corner j+1 of its face
    f1, j1 = h1 // 3, h1 % 3
    f2, j2 = h2 // 3, h2 % 3
    # tail of h1 is head of h2 and vice versa
    c_a1 = 3 * f1 + j1
    c_a2 = 3 * f2 + (j2 + 1) % 3
    c_b1 = 3 * f1 + (j1 + 1) % 3
    c_b2 = 3 * f2 + j2
    rows = np.concatenate([c_a1, c_b1])
    cols = np.concatenate([c_a2, c_b2])
    graph = sparse.coo_matrix(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n_corner, n_corner)
    )
    _, labels = connected_components(graph, directed=False)
    corner_vertex = faces.reshape(-1)
    first = np.full(labels.max() + 1, n_corner, dtype=np.int64)
    np.minimum.at(first, labels, idx)
    order = np.lexsort((first, corner_vertex[first]))
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[labels], corner_vertex[first][order]


def undirected_edges(faces):
    """Unique sorted undirected edges and, per half-edge, its edge id."""
    faces = np.asarray(faces, dtype=np.int64)
    a = faces.reshape(-1)
    b = faces[:, [1, 2, 0]].reshape(-1)
    e = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
    edges, inverse = np.unique(e, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1)


def boundary_loops(faces, n_vertices=None):
    """Boundary half-edges chained into closed loops of vertex ids."""
    he = HalfEdges(faces, n_vertices)
    twin = he.twins()
    bnd = np.nonzero(twin < 0)[0]
    nxt = {}
    for h in bnd:
        t = int(he.tail[h])
        if t in nxt:
            raise ValueError(f"boundary vertex {t} is visited twice")
        nxt[t] = int(he.head[h])
    loops = []
    seen = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        v = nxt[start]
        while v != start:
            loop.append(v)
            seen.add(v)
            v = nxt[v]
        loops.append(loop)
    return loops


class UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb

    def labels(self):
        return np.array([self.find(i) for i in range(len(self.parent))])
