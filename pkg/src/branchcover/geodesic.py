"""Graph geodesics on meshes: farthest point sampling and disjoint cut paths.

Distances are shortest paths in the edge graph weighted by Euclidean edge
length.  Every tie is broken towards the lowest vertex index.
"""

import heapq
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .mesh import MeshError, TriangleMesh, validate_genus_zero

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CutPathSet:
    """``k`` edge paths from ``base_vertex`` to the branch vertices.

    Paths are listed in counter-clockwise order around ``base_vertex``; that
    is the order in which gluing permutations are applied.
    """

    base_vertex: int
    branch_vertices: tuple
    paths: tuple

    def __post_init__(self):
        if len(self.paths) != len(self.branch_vertices):
            raise ValueError("one path per branch vertex is required")
        if len(set(self.branch_vertices)) != len(self.branch_vertices):
            raise ValueError("branch vertices must be distinct")
        if self.base_vertex in self.branch_vertices:
            raise ValueError("base vertex must differ from the branch vertices")
        seen = {}
        for i, p in enumerate(self.paths):
            if p[0] != self.base_vertex or p[-1] != self.branch_vertices[i]:
                raise ValueError(f"path {i} does not run from the base to branch vertex {self.branch_vertices[i]}")
            if len(set(p)) != len(p):
                raise ValueError(f"path {i} is not simple")
            for v in p[1:]:
                if v in seen:
                    raise ValueError(f"paths {seen[v]} and {i} share vertex {v}")
                seen[v] = i

    @property
    def k(self):
        return len(self.paths)

    def edges(self):
        """All cut edges as ``(path index, u, w)`` with ``u`` closer to the base."""
        return [(i, p[j], p[j + 1]) for i, p in enumerate(self.paths) for j in range(len(p) - 1)]


def geodesic_distances(mesh, sources):
    """Multi-source graph distances (minimum over ``sources``)."""
    d = dijkstra(mesh.edge_graph, directed=False, indices=np.atleast_1d(sources), min_only=True)
    return np.asarray(d)


def farthest_point_sample(mesh, k, seed_vertex=0):
    """Greedy farthest point sampling starting from ``seed_vertex``."""
    n = mesh.n_vertices
    if k < 1 or k > n:
        raise ValueError(f"cannot sample {k} points from a mesh with {n} vertices")
    if not 0 <= seed_vertex < n:
        raise ValueError(f"seed vertex {seed_vertex} out of range")
    g = mesh.edge_graph
    samples = [int(seed_vertex)]
    mind = dijkstra(g, directed=False, indices=seed_vertex)
    for _ in range(k - 1):
        nxt = int(np.argmax(mind))
        samples.append(nxt)
        mind = np.minimum(mind, dijkstra(g, directed=False, indices=nxt))
    return samples


def default_base_vertex(mesh, branch_vertices):
    """Vertex maximizing the geodesic distance to the nearest branch vertex."""
    d = geodesic_distances(mesh, list(branch_vertices))
    return int(np.argmax(d))


def _shortest_path(graph, source, target, blocked):
    """Dijkstra from ``source`` to ``target`` skipping ``blocked`` vertices.

    Heap entries are ``(distance, vertex)`` so equal distances pop the lowest
    vertex first; predecessors only change on strict improvement.
    """
    indptr, indices, data = graph.indptr, graph.indices, graph.data
    dist = {source: 0.0}
    pred = {source: -1}
    done = set()
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == target:
            path = [v]
            while pred[path[-1]] != -1:
                path.append(pred[path[-1]])
            return path[::-1]
        for idx in range(indptr[v], indptr[v + 1]):
            u = int(indices[idx])
            if u in done or (u in blocked and u != target):
                continue
            nd = d + data[idx]
            if nd < dist.get(u, np.inf):
                dist[u] = nd
                pred[u] = v
                heapq.heappush(heap, (nd, u))
    return None


def split_edges(mesh, edges):
    """Bisect the given edges, splitting both adjacent faces.

    New vertices sit at edge midpoints and are appended after the existing
    ones, so geometry and original indices are preserved.  Returns the refined
    mesh (unchecked, without signals) and the parent face of every new face.
    """
    verts = list(mesh.vertices)
    faces = [list(f) for f in mesh.faces]
    parent = list(range(mesh.n_faces))
    owner = {}
    for f, tri in enumerate(faces):
        for j in range(3):
            owner[(tri[j], tri[(j + 1) % 3])] = f
    for x, y in edges:
        fa, fb = owner.get((x, y)), owner.get((y, x))
        if fa is None or fb is None:
            continue
        m = len(verts)
        verts.append(0.5 * (verts[x] + verts[y]))
        for f, (a, b) in ((fa, (x, y)), (fb, (y, x))):
            tri = faces[f]
            j = tri.index(a)
            c = tri[(j + 2) % 3]
            faces[f] = [a, m, c]
            faces.append([m, b, c])
            parent.append(parent[f])
            g = len(faces) - 1
            del owner[(a, b)]
            owner[(a, m)] = f
            owner[(m, c)] = f
            owner[(c, a)] = f
            owner[(m, b)] = g
            owner[(b, c)] = g
            owner[(c, m)] = g
    refined = TriangleMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64), check=False)
    return refined, np.asarray(parent, dtype=np.int64)


def _pinch_edges(mesh, blocked, path_edges):
    """Edges whose endpoints are both blocked but which are not path edges."""
    e = mesh.edges
    b = np.zeros(mesh.n_vertices, dtype=bool)
    b[list(blocked)] = True
    cand = e[b[e[:, 0]] & b[e[:, 1]]]
    return [(int(x), int(y)) for x, y in cand if (min(x, y), max(x, y)) not in path_edges]


def disjoint_cut_paths(mesh, base_vertex, branch_vertices, max_rounds=10):
    """Vertex-disjoint edge paths from ``base_vertex`` to every branch vertex.

    Paths are found greedily (farthest branch vertex first) by shortest path
    with already used vertices blocked.  When a branch vertex cannot be
    reached, every non-path edge joining two blocked vertices is bisected and
    the search for that vertex is retried; at most ``max_rounds`` refinement
    rounds are spent in total.  Edges
    joining two branch vertices are bisected up front, since their lifts
    would share both endpoints in the cover.

    Returns the (possibly refined) mesh and a ``CutPathSet`` whose paths are
    in counter-clockwise order around ``base_vertex``, rotated so that the first
    requested branch vertex comes first.  Face signals are carried over to the
    refined mesh by parent face.
    """
    branch_vertices = [int(b) for b in branch_vertices]
    base_vertex = int(base_vertex)
    if base_vertex in branch_vertices:
        raise ValueError("base vertex must differ from all branch vertices")
    if len(set(branch_vertices)) != len(branch_vertices):
        raise ValueError("branch vertices must be distinct")
    validate_genus_zero(mesh)
    work = mesh
    parent = np.arange(mesh.n_faces)
    adjacent = _pinch_edges(work, branch_vertices, set())
    if adjacent:
        work, parent = split_edges(work, adjacent)
    d0 = geodesic_distances(work, base_vertex)
    order = sorted(range(len(branch_vertices)), key=lambda i: (-d0[branch_vertices[i]], branch_vertices[i]))
    blocked = set(branch_vertices) | {base_vertex}
    path_edges = set()
    paths = {}
    rounds = 0
    for i in order:
        target = branch_vertices[i]
        while True:
            p = _shortest_path(work.edge_graph, base_vertex, target, blocked)
            if p is not None:
                break
            if rounds == max_rounds:
                raise MeshError(
                    f"no disjoint path to branch vertex {target} after {max_rounds} refinement rounds", "vertex", target
                )
            # found paths keep their edges, so they stay valid in the refined mesh
            pinch = _pinch_edges(work, blocked, path_edges)
            if not pinch:
                raise MeshError(f"branch vertex {target} is unreachable", "vertex", target)
            logger.info("cut paths blocked at branch vertex %d; splitting %d edges", target, len(pinch))
            work, sub_parent = split_edges(work, pinch)
            parent = parent[sub_parent]
            rounds += 1
        paths[i] = p
        blocked.update(p)
        path_edges.update((min(a, b), max(a, b)) for a, b in zip(p[:-1], p[1:]))
    ring = work.one_ring(base_vertex)
    pos = {v: j for j, v in enumerate(ring)}
    k = len(branch_vertices)
    ccw = sorted(range(k), key=lambda i: pos[paths[i][1]])
    start = ccw.index(0)
    ccw = ccw[start:] + ccw[:start]
    if work is not mesh:
        fs = {name: np.asarray(val)[parent] for name, val in mesh.face_signals.items()}
        work = TriangleMesh(work.vertices, work.faces, {}, fs, check=True)
    cuts = CutPathSet(
        base_vertex=base_vertex,
        branch_vertices=tuple(branch_vertices[i] for i in ccw),
        paths=tuple(tuple(int(v) for v in paths[i]) for i in ccw),
    )
    return work, cuts
