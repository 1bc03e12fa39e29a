"""Cut a sphere-type mesh into a disk and glue ``d`` copies into a torus.

Boundary naming: walking a cut path from the base vertex towards its branch
point, the face on the right carries the A side and the face on the left the
B side.  Walking the disk boundary counter-clockwise, the A edge is the one
leaving the branch point.  ``glue`` stitches side A of copy ``j`` to side B of
copy ``sigma(j)``; with the paths in counter-clockwise order around the base
vertex, the loop around the base vertex picks up ``sigma_1 * ... * sigma_k``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from ._topology import boundary_loops, corner_wedges
from .geodesic import CutPathSet
from .mesh import MeshError, TriangleMesh, euler_characteristic, validate_closed_manifold
from .monodromy import GluingInstructions

logger = logging.getLogger(__name__)


class GluingError(MeshError):
    pass


@dataclass(eq=False)
class DiskMesh:
    """A sphere-type mesh cut open along the paths of a ``CutPathSet``.

    ``boundary_arcs[i]`` is ``(A, B)`` for path ``i``: two equally long lists of
    directed disk edges ``(x, y)``, where ``x`` is nearer the base vertex, and
    ``A[j]``, ``B[j]`` are the two copies of the ``j``-th path edge.
    """

    mesh: TriangleMesh
    origin_vertex: np.ndarray
    boundary_arcs: list
    cuts: CutPathSet
    source: TriangleMesh
    branch_disk_vertices: list

    @property
    def k(self):
        return len(self.boundary_arcs)


def cut_to_disk(mesh, cuts):
    """Cut ``mesh`` along every path of ``cuts``; Euler characteristic becomes 1."""
    he = mesh.halfedges
    edges = cuts.edges()
    if edges:
        u = np.array([e[1] for e in edges])
        w = np.array([e[2] for e in edges])
        fwd = he.find(u, w)
        bwd = he.find(w, u)
        missing = np.nonzero((fwd < 0) | (bwd < 0))[0]
        if len(missing):
            _, a, b = edges[missing[0]]
            raise MeshError(f"cut path {edges[missing[0]][0]} uses ({a}, {b}), which is not a mesh edge", "edge", (a, b))
    CutPathSet(cuts.base_vertex, tuple(cuts.branch_vertices), tuple(cuts.paths))
    cut_edges = np.array([(a, b) for _, a, b in edges], dtype=np.int64).reshape(-1, 2)
    wedge, wedge_vertex = corner_wedges(mesh.faces, cut_edges, mesh.n_vertices)
    faces = wedge.reshape(-1, 3)
    disk = TriangleMesh(mesh.vertices[wedge_vertex], faces, check=False)
    arcs = []
    for i, path in enumerate(cuts.paths):
        side_a, side_b = [], []
        for x, y in zip(path[:-1], path[1:]):
            h_left = int(he.find(x, y))
            h_right = int(he.find(y, x))
            fl, fr = h_left // 3, h_right // 3
            jl, jr = h_left % 3, h_right % 3
            # left face: corner jl holds x, jl+1 holds y; right face: jr holds y
            side_b.append((int(wedge[3 * fl + jl]), int(wedge[3 * fl + (jl + 1) % 3])))
            side_a.append((int(wedge[3 * fr + (jr + 1) % 3]), int(wedge[3 * fr + jr])))
        arcs.append((side_a, side_b))
    branch_disk = []
    for b in cuts.branch_vertices:
        ws = np.unique(wedge[mesh.faces.reshape(-1) == b])
        if len(ws) != 1:
            raise MeshError(f"branch vertex {b} was split by the cut", "vertex", int(b))
        branch_disk.append(int(ws[0]))
    out = DiskMesh(disk, wedge_vertex, arcs, cuts, mesh, branch_disk)
    chi = euler_characteristic(disk)
    loops = boundary_loops(faces, disk.n_vertices)
    if cuts.k and (chi != 1 or len(loops) != 1):
        raise MeshError(f"cutting did not produce a disk (chi={chi}, {len(loops)} boundary loops)", "cut")
    return out


@dataclass(eq=False)
class ToricCover:
    """The glued surface ``torus`` and the covering map back to ``base``.

    Torus faces are laid out copy-major: face ``c * F + f`` is copy ``c`` of
    original face ``f``.
    """

    torus: TriangleMesh
    psi_vertex: np.ndarray
    psi_face: np.ndarray
    copy_of_face: np.ndarray
    branch_preimages: list
    base: TriangleMesh
    degree: int
    sigma: GluingInstructions = None
    vertex_copy: np.ndarray = None
    branch_vertices: tuple = ()
    base_vertex: int = None
    disk: DiskMesh = field(default=None, repr=False)

    @property
    def euler_characteristic(self):
        return euler_characteristic(self.torus)

    @property
    def k(self):
        return len(self.branch_vertices)


def glue(disk, sigma, require_torus=True):
    """Stitch ``d`` copies of ``disk`` following ``sigma``.

    Returns a ``ToricCover``.  Its Euler characteristic is
    ``2 d - sum_i (d - l_i)``; a nonzero value raises ``GluingError`` when
    ``require_torus`` is set.
    """
    if not isinstance(sigma, GluingInstructions):
        sigma = GluingInstructions(tuple(sigma))
    d = sigma.degree
    if sigma.k != disk.k:
        raise ValueError(f"{sigma.k} permutations for {disk.k} branch points")
    m = disk.mesh.n_vertices
    rows, cols = [], []
    copies = np.arange(d)
    for i, (side_a, side_b) in enumerate(disk.boundary_arcs):
        target = np.array(sigma.sigmas[i].arr)
        a = np.asarray(side_a, dtype=np.int64).reshape(-1, 2)
        b = np.asarray(side_b, dtype=np.int64).reshape(-1, 2)
        for col in range(2):
            rows.append((copies[:, None] * m + a[None, :, col]).ravel())
            cols.append((target[:, None] * m + b[None, :, col]).ravel())
    n_nodes = d * m
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    graph = sparse.coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n_nodes, n_nodes))
    _, comp = connected_components(graph, directed=False)
    # relabel components by their smallest (copy-major) node
    first = np.full(comp.max() + 1, n_nodes, dtype=np.int64)
    np.minimum.at(first, comp, np.arange(n_nodes))
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    node_vertex = rank[comp]
    rep = first[order]
    n_faces = disk.mesh.n_faces
    faces = (np.arange(d)[:, None, None] * m + disk.mesh.faces[None, :, :]).reshape(-1, 3)
    torus_faces = node_vertex[faces]
    psi_vertex = disk.origin_vertex[rep % m]
    vertex_copy = rep // m
    base = disk.source
    torus = TriangleMesh(base.vertices[psi_vertex], torus_faces, check=False)
    chi = euler_characteristic(torus)
    try:
        validate_closed_manifold(torus.vertices, torus.faces)
    except MeshError as exc:
        raise GluingError(f"gluing produced an invalid surface: {exc}", exc.kind, exc.element) from exc
    if require_torus and chi != 0:
        raise GluingError(f"glued surface has Euler characteristic {chi}, not a torus", "euler", chi)
    branch_preimages = []
    for wb in disk.branch_disk_vertices:
        nodes = copies * m + wb
        tv, counts = np.unique(node_vertex[nodes], return_counts=True)
        branch_preimages.append([(int(t), int(n)) for t, n in zip(tv, counts)])
    return ToricCover(
        torus=torus,
        psi_vertex=psi_vertex,
        psi_face=np.tile(np.arange(n_faces), d),
        copy_of_face=np.repeat(np.arange(d), n_faces),
        branch_preimages=branch_preimages,
        base=base,
        degree=d,
        sigma=sigma,
        vertex_copy=vertex_copy,
        branch_vertices=tuple(disk.cuts.branch_vertices),
        base_vertex=disk.cuts.base_vertex,
        disk=disk,
    )


def build_cover(mesh, cuts, sigma, require_torus=True):
    return glue(cut_to_disk(mesh, cuts), sigma, require_torus=require_torus)


def ramification_indices(cover):
    """Per branch point, the multiset of face-star ratios of its preimages.

    A preimage with ramification index ``r`` is surrounded by ``r`` copies of
    the branch point's star, so the index is recovered from face counts alone.
    """
    base_star = np.bincount(cover.base.faces.ravel(), minlength=cover.base.n_vertices)
    torus_star = np.bincount(cover.torus.faces.ravel(), minlength=cover.torus.n_vertices)
    out = []
    for b in cover.branch_vertices:
        pre = np.nonzero(cover.psi_vertex == b)[0]
        out.append(sorted(int(torus_star[t] // base_star[b]) for t in pre))
    return out


def verify_cover(cover, rho=None):
    """Recompute the covering invariants; returns a dict of named checks."""
    base, torus, d = cover.base, cover.torus, cover.degree
    report = {}
    chi = euler_characteristic(torus)
    report["euler_characteristic"] = chi
    report["chi_zero"] = chi == 0
    report["faces_d_times"] = torus.n_faces == d * base.n_faces
    report["edges_d_times"] = torus.n_edges == d * base.n_edges
    ram = ramification_indices(cover)
    report["ramification"] = ram
    if rho is not None:
        report["ramification_matches"] = [tuple(r) for r in ram] == [tuple(s) for s in rho.structures]
    report["ramification_sums_to_d"] = all(sum(r) == d for r in ram)
    fiber = np.bincount(cover.psi_vertex, minlength=base.n_vertices)
    mask = np.ones(base.n_vertices, dtype=bool)
    mask[list(cover.branch_vertices)] = False
    report["non_branch_fibers_d"] = bool(np.all(fiber[mask] == d))
    if cover.base_vertex is not None:
        report["base_vertex_fiber"] = int(fiber[cover.base_vertex])
    cnt = np.bincount(cover.psi_face, minlength=base.n_faces)
    report["psi_face_surjective"] = bool(np.all(cnt == d))
    same = np.all(cover.psi_vertex[torus.faces] == base.faces[cover.psi_face])
    report["psi_simplicial"] = bool(same)
    keys = [k for k, v in report.items() if isinstance(v, bool)]
    report["ok"] = all(report[k] for k in keys)
    return report


def save_cover(cover, off_path, sidecar_path):
    from .meshio import save_off

    save_off(off_path, cover.torus)
    with open(sidecar_path, "w") as fh:
        fh.write("# toric cover sidecar: torus_vertex original_vertex copy / torus_face original_face copy\n")
        fh.write(f"degree {cover.degree}\n")
        fh.write(f"base_vertex {cover.base_vertex if cover.base_vertex is not None else -1}\n")
        fh.write(f"branch_vertices {' '.join(str(b) for b in cover.branch_vertices)}\n")
        if cover.sigma is not None:
            for s in cover.sigma.sigmas:
                fh.write(f"sigma {s}\n")
        copies = cover.vertex_copy if cover.vertex_copy is not None else np.zeros(cover.torus.n_vertices, int)
        fh.write(f"vertices {cover.torus.n_vertices}\n")
        for t, (o, c) in enumerate(zip(cover.psi_vertex, copies)):
            fh.write(f"{t} {o} {c}\n")
        fh.write(f"faces {cover.torus.n_faces}\n")
        for t, (o, c) in enumerate(zip(cover.psi_face, cover.copy_of_face)):
            fh.write(f"{t} {o} {c}\n")
        fh.write(f"branch_preimages {sum(len(p) for p in cover.branch_preimages)}\n")
        for i, pre in enumerate(cover.branch_preimages):
            for t, r in pre:
                fh.write(f"{i} {t} {r}\n")


def load_cover(off_path, sidecar_path):
    """Inverse of ``save_cover``; the base mesh is recovered through the maps."""
    from .meshio import load_mesh

    torus = load_mesh(off_path, check=False)
    header = {}
    sig = []
    with open(sidecar_path) as fh:
        lines = [l.strip() for l in fh if l.strip() and not l.startswith("#")]
    pos = 0

    def table(n):
        nonlocal pos
        rows = np.array([[int(x) for x in l.split()] for l in lines[pos : pos + n]], dtype=np.int64).reshape(-1, 3)
        pos += n
        return rows

    vrows = frows = brows = None
    while pos < len(lines):
        key, _, rest = lines[pos].partition(" ")
        pos += 1
        if key == "sigma":
            sig.append(rest)
        elif key == "vertices":
            vrows = table(int(rest))
        elif key == "faces":
            frows = table(int(rest))
        elif key == "branch_preimages":
            brows = table(int(rest))
        else:
            header[key] = rest
    d = int(header["degree"])
    branch = tuple(int(x) for x in header.get("branch_vertices", "").split())
    psi_vertex = vrows[:, 1]
    psi_face = frows[:, 1]
    n_base_faces = torus.n_faces // d
    base_faces = psi_vertex[torus.faces[:n_base_faces]]
    n_base_vertices = int(psi_vertex.max()) + 1
    base_vertices = np.zeros((n_base_vertices, 3))
    base_vertices[psi_vertex] = torus.vertices
    base = TriangleMesh(base_vertices, base_faces, check=False)
    pre = [[] for _ in branch]
    for i, t, r in brows:
        pre[i].append((int(t), int(r)))
    sigma = GluingInstructions.from_text("\n".join(sig), d) if sig else None
    bv = int(header.get("base_vertex", -1))
    return ToricCover(
        torus=torus,
        psi_vertex=psi_vertex,
        psi_face=psi_face,
        copy_of_face=frows[:, 2],
        branch_preimages=pre,
        base=base,
        degree=d,
        sigma=sigma,
        vertex_copy=vrows[:, 2],
        branch_vertices=branch,
        base_vertex=None if bv < 0 else bv,
    )
