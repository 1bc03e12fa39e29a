import numpy as np
import pytest

from branchcover.cover import GluingError, build_cover, cut_to_disk, glue, load_cover, save_cover, verify_cover
from branchcover.geodesic import CutPathSet, disjoint_cut_paths
from branchcover.mesh import MeshError, euler_characteristic
from branchcover.monodromy import GluingInstructions, builtin_gluing_table, uniform_ramification
from branchcover.shapes import octahedron
from branchcover.spherical import icosphere


def test_disk_is_a_disk(ico3):
    mesh, cuts = disjoint_cut_paths(ico3, 0, [100, 200, 300])
    disk = cut_to_disk(mesh, cuts)
    assert euler_characteristic(disk.mesh) == 1
    assert disk.k == 3
    for side_a, side_b in disk.boundary_arcs:
        assert len(side_a) == len(side_b)
        # both sides of every cut edge map back to the same mesh edge
        for (a0, a1), (b0, b1) in zip(side_a, side_b):
            assert disk.origin_vertex[a0] == disk.origin_vertex[b0]
            assert disk.origin_vertex[a1] == disk.origin_vertex[b1]
            assert (a0, a1) != (b0, b1)


def test_cut_rejects_non_edges():
    o = octahedron()
    cuts = CutPathSet(4, (5,), ((4, 5),))
    with pytest.raises(MeshError, match="not a mesh edge"):
        cut_to_disk(o, cuts)


def test_octahedron_double_cover():
    o = octahedron()
    mesh, cuts = disjoint_cut_paths(o, 4, [0, 2, 1, 3])
    rho, _ = uniform_ramification(4, 2, 2)
    sig = GluingInstructions.from_text("(1 2)\n" * 4, 2)
    cov = build_cover(mesh, cuts, sig)
    assert cov.euler_characteristic == 0
    assert cov.torus.n_faces == 2 * mesh.n_faces
    assert verify_cover(cov, rho)["ok"]


@pytest.mark.parametrize("key", list(builtin_gluing_table()), ids=lambda k: f"k{k[0]}d{k[1]}")
def test_every_table_row_glues_a_torus(key, ico3):
    k, d, rho = key
    sig = builtin_gluing_table()[key]
    branch = [0, 100, 200, 300, 400, 500][:k]
    mesh, cuts = disjoint_cut_paths(ico3, 641, branch)
    cov = build_cover(mesh, cuts, sig)
    rep = verify_cover(cov, rho)
    assert rep["ok"], rep
    assert rep["base_vertex_fiber"] == d


def test_path_order_matters():
    # reversing the order around the base breaks the product-one loop around it
    o = icosphere(2)
    mesh, cuts = disjoint_cut_paths(o, 0, [40, 80, 120, 160])
    key = next(k for k in builtin_gluing_table() if k[:2] == (4, 4))
    sig = builtin_gluing_table()[key]
    rev = CutPathSet(cuts.base_vertex, cuts.branch_vertices[::-1], cuts.paths[::-1])
    assert verify_cover(build_cover(mesh, cuts, sig), key[2])["ok"]
    with pytest.raises(GluingError):
        build_cover(mesh, rev, sig)


def test_non_torus_gluing_is_reported(ico3):
    mesh, cuts = disjoint_cut_paths(ico3, 0, [100, 200])
    sig = GluingInstructions.from_text("(1 2)\n(1 2)", 2)
    with pytest.raises(GluingError, match="Euler characteristic 2"):
        build_cover(mesh, cuts, sig)
    cov = glue(cut_to_disk(mesh, cuts), sig, require_torus=False)
    assert cov.euler_characteristic == 2


def test_icosphere_cover_topology(ico_cover):
    cov, mesh = ico_cover.cover, ico_cover.mesh
    rep = verify_cover(cov, ico_cover.rho)
    assert rep["ok"]
    assert cov.torus.n_faces == 3 * mesh.n_faces
    for b, pre in zip(cov.branch_vertices, cov.branch_preimages):
        assert sorted(r for _, r in pre) == [1, 2]
        assert np.all(cov.psi_vertex[[t for t, _ in pre]] == b)
    fiber = np.bincount(cov.psi_vertex, minlength=mesh.n_vertices)
    other = np.setdiff1d(np.arange(mesh.n_vertices), cov.branch_vertices)
    assert np.all(fiber[other] == 3)


def test_cover_is_a_local_isometry(ico_cover):
    cov = ico_cover.cover
    np.testing.assert_allclose(cov.torus.face_areas, cov.base.face_areas[cov.psi_face])
    np.testing.assert_array_equal(cov.psi_vertex[cov.torus.faces], cov.base.faces[cov.psi_face])


def test_verify_detects_wrong_type(ico_cover):
    wrong, _ = uniform_ramification(6, 2, 3)
    wrong = type(wrong)(((3,),) * 6, 3)
    assert not verify_cover(ico_cover.cover, wrong)["ramification_matches"]


def test_sidecar_round_trip(ico_cover, tmp_path):
    cov = ico_cover.cover
    save_cover(cov, tmp_path / "c.off", tmp_path / "c.txt")
    back = load_cover(tmp_path / "c.off", tmp_path / "c.txt")
    np.testing.assert_array_equal(back.psi_vertex, cov.psi_vertex)
    np.testing.assert_array_equal(back.psi_face, cov.psi_face)
    np.testing.assert_array_equal(back.base.faces, cov.base.faces)
    np.testing.assert_array_equal(back.base.vertices, cov.base.vertices)
    assert back.sigma == cov.sigma
    assert back.branch_preimages == cov.branch_preimages
    assert verify_cover(back, ico_cover.rho)["ok"]
