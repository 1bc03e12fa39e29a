from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from branchcover.flatten import compute_distortion, cut_torus_generators, solve_flatten
from branchcover.raster import (
    HIST_BINS, RasterError, ToricImage, best_copy, bilinear_sample, copy_scores, distortion_report, load_provenance,
    load_raw, locate_pixels, normalized_area_scale, pullback_vertex_samples, pushforward_labels, rasterize,
    save_png, save_provenance, save_raw,
)
from branchcover.shapes import flat_torus_grid

from oracles import relative_vertex_error


@pytest.fixture(scope="module")
def flat():
    """A flat torus viewed as a degree-1 cover of itself."""
    T = flat_torus_grid(8)
    emb = solve_flatten(cut_torus_generators(T))
    cov = SimpleNamespace(base=T, torus=T, psi_face=np.arange(T.n_faces), degree=1)
    return cov, emb


def _dyadic(uv, bits=20):
    return np.round(uv * 2**bits) / 2**bits


def test_constant_signal(ico_cover):
    c = ico_cover.cover
    base = c.base.with_signals(vertex_signals={"one": np.full(c.base.n_vertices, 2.5)})
    cov = SimpleNamespace(**{**vars(c), "base": base})
    img = rasterize(cov, ico_cover.emb, ["one"], 64)
    np.testing.assert_allclose(img.data, 2.5, rtol=1e-12)


@pytest.mark.parametrize("n", [8, 33, 128])
def test_every_pixel_is_covered_once(ico_cover, n):
    emb = ico_cover.emb
    face, bary = locate_pixels(emb.torus_uv, n)
    assert face.min() >= 0
    np.testing.assert_allclose(bary.sum(-1), 1, atol=1e-12)
    assert bary.min() > -1e-9
    # barycentrics reproduce the pixel center up to a lattice shift
    p = np.einsum("ijk,ijkc->ijc", bary, emb.torus_uv[face])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    center = np.stack([(j + 0.5) / n, (i + 0.5) / n], -1)
    d = p - center
    np.testing.assert_allclose(d - np.round(d), 0, atol=1e-9)


@given(st.integers(-20, 20), st.integers(-20, 20))
def test_lattice_shift_rolls_the_image(ico_cover, a, b):
    n = 32
    tuv = _dyadic(ico_cover.emb.torus_uv)
    f0, _ = locate_pixels(tuv, n)
    f1, _ = locate_pixels(tuv + np.array([a, b]) / n, n)
    np.testing.assert_array_equal(f1, np.roll(f0, (b, a), axis=(0, 1)))


def test_top_left_rule_on_shared_edge():
    # unit square split along its diagonal; pixel centers (i, i) lie exactly on it
    sq = np.array([[[0, 0], [1, 0], [1, 1]], [[0, 0], [1, 1], [0, 1]]], dtype=float)
    face, bary = locate_pixels(sq, 8)
    for i in range(8):
        # the diagonal runs upward in face 1, so face 1 owns it despite the higher id
        assert face[i, i] == 1
    assert np.all(face[np.triu_indices(8, 1)] == 0)
    assert np.all(face[np.tril_indices(8, -1)] == 1)


def test_resolution_floor(ico_cover):
    with pytest.raises(RasterError, match="below"):
        locate_pixels(ico_cover.emb.torus_uv, 7)


def test_bilinear_is_exact_on_pixel_centers(rng):
    data = rng.random((2, 16, 16))
    i, j = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    uv = np.stack([(j.ravel() + 0.5) / 16, (i.ravel() + 0.5) / 16], 1)
    np.testing.assert_allclose(bilinear_sample(data, uv).T, data.reshape(2, -1), atol=1e-14)
    np.testing.assert_allclose(bilinear_sample(data, uv + 3.0), bilinear_sample(data, uv), atol=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_bilinear_reproduces_periodic_affine(u, v):
    # a plane wave periodic on the grid is sampled between its samples by linear blending
    n = 16
    j = np.arange(n)
    row = np.cos(2 * np.pi * (j + 0.5) / n)
    data = np.broadcast_to(row, (n, n))[None]
    got = bilinear_sample(data, [[u, v]])[0, 0]
    x = u * n - 0.5
    j0 = np.floor(x)
    t = x - j0
    want = (1 - t) * np.cos(2 * np.pi * (j0 + 0.5) / n) + t * np.cos(2 * np.pi * (j0 + 1.5) / n)
    assert got == pytest.approx(want, abs=1e-12)


def test_linear_signal_pullback_converges(ico_cover):
    c, emb, dist = ico_cover.cover, ico_cover.emb, ico_cover.dist
    sel = best_copy(c, emb, "area", dist)
    med = []
    for n in (64, 128, 256):
        img = rasterize(c, emb, ["xyz"], n)
        med.append(np.median(relative_vertex_error(pullback_vertex_samples(img, c, emb, sel, "area", dist), c.base)))
    assert med[1] < 0.75 * med[0] and med[2] < 0.75 * med[1]


def test_best_copy_degree_one_is_identity(flat):
    cov, emb = flat
    np.testing.assert_array_equal(best_copy(cov, emb, "combined"), np.arange(cov.base.n_faces))


@pytest.mark.parametrize("score", ["area", "angle", "combined"])
def test_best_copy_matches_brute_force(ico_cover, score):
    c = ico_cover.cover
    s = copy_scores(c, ico_cover.dist, score)
    sel = best_copy(c, ico_cover.emb, score, ico_cover.dist)
    for f in range(0, c.base.n_faces, 37):
        copies = np.nonzero(c.psi_face == f)[0]
        assert sel[f] == copies[np.argmin(s[copies])]
        assert c.psi_face[sel[f]] == f


def test_scores_are_at_least_one(ico_cover):
    for score in ("area", "angle", "combined"):
        assert copy_scores(ico_cover.cover, ico_cover.dist, score).min() >= 1 - 1e-12
    with pytest.raises(ValueError):
        copy_scores(ico_cover.cover, ico_cover.dist, "volume")


def test_normalized_area_scale_averages_to_one(ico_cover):
    # UV-area weighted mean of the normalized scale is exactly one
    a = normalized_area_scale(ico_cover.cover, ico_cover.dist)
    assert (a * ico_cover.emb.signed_areas).sum() == pytest.approx(1.0, rel=1e-9)


def _logit_image(cov, emb, k, rng, n=128):
    lab = rng.integers(0, k, cov.base.n_faces)
    base = cov.base.with_signals(face_signals={"labels": lab})
    c2 = SimpleNamespace(**{**vars(cov), "base": base})
    return rasterize(c2, emb, ["labels"], n), lab


def test_pushforward_matches_manual_average(ico_cover, rng):
    c, emb, dist = ico_cover.cover, ico_cover.emb, ico_cover.dist
    data = rng.normal(size=(4, 32, 32))
    img = ToricImage(data, ("a", "b", "c", "d"))
    labels, avg = pushforward_labels(img, c, emb, dist, return_scores=True)
    for f in range(0, c.base.n_faces, 53):
        copies = np.nonzero(c.psi_face == f)[0]
        w = 1.0 / dist.area_scale[copies]
        logits = img.sample(emb.torus_uv[copies].mean(axis=1))
        np.testing.assert_allclose(avg[f], (w[:, None] * logits).sum(0) / w.sum(), rtol=1e-12)
        assert labels[f] == np.argmax(avg[f])


def test_pushforward_shift_invariant(ico_cover, rng):
    img, _ = _logit_image(ico_cover.cover, ico_cover.emb, 3, rng)
    shifted = ToricImage(img.data + 7.0, img.names)
    a = pushforward_labels(img, ico_cover.cover, ico_cover.emb, ico_cover.dist)
    b = pushforward_labels(shifted, ico_cover.cover, ico_cover.emb, ico_cover.dist)
    np.testing.assert_array_equal(a, b)


def test_pushforward_single_class_and_dominance(ico_cover, rng):
    c, emb = ico_cover.cover, ico_cover.emb
    one = ToricImage(rng.random((1, 16, 16)), ("only",))
    assert np.all(pushforward_labels(one, c, emb) == 0)
    data = rng.random((3, 16, 16))
    data[2] += 10
    assert np.all(pushforward_labels(ToricImage(data, ("a", "b", "c")), c, emb) == 2)


def test_label_transfer_on_flat_torus(flat, rng):
    cov, emb = flat
    img, lab = _logit_image(cov, emb, 4, rng, n=256)
    assert np.mean(pushforward_labels(img, cov, emb) == lab) == 1.0


def test_isometric_histogram(flat):
    cov, emb = flat
    dist = compute_distortion(cov.torus, emb)
    rep = distortion_report(cov, emb, np.arange(cov.base.n_faces), dist)
    h = rep.histograms
    mid = HIST_BINS // 2
    assert h["area_scale_all"][mid - 1 : mid + 1].sum() == cov.base.n_faces
    assert h["angle_distortion_all"][mid] == cov.base.n_faces
    assert rep.percentiles["area_scale_all"]["p50"] == pytest.approx(1.0, abs=1e-8)
    js = rep.to_json()
    assert len(js["histograms"]["angle_distortion_best"]) == HIST_BINS


def test_raw_and_provenance_round_trip(ico_cover, tmp_path):
    img = rasterize(ico_cover.cover, ico_cover.emb, ["xyz"], 16)
    save_raw(tmp_path / "i.raw", img)
    back = load_raw(tmp_path / "i.raw")
    assert back.names == ("x", "y", "z")
    np.testing.assert_array_equal(back.data, img.data.astype("<f4"))
    assert (tmp_path / "i.raw").stat().st_size == len("TORIC 16 3 x y z\n") + 3 * 16 * 16 * 4
    save_provenance(tmp_path / "p.bin", img)
    face, bary = load_provenance(tmp_path / "p.bin", 16)
    np.testing.assert_array_equal(face, img.face)
    np.testing.assert_allclose(bary, img.bary, atol=1e-6)
    save_png(tmp_path / "x.png", img.data[0])
    assert (tmp_path / "x.png").read_bytes()[:4] == b"\x89PNG"


def test_truncated_raw_is_rejected(tmp_path):
    (tmp_path / "bad.raw").write_bytes(b"TORIC 8 1 x\n" + b"\0" * 12)
    with pytest.raises(ValueError, match="expected 64"):
        load_raw(tmp_path / "bad.raw")
