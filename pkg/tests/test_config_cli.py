import json

import numpy as np
import pytest

from branchcover.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, EXIT_TIMEOUT, exit_code, main
from branchcover.config import ConfigError, PipelineConfig, load_config, parse_rho, read_config_file
from branchcover.flatten import FlattenError
from branchcover.meshio import load_labels, load_mesh, save_off
from branchcover.monodromy import GluingInstructions, canonical_form, SearchTimeout, check_gluing_conditions, uniform_ramification
from branchcover.pipeline import StageError, open_mesh
from branchcover.raster import ToricImage, load_raw, save_raw


def test_parse_rho():
    rho = parse_rho("[[1,1,3],[1,1,3]]")
    assert rho.degree == 5 and rho.k == 2
    with pytest.raises(ConfigError):
        parse_rho("[[1,1,3]")
    with pytest.raises(ConfigError):
        parse_rho("[]")
    with pytest.raises(ConfigError):
        parse_rho("[[1,2],[3,1]]", 3)


def test_config_file_and_overrides(tmp_path):
    (tmp_path / "m.off").write_text("")
    p = tmp_path / "run.cfg"
    p.write_text("# demo\nmesh = m.off\nk = 6\nr = 2\nd = 3\nres = 64  # small\nchannels = xyz, normals\n")
    raw = read_config_file(p)
    assert raw["k"] == 6 and raw["channels"] == ["xyz", "normals"]
    cfg = load_config(p, res=32, score="area")
    assert cfg.res == 32 and cfg.score == "area"
    assert cfg.mesh == str(tmp_path / "m.off")
    cfg.validate()
    assert cfg.to_dict()["k"] == 6


@pytest.mark.parametrize(
    "kwargs,msg",
    [
        (dict(k=6, r=2, d=3), "no input mesh"),
        (dict(mesh="x", k=6, r=2), "must all be given"),
        (dict(mesh="x", k=2, r=2, d=2), "2 d = 4"),
        (dict(mesh="x", k=6, r=2, d=3, rho="[[2]]"), "exactly one"),
        (dict(mesh="x", k=6, r=2, d=3, res=4), "below 8"),
        (dict(mesh="x", k=6, r=2, d=3, score="best"), "score"),
        (dict(mesh="x", k=6, r=2, d=3, tol=0.0), "positive"),
    ],
)
def test_config_validation(kwargs, msg):
    with pytest.raises(ConfigError, match=msg):
        PipelineConfig(**kwargs).validate()


def test_rho_config_checks_rh():
    cfg = PipelineConfig(mesh="x", rho="[[2],[2]]", d=2)
    with pytest.raises(ConfigError, match="RH violated"):
        cfg.ramification()


def test_bad_config_lines(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("mesh\n")
    with pytest.raises(ConfigError, match="key = value"):
        read_config_file(p)
    p.write_text("colour = red\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        read_config_file(p)
    p.write_text("res = many\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        read_config_file(p)


def test_shapes_by_name():
    assert open_mesh("shape:icosphere:1").n_vertices == 42
    assert open_mesh("shape:octahedron").n_faces == 8
    with pytest.raises(ConfigError):
        open_mesh("shape:teapot")


def test_exit_codes():
    assert exit_code(StageError("solve_gluing", SearchTimeout("x"))) == EXIT_TIMEOUT
    assert exit_code(StageError("flatten", FlattenError("x"))) == EXIT_NUMERIC
    assert exit_code(StageError("load_mesh", FileNotFoundError("x"))) == EXIT_INVALID
    assert exit_code(ConfigError("x")) == EXIT_INVALID


def test_solve_gluing_cli(tmp_path, capsys):
    out = tmp_path / "s.txt"
    assert main(["solve-gluing", "-k", "3", "-r", "3", "-d", "3", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines() == ["(1 2 3)"] * 3


def test_solve_gluing_rejects_rh(capsys):
    assert main(["solve-gluing", "-k", "2", "-r", "2", "-d", "2"]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "RH violated: 2·1 ≠ 4" in err


def test_solve_gluing_worked_example(capsys):
    rho = "[[1,1,3],[1,1,3],[1,1,3],[1,1,3],[1,1,3]]"
    assert main(["solve-gluing", "--rho", rho, "-d", "5", "--max-solutions", "400"]) == EXIT_OK
    text = capsys.readouterr().out
    sols = [GluingInstructions.from_text(block, 5) for block in _blocks(text, 5)]
    target, _ = uniform_ramification(5, 3, 5)
    assert all(check_gluing_conditions(s, target).ok for s in sols)
    ex = GluingInstructions.from_text("(1)(2)(345)\n(1)(4)(235)\n(3)(4)(152)\n(3)(4)(125)\n(1)(5)(243)", 5)
    assert canonical_form(ex) in {canonical_form(s) for s in sols}


def _blocks(text, k):
    lines = [l for l in text.splitlines() if l.strip()]
    return ["\n".join(lines[i : i + k]) for i in range(0, len(lines), k)]


def test_build_missing_mesh(tmp_path, capsys):
    code = main(["build", "--mesh", str(tmp_path / "none.off"), "-k", "6", "-r", "2", "-d", "3", "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    assert json.loads(capsys.readouterr().out)["stage"] == "load_mesh"


def _build(tmp_path, name, extra=()):
    out = tmp_path / name
    args = ["build", "--mesh", "shape:icosphere:2", "-k", "6", "-r", "2", "-d", "3", "--res", "64", "--out", str(out), *extra]
    assert main(args) == EXIT_OK
    return out


ARTIFACTS = ("base.off", "gluing.txt", "cover.off", "cover.txt", "embedding.txt", "distortion.csv", "image.raw", "provenance.bin", "preview_x.png")


def test_build_is_deterministic(tmp_path, capsys):
    a = _build(tmp_path, "a")
    b = _build(tmp_path, "b")
    for name in ARTIFACTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    sa = json.loads((a / "summary.json").read_text())
    sb = json.loads((b / "summary.json").read_text())
    for s in (sa, sb):
        s.pop("created"), s.pop("timings")
    assert sa == sb
    assert sa["flipped_faces"] == 0 and sa["torus"]["euler"] == 0


def test_build_reconstruct_and_transfer(tmp_path, capsys):
    out = _build(tmp_path, "b")
    capsys.readouterr()
    args = ["--embedding", str(out / "embedding.txt"), "--cover", str(out / "cover.off")]
    assert main(["reconstruct", "--image", str(out / "image.raw"), *args, "--out", str(tmp_path / "rec")]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["median_relative_error"] < 0.02
    rec = load_mesh(tmp_path / "rec" / "reconstructed.off")
    assert rec.n_vertices == load_mesh(out / "base.off").n_vertices
    # a constant image collapses every vertex onto one point
    img = load_raw(out / "image.raw")
    save_raw(tmp_path / "const.raw", ToricImage(np.full_like(img.data, 0.25), img.names))
    assert main(["reconstruct", "--image", str(tmp_path / "const.raw"), *args, "--out", str(tmp_path / "c")]) == EXIT_OK
    pts = load_mesh(tmp_path / "c" / "reconstructed.off", check=False).vertices
    np.testing.assert_allclose(pts, 0.25, atol=1e-7)
    # logits from the per-face labels of a built-in shape come back unchanged
    lab = tmp_path / "labels.txt"
    assert main(["transfer-labels", "--image", str(tmp_path / "const.raw"), *args, "--out", str(lab)]) == EXIT_OK
    assert np.all(load_labels(lab) == 0)


def test_build_with_labels_and_spherical(tmp_path, capsys):
    base = open_mesh("shape:humanoid:6")
    save_off(tmp_path / "h.off", base)
    (tmp_path / "h.txt").write_text("\n".join(str(int(l)) for l in base.face_signals["labels"]) + "\n")
    out = tmp_path / "out"
    code = main(["build", "--mesh", str(tmp_path / "h.off"), "--labels", str(tmp_path / "h.txt"), "-k", "4", "-r", "2",
                 "-d", "2", "--res", "128", "--channels", "labels", "--out", str(out)])
    assert code == EXIT_OK
    capsys.readouterr()
    args = ["--embedding", str(out / "embedding.txt"), "--cover", str(out / "cover.off")]
    assert main(["transfer-labels", "--image", str(out / "image.raw"), *args, "--out", str(tmp_path / "l.txt")]) == EXIT_OK
    got = load_labels(tmp_path / "l.txt")
    assert np.mean(got == load_labels(out / "base_labels.txt")) > 0.95
    sph = tmp_path / "s"
    code = main(["build", "--mesh", "shape:icosphere:2", "-k", "6", "-r", "2", "-d", "3", "--res", "32",
                 "--channels", "spherical:shape:octahedron", "--out", str(sph)])
    assert code == EXIT_OK
    assert load_raw(sph / "image.raw").names == ("distance", "sin_angle", "cos_angle")
