"""Readers for OFF, OBJ and ASCII PLY; an OFF writer; face-label sidecars."""

import os

import numpy as np

from .mesh import MeshError, TriangleMesh


class MeshParseError(MeshError):
    pass


def _tokens(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _read_off(path):
    lines = _tokens(path)
    try:
        _, head = next(lines)
    except StopIteration:
        raise MeshParseError(f"{path}: empty file") from None
    if head[0].upper() not in ("OFF", "COFF", "NOFF"):
        raise MeshParseError(f"{path}: missing OFF header")
    counts = head[1:]
    if not counts:
        _, counts = next(lines)
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise MeshParseError(f"{path}: bad OFF count line") from None
    verts = []
    for i in range(nv):
        try:
            lineno, tok = next(lines)
            verts.append([float(t) for t in tok[:3]])
        except (StopIteration, ValueError):
            raise MeshParseError(f"{path}: vertex {i} is missing or malformed", "vertex", i) from None
    faces, labels = [], []
    for i in range(nf):
        try:
            lineno, tok = next(lines)
            n = int(tok[0])
            idx = [int(t) for t in tok[1 : 1 + n]]
        except (StopIteration, ValueError):
            raise MeshParseError(f"{path}: face {i} is missing or malformed", "face", i) from None
        if n != 3 or len(idx) != 3:
            raise MeshParseError(f"{path}: face {i} is not a triangle", "face", i)
        extra = tok[1 + n :]
        if len(extra) == 1:
            labels.append(int(extra[0]))
        faces.append(idx)
    return verts, faces, labels


def _read_obj(path):
    verts, faces = [], []
    for lineno, tok in _tokens(path):
        if tok[0] == "v":
            verts.append([float(t) for t in tok[1:4]])
        elif tok[0] == "f":
            idx = []
            for t in tok[1:]:
                k = int(t.split("/")[0])
                idx.append(k - 1 if k > 0 else len(verts) + k)
            if len(idx) != 3:
                raise MeshParseError(f"{path}: face {len(faces)} is not a triangle (line {lineno})", "face", len(faces))
            faces.append(idx)
    return verts, faces, []


def _read_ply(path):
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise MeshParseError(f"{path}: missing ply magic")
        elements = []
        while True:
            line = fh.readline()
            if not line:
                raise MeshParseError(f"{path}: unterminated PLY header")
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise MeshParseError(f"{path}: only ASCII PLY is supported")
            elif tok[0] == "element":
                elements.append((tok[1], int(tok[2]), []))
            elif tok[0] == "property":
                elements[-1][2].append(tok[-1])
            elif tok[0] == "end_header":
                break
        body = [l.split() for l in fh if l.strip()]
    verts, faces, labels = [], [], []
    row = 0
    for name, count, props in elements:
        chunk = body[row : row + count]
        row += count
        if name == "vertex":
            ix = [props.index(c) for c in ("x", "y", "z")]
            verts = [[float(r[i]) for i in ix] for r in chunk]
        elif name == "face":
            for i, r in enumerate(chunk):
                n = int(r[0])
                if n != 3:
                    raise MeshParseError(f"{path}: face {i} is not a triangle", "face", i)
                faces.append([int(t) for t in r[1:4]])
                rest = r[4:]
                if "label" in props and rest:
                    labels.append(int(rest[props.index("label") - 1]))
    return verts, faces, labels


_READERS = {"off": _read_off, "obj": _read_obj, "ply": _read_ply}


def load_mesh(path, format=None, labels=None, check=True):
    """Read a triangle mesh and validate it.

    ``format`` defaults to the file extension.  Per-face integer labels found in
    the file, or given as a sidecar path in ``labels``, become the ``labels``
    face signal.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    fmt = (format or os.path.splitext(path)[1].lstrip(".")).lower().replace("-ascii", "")
    if fmt not in _READERS:
        raise MeshParseError(f"{path}: unsupported mesh format {fmt!r}")
    verts, faces, file_labels = _READERS[fmt](path)
    verts = np.asarray(verts, dtype=float).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    bad = np.nonzero((faces < 0) | (faces >= len(verts)))[0]
    if len(bad):
        raise MeshParseError(f"{path}: face {bad[0]} references a vertex index out of range", "face", int(bad[0]))
    face_signals = {}
    if labels is not None:
        face_signals["labels"] = load_labels(labels, len(faces))
    elif file_labels and len(file_labels) == len(faces):
        face_signals["labels"] = np.asarray(file_labels, dtype=np.int64)
    return TriangleMesh(verts, faces, face_signals=face_signals, check=check)


def save_off(path, mesh_or_vertices, faces=None):
    """Write OFF with shortest round-trip float formatting."""
    if faces is None:
        vertices, faces = mesh_or_vertices.vertices, mesh_or_vertices.faces
    else:
        vertices = mesh_or_vertices
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(vertices)} {len(faces)} 0\n")
        for v in vertices:
            fh.write(" ".join(repr(float(x)) for x in v[:3]) + "\n")
        for f in faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def load_labels(path, n_faces=None):
    lab = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if n_faces is not None and len(lab) != n_faces:
        raise MeshParseError(f"{path}: {len(lab)} labels for {n_faces} faces")
    return lab


def save_labels(path, labels):
    with open(path, "w") as fh:
        for x in np.asarray(labels, dtype=np.int64):
            fh.write(f"{x}\n")
