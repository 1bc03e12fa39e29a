"""Synthetic meshes used by tests, scripts and the acceptance suite."""

import numpy as np

from .mesh import TriangleMesh

LIMB_NAMES = ("torso", "head", "left_arm", "right_arm", "left_leg", "right_leg")


def octahedron():
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    f = np.array([[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]])
    return TriangleMesh(v, f)


def tetrahedron():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    f = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    return TriangleMesh(v, f)


def two_octahedra():
    o = octahedron()
    v = np.vstack([o.vertices, o.vertices + [5.0, 0, 0]])
    f = np.vstack([o.faces, o.faces + 6])
    return TriangleMesh(v, f, check=False)


def flat_torus_grid(n, m=None):
    """``n x m`` grid on the Clifford torus in R^4; every cell is congruent.

    Vertex ``i * m + j`` sits at grid position ``(j / m, i / n)``; each square
    is split along its ``(i, j) -> (i+1, j+1)`` diagonal.
    """
    m = n if m is None else m
    i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    a = 2 * np.pi * j.ravel() / m
    b = 2 * np.pi * i.ravel() / n
    verts = np.stack([np.cos(a) / (2 * np.pi), np.sin(a) / (2 * np.pi), np.cos(b) / (2 * np.pi), np.sin(b) / (2 * np.pi)], 1)
    idx = lambda r, c: (r % n) * m + (c % m)
    r, c = i.ravel(), j.ravel()
    f1 = np.stack([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)], 1)
    f2 = np.stack([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)], 1)
    return TriangleMesh(verts, np.vstack([f1, f2]))


def flat_torus_grid_coords(n, m=None):
    m = n if m is None else m
    i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    return np.stack([j.ravel() / m, i.ravel() / n], 1)


def _icosahedron():
    t = (1.0 + 5**0.5) / 2.0
    v = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t],
         [0, -1, -t], [0, 1, -t], [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]],
        dtype=float,
    )
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def geodesic_sphere(freq):
    """Unit sphere from an icosahedron with every face split into ``freq**2`` triangles.

    Has ``10 * freq**2 + 2`` vertices.
    """
    v0, f0 = _icosahedron()
    keys = {}
    verts = []

    def vid(face, a, b):
        # integer barycentric coordinates on the shared icosahedron vertices identify points
        w = np.array([freq - a - b, a, b])
        key = tuple(sorted((int(f0[face][k]), int(w[k])) for k in range(3) if w[k]))
        if key not in keys:
            p = w @ v0[f0[face]]
            keys[key] = len(verts)
            verts.append(p / np.linalg.norm(p))
        return keys[key]

    faces = []
    for f in range(len(f0)):
        for a in range(freq):
            for b in range(freq - a):
                faces.append([vid(f, a, b), vid(f, a + 1, b), vid(f, a, b + 1)])
                if a + b < freq - 1:
                    faces.append([vid(f, a + 1, b), vid(f, a + 1, b + 1), vid(f, a, b + 1)])
    return TriangleMesh(np.array(verts), np.array(faces))


# (direction, angular width, amplitude) per limb; the radial graph keeps the surface embedded
_LIMBS = (
    ((0.0, 0.0, 1.0), 0.45, 0.9),
    ((1.0, 0.0, 0.35), 0.35, 1.6),
    ((-1.0, 0.0, 0.35), 0.35, 1.6),
    ((0.45, 0.0, -1.0), 0.35, 1.8),
    ((-0.45, 0.0, -1.0), 0.35, 1.8),
)


def humanoid(freq=26):
    """Star-shaped figure with a head, two arms and two legs over a flattened torso.

    Face signal ``labels`` assigns 0 to the torso and 1..5 to the limbs
    (see ``LIMB_NAMES``).
    """
    s = geodesic_sphere(freq)
    p = s.vertices
    radius = np.ones(len(p))
    for d, width, amp in _LIMBS:
        d = np.asarray(d) / np.linalg.norm(d)
        ang = np.arccos(np.clip(p @ d, -1, 1))
        radius += amp * np.exp(-((ang / width) ** 2))
    verts = p * radius[:, None] * np.array([1.0, 0.55, 1.0])
    centers = s.vertices[s.faces].mean(axis=1)
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    score = np.stack(
        [np.exp(-((np.arccos(np.clip(centers @ (np.asarray(d) / np.linalg.norm(d)), -1, 1)) / w) ** 2)) for d, w, _ in _LIMBS],
        axis=1,
    )
    labels = np.where(score.max(axis=1) > 0.25, score.argmax(axis=1) + 1, 0)
    return TriangleMesh(verts, s.faces, face_signals={"labels": labels})
