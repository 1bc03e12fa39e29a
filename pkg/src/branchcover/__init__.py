"""Branched covers of genus-zero meshes by the flat torus, and toric images."""

from .cover import DiskMesh, ToricCover, build_cover, cut_to_disk, glue, verify_cover
from .flatten import FlatEmbedding, TorusCut, compute_distortion, cut_torus_generators, solve_flatten
from .mesh import MeshError, TriangleMesh, euler_characteristic, validate_genus_zero
from .meshio import load_mesh
from .monodromy import (
    GluingInstructions,
    Permutation,
    RamificationType,
    check_gluing_conditions,
    find_gluing_instructions,
)
from .raster import ToricImage, best_copy, pullback_vertex_samples, pushforward_labels, rasterize

__all__ = [
    "TriangleMesh",
    "MeshError",
    "load_mesh",
    "euler_characteristic",
    "validate_genus_zero",
    "Permutation",
    "RamificationType",
    "GluingInstructions",
    "check_gluing_conditions",
    "find_gluing_instructions",
    "DiskMesh",
    "ToricCover",
    "cut_to_disk",
    "glue",
    "build_cover",
    "verify_cover",
    "TorusCut",
    "FlatEmbedding",
    "cut_torus_generators",
    "solve_flatten",
    "compute_distortion",
    "ToricImage",
    "rasterize",
    "best_copy",
    "pullback_vertex_samples",
    "pushforward_labels",
]
