import numpy as np
import pytest
from hypothesis import settings

from branchcover.cover import build_cover
from branchcover.flatten import compute_distortion, cut_torus_generators, solve_flatten
from branchcover.geodesic import default_base_vertex, disjoint_cut_paths, farthest_point_sample
from branchcover.monodromy import gluing_for, uniform_ramification
from branchcover.shapes import humanoid
from branchcover.spherical import icosphere

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


class Built:
    """Everything the pipeline produces for one mesh and ramification type."""

    def __init__(self, mesh, k, r, d, seed=0):
        self.rho, _ = uniform_ramification(k, r, d)
        self.sigma = gluing_for(self.rho)
        branch = farthest_point_sample(mesh, k, seed)
        self.mesh, self.cuts = disjoint_cut_paths(mesh, default_base_vertex(mesh, branch), branch)
        self.cover = build_cover(self.mesh, self.cuts, self.sigma)
        self.cut = cut_torus_generators(self.cover)
        self.emb = solve_flatten(self.cut)
        self.dist = compute_distortion(self.cover, self.emb)


@pytest.fixture(scope="session")
def ico3():
    return icosphere(3)


@pytest.fixture(scope="session")
def ico_cover(ico3):
    return Built(ico3, 6, 2, 3)


@pytest.fixture(scope="session")
def human():
    return humanoid(26)


@pytest.fixture(scope="session")
def human_cover(human):
    return Built(human, 5, 3, 5)


@pytest.fixture(scope="session")
def small_human_cover():
    return Built(humanoid(10), 5, 3, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
