"""Shared fixtures: tiny meshes and sampling models reused across modules."""
import numpy as np
import pytest

from rbtopt.fem import FemModel
from rbtopt.mesh import build_rect_half_beam
from rbtopt.uncertainty import DistributionSpec, UncertaintyModel


@pytest.fixture(scope="session")
def two_tri_mesh():
    """Smallest usable half-beam: one quad cell, two triangles."""
    return build_rect_half_beam(120.0, 1, 1)


@pytest.fixture(scope="session")
def eight_tri_mesh():
    return build_rect_half_beam(120.0, 2, 2)


@pytest.fixture(scope="session")
def eight_tri_model(eight_tri_mesh):
    return FemModel(eight_tri_mesh)


@pytest.fixture(scope="session")
def beam_distributions():
    """Load / modulus / Poisson triple of the 2D compliance benchmark."""
    return UncertaintyModel(
        DistributionSpec("gaussian", 0.5, 0.25),
        DistributionSpec("lognormal", 1.0, 0.1),
        DistributionSpec("uniform", 0.3, 0.115),
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
