import numpy as np
import pytest

from patchbounds.geometry import DesignRegion, build_basis, build_mesh
from patchbounds.greens import SubstrateStack, WaveContext
from patchbounds.mom import assemble_operators

F0 = 1e9


def canonical_point(size, tan_delta, nx, ny, eps_real=4.0, R_s=0.0, f=F0, options=None):
    """Operators for the ``ly = 0.77 lx``, ``h = 0.05 lx`` region at ``lx = size * lambda_eps``."""
    lx = size * WaveContext.at(f, eps_real).lambda_eps
    stack = SubstrateStack.from_loss_tangent(eps_real, tan_delta, 0.05 * lx)
    ctx = WaveContext.for_stack(f, stack)
    basis = build_basis(build_mesh(DesignRegion.canonical(lx), nx, ny))
    return basis, stack, ctx, assemble_operators(basis, stack, ctx, R_s, options)


@pytest.fixture(scope="session")
def small_lossy():
    return canonical_point(0.5, 0.01, 6, 5)


@pytest.fixture(scope="session")
def small_lossless():
    return canonical_point(0.5, 0.0, 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
