import numpy as np
import pytest

from patchbounds import kernels
from patchbounds.geometry import DesignRegion, build_basis, build_mesh
from patchbounds.greens import SubstrateStack, WaveContext, spectral_dyad
from patchbounds.mom import assemble_impedance
from patchbounds.spectral import (
    AssemblyOptions,
    SpectralConvergenceError,
    fill_from_tables,
    gauss,
    offset_tables,
    panel_gauss,
    spectral_radii,
)

needs_cython = pytest.mark.skipif("cython" not in kernels.available(), reason="compiled backend not built")


def _setup(size=0.5, td=0.01, nx=6, ny=5):
    f = 1e9
    lx = size * WaveContext.at(f, 4.0).lambda_eps
    stack = SubstrateStack.from_loss_tangent(4.0, td, 0.05 * lx)
    ctx = WaveContext.for_stack(f, stack)
    basis = build_basis(build_mesh(DesignRegion.canonical(lx), nx, ny))
    return basis, stack, ctx


def test_gauss_integrates_polynomials():
    x, w = gauss(-1.0, 3.0, 5)
    assert np.isclose(np.sum(w * x**9), (3.0**10 - 1) / 10, rtol=1e-13)


def test_panel_gauss_panels_and_exactness():
    x, w = panel_gauss(0.0, 10.0, 1.0, 6)
    assert len(x) == 10 * 6
    assert np.isclose(w.sum(), 10.0, rtol=1e-14)
    assert np.isclose(np.sum(w * np.cos(x)), np.sin(10.0), rtol=1e-6)


def test_node_weights_match_dyad():
    basis, stack, ctx = _setup()
    m = basis.mesh
    rng = np.random.default_rng(3)
    kx = rng.uniform(-3, 3, 20) * ctx.k + 0.2j * ctx.k
    ky = rng.uniform(-3, 3, 20) * ctx.k
    sxx, syy, sxy = kernels.get("python").node_weights(kx, ky, ctx.k, stack.eps_r, stack.h, ctx.omega, m.dx, m.dy)
    G = spectral_dyad(kx, ky, stack, ctx)
    from patchbounds.geometry import rooftop_spectrum

    px = rooftop_spectrum(0, kx, ky, m.dx, m.dy)
    py = rooftop_spectrum(1, kx, ky, m.dx, m.dy)
    np.testing.assert_allclose(sxx, px * px * G[:, 0, 0], rtol=1e-12)
    np.testing.assert_allclose(syy, py * py * G[:, 1, 1], rtol=1e-12)
    np.testing.assert_allclose(sxy, px * py * G[:, 0, 1], rtol=1e-12)


@needs_cython
def test_backends_agree_on_node_weights():
    basis, stack, ctx = _setup()
    m = basis.mesh
    rng = np.random.default_rng(5)
    kx = (rng.uniform(0, 4, 300) + 1j * rng.uniform(0, 0.5, 300)) * ctx.k
    ky = (rng.uniform(0, 4, 300) + 1j * rng.uniform(0, 0.5, 300)) * ctx.k
    args = (kx, ky, ctx.k, stack.eps_r, stack.h, ctx.omega, m.dx, m.dy)
    for a, b in zip(kernels.get("cython").node_weights(*args), kernels.get("python").node_weights(*args)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14 * np.abs(b).max())


@needs_cython
@pytest.mark.parametrize("td", [0.0, 0.01])
def test_backends_agree_on_grid_weights(td):
    basis, stack, ctx = _setup(td=td)
    m = basis.mesh
    a, b = spectral_radii(stack, ctx)
    kx, wx = panel_gauss(0.0, 20 / m.dx, 1 / m.dx, 4)
    ky, wy = panel_gauss(0.0, 20 / m.dy, 1 / m.dy, 4)
    args = (kx, wx, ky, wy, a, b, ctx.k, stack.eps_r, stack.h, ctx.omega, m.dx, m.dy, stack.lossless)
    for u, v in zip(kernels.get("cython").grid_weights(*args), kernels.get("python").grid_weights(*args)):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-13 * np.abs(v).max())


@needs_cython
def test_backends_agree_on_tables():
    basis, stack, ctx = _setup()
    t1 = offset_tables(basis.mesh, stack, ctx, AssemblyOptions(backend="cython"))
    t2 = offset_tables(basis.mesh, stack, ctx, AssemblyOptions(backend="python"))
    for u, v in ((t1.xx, t2.xx), (t1.yy, t2.yy), (t1.xy, t2.xy)):
        np.testing.assert_allclose(u, v, rtol=0, atol=1e-11 * np.abs(v).max())


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="unavailable"):
        kernels.get("fortran")


@pytest.fixture(scope="module")
def lossy_Z():
    basis, stack, ctx = _setup()
    return basis, stack, ctx, assemble_impedance(basis, stack, ctx)


def test_impedance_is_complex_symmetric(lossy_Z):
    *_, Z = lossy_Z
    assert np.abs(Z - Z.T).max() / np.abs(Z).max() < 1e-8


def test_block_toeplitz_translation_bit_identical(lossy_Z):
    basis, *_, Z = lossy_Z
    o, a = basis.orient, basis.anchor
    key = {}
    checked = 0
    for m in range(basis.N):
        for n in range(basis.N):
            d = (o[m], o[n], a[n, 0] - a[m, 0], a[n, 1] - a[m, 1])
            if d in key:
                assert Z[m, n] == Z[key[d]]
                checked += 1
            else:
                key[d] = (m, n)
    assert checked > 100


def test_fill_matches_table_entries(lossy_Z):
    basis, stack, ctx, Z = lossy_Z
    t = offset_tables(basis.mesh, stack, ctx)
    Z2 = fill_from_tables(basis.orient, basis.anchor, t)
    np.testing.assert_array_equal(Z, Z2)
    assert Z[0, 0] == t.xx[0, 0]
    iy = int(np.nonzero(basis.orient == 1)[0][0])
    assert Z[iy, iy] == t.yy[0, 0]


def test_self_term_is_capacitive_and_lossy(lossy_Z):
    *_, Z = lossy_Z
    d = np.diag(Z)
    assert np.all(d.real > 0)
    assert np.all(d.imag < 0)  # small cells are capacitive under exp(+jwt)


def test_contour_height_does_not_change_result():
    basis, stack, ctx = _setup(nx=4, ny=4)
    Z1 = assemble_impedance(basis, stack, ctx, AssemblyOptions(contour_height=0.5))
    Z2 = assemble_impedance(basis, stack, ctx, AssemblyOptions(contour_height=0.25, contour_points=192))
    assert np.linalg.norm(Z1 - Z2) / np.linalg.norm(Z1) < 1e-6


def test_truncation_self_convergence():
    basis, stack, ctx = _setup(nx=4, ny=4)
    K = AssemblyOptions().truncation
    Z1 = assemble_impedance(basis, stack, ctx, AssemblyOptions(truncation=K))
    Z2 = assemble_impedance(basis, stack, ctx, AssemblyOptions(truncation=2 * K))
    assert abs(np.linalg.norm(Z2) - np.linalg.norm(Z1)) / np.linalg.norm(Z2) < 1e-3
    assert np.linalg.norm(Z2.real - Z1.real) / np.linalg.norm(Z2.real) < 1e-3


def test_tail_error_is_raised():
    basis, stack, ctx = _setup(nx=4, ny=4)
    with pytest.raises(SpectralConvergenceError) as e:
        assemble_impedance(basis, stack, ctx, AssemblyOptions(tail_tolerance=1e-9))
    assert e.value.achieved > 1e-9


def test_lossless_resistance_is_psd():
    basis, stack, ctx = _setup(td=0.0, nx=4, ny=4)
    Z = assemble_impedance(basis, stack, ctx)
    R = (Z + Z.conj().T) / 2
    assert np.linalg.eigvalsh(R).min() > -1e-10 * np.abs(R).max()
