"""Spectral-domain integration of rooftop reaction integrals.

On a uniform grid every impedance entry depends only on the orientation pair
and the centre offset, so three small tables (xx, yy, xy) hold all of Z.
Each table entry is

    T(dx, dy) = 1/pi^2  int_quadrant  S(kx, ky) trig(kx dx) trig(ky dy)  dkx dky

with ``S`` the rooftop-weighted dyad (even/odd symmetry folds the plane onto
one quadrant: cos-cos for xx/yy, -sin-sin for xy).

The quadrant is split three ways:

* ``krho < a`` in polar coordinates along a half-ellipse in the upper complex
  ``krho`` plane, clearing the branch point at ``k`` and the surface-wave
  poles (which sit on or below the real axis);
* a smooth hand-over ring ``a < krho < b`` in real polar coordinates, weighted
  by ``chi``;
* everything else on a real Cartesian grid, weighted by ``1 - chi``.

``a`` exceeds ``sqrt(Re eps_r) k`` so every pole lies inside the ellipse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import kernels
from .geometry import Mesh
from .greens import SubstrateStack, WaveContext


class SpectralConvergenceError(RuntimeError):
    def __init__(self, achieved, tolerance):
        super().__init__(
            f"spectral tail not converged: estimated relative error {achieved:.3g} > {tolerance:.3g}; "
            "raise the truncation"
        )
        self.achieved = achieved
        self.tolerance = tolerance


@dataclass(frozen=True)
class AssemblyOptions:
    contour_points: int = 128
    contour_height: float = 0.5  # in units of k
    alpha_points: int = 64
    truncation: float = 80.0  # spectral radius times cell size
    points_per_panel: int = 8
    chunk: int = 512
    tail_tolerance: float = 1e-2
    n_theta: int = 64
    n_phi: int = 128
    backend: str | None = None

    def key(self) -> str:
        return (
            f"c{self.contour_points}h{self.contour_height}a{self.alpha_points}t{self.truncation}"
            f"p{self.points_per_panel}q{self.n_theta}x{self.n_phi}"
        )


@dataclass(frozen=True)
class OffsetTables:
    """``xx[p, q]`` at offset ``(p dx, q dy)``; ``xy[p, q]`` at ``((p+1/2) dx, (q+1/2) dy)``."""

    xx: np.ndarray
    yy: np.ndarray
    xy: np.ndarray
    tail_estimate: float


def gauss(a, b, n):
    x, w = leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def panel_gauss(a, b, width, n):
    """Composite Gauss-Legendre rule with panels no wider than ``width``."""
    m = max(1, int(math.ceil((b - a) / width - 1e-12)))
    edges = np.linspace(a, b, m + 1)
    x, w = leggauss(n)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _trig(k, n, d, half):
    off = (np.arange(n) + (0.5 if half else 0.0)) * d
    arg = np.multiply.outer(k, off)
    return np.sin(arg) if half else np.cos(arg)


def _project(kx, ky, sxx, syy, sxy, nx, ny, dx, dy):
    """Accumulate node contributions onto the three offset tables (node lists)."""
    cx, cy = _trig(kx, nx, dx, False), _trig(ky, ny, dy, False)
    sx, sy = _trig(kx, nx, dx, True), _trig(ky, ny, dy, True)
    return (
        (cx * sxx[:, None]).T @ cy,
        (cx * syy[:, None]).T @ cy,
        -((sx * sxy[:, None]).T @ sy),
    )


def _polar_nodes(kr, wr, alpha_n, alpha_panels):
    al, wa = panel_gauss(0.0, math.pi / 2, (math.pi / 2) / alpha_panels, alpha_n)
    KR = np.repeat(kr, len(al))
    AL = np.tile(al, len(kr))
    W = np.repeat(kr * wr, len(al)) * np.tile(wa, len(kr))
    return KR * np.cos(AL), KR * np.sin(AL), W


def spectral_radii(stack: SubstrateStack, ctx: WaveContext):
    a = ctx.k * (math.sqrt(stack.eps_real) + 1.0)
    return a, 2.0 * a


def offset_tables(mesh: Mesh, stack: SubstrateStack, ctx: WaveContext, options: AssemblyOptions | None = None) -> OffsetTables:
    opt = options or AssemblyOptions()
    kern = kernels.get(opt.backend)
    nx, ny, dx, dy = mesh.nx, mesh.ny, mesh.dx, mesh.dy
    lx, ly = mesh.region.lx, mesh.region.ly
    diag = math.hypot(lx, ly)
    k, eps, h, w = ctx.k, stack.eps_r, stack.h, ctx.omega
    a, b = spectral_radii(stack, ctx)
    ppp = opt.points_per_panel

    # complex contour 0 -> a
    t, wt = gauss(0.0, math.pi, opt.contour_points)
    kr = 0.5 * a * (1 - np.cos(t)) + 1j * opt.contour_height * k * np.sin(t)
    dkr = 0.5 * a * np.sin(t) + 1j * opt.contour_height * k * np.cos(t)
    kx, ky, W = _polar_nodes(kr, dkr * wt, opt.alpha_points, 1)
    s = kern.node_weights(kx, ky, k, eps, h, w, dx, dy)
    tables = list(_project(kx, ky, *(W * si for si in s), nx, ny, dx, dy))

    # hand-over ring a -> b, weighted by chi
    kr, wr = panel_gauss(a, b, math.pi / diag, ppp)
    chi = 1.0 - kernels._kernels_py._window(kr, a, b)
    alpha_panels = max(1, int(math.ceil(b * diag / math.pi)))
    kx, ky, W = _polar_nodes(kr, wr * chi, ppp, alpha_panels)
    s = kern.node_weights(kx, ky, k, eps, h, w, dx, dy)
    if stack.lossless:
        s = tuple(1j * si.imag for si in s)
    for acc, part in zip(tables, _project(kx, ky, *(W * si for si in s), nx, ny, dx, dy)):
        acc += part

    # Cartesian remainder weighted by 1 - chi
    kxs, wxs = panel_gauss(0.0, opt.truncation / dx, math.pi / lx, ppp)
    kys, wys = panel_gauss(0.0, opt.truncation / dy, math.pi / ly, ppp)
    cx, sx = _trig(kxs, nx, dx, False), _trig(kxs, nx, dx, True)
    cy_all, sy_all = _trig(kys, ny, dy, False), _trig(kys, ny, dy, True)
    ix_half = np.searchsorted(kxs, 0.5 * opt.truncation / dx)
    iy_half = np.searchsorted(kys, 0.5 * opt.truncation / dy)
    grid = [np.zeros((nx, ny), dtype=complex) for _ in range(3)]
    inner = [np.zeros((nx, ny), dtype=complex) for _ in range(3)]
    for j0 in range(0, len(kys), opt.chunk):
        j1 = min(j0 + opt.chunk, len(kys))
        sxx, syy, sxy = kern.grid_weights(kxs, wxs, kys[j0:j1], wys[j0:j1], a, b, k, eps, h, w, dx, dy, stack.lossless)
        cy, sy = cy_all[j0:j1], sy_all[j0:j1]
        grid[0] += cx.T @ sxx @ cy
        grid[1] += cx.T @ syy @ cy
        grid[2] -= sx.T @ sxy @ sy
        if j0 < iy_half:
            je = min(j1, iy_half) - j0
            inner[0] += cx[:ix_half].T @ sxx[:ix_half, :je] @ cy[:je]
            inner[1] += cx[:ix_half].T @ syy[:ix_half, :je] @ cy[:je]
            inner[2] -= sx[:ix_half].T @ sxy[:ix_half, :je] @ sy[:je]

    out, tail = [], 0.0
    for acc, g, gin in zip(tables, grid, inner):
        total = (acc + g) / math.pi**2
        out.append(total)
        norm = np.linalg.norm(total)
        if norm > 0:
            # contribution between K/2 and K is ~3x the remainder beyond K for a K^-2 tail
            tail = max(tail, np.linalg.norm(g - gin) / math.pi**2 / 3 / norm)
    return OffsetTables(out[0], out[1], out[2], tail)


def fill_from_tables(orient: np.ndarray, anchor: np.ndarray, tables: OffsetTables) -> np.ndarray:
    """Expand offset tables to the full ``N x N`` impedance matrix."""
    isx = orient == 0
    ax, ay = anchor[isx], anchor[~isx]
    N = len(orient)
    Z = np.empty((N, N), dtype=complex)
    ix, iy = np.nonzero(isx)[0], np.nonzero(~isx)[0]
    Z[np.ix_(ix, ix)] = tables.xx[np.abs(ax[:, None, 0] - ax[None, :, 0]), np.abs(ax[:, None, 1] - ax[None, :, 1])]
    Z[np.ix_(iy, iy)] = tables.yy[np.abs(ay[:, None, 0] - ay[None, :, 0]), np.abs(ay[:, None, 1] - ay[None, :, 1])]
    # offset (y centre - x centre) in cells: (i_y + 1/2 - i_x, j_y - j_x - 1/2)
    ox = 2 * (ay[None, :, 0] - ax[:, None, 0]) + 1
    oy = 2 * (ay[None, :, 1] - ax[:, None, 1]) - 1
    zxy = np.sign(ox) * np.sign(oy) * tables.xy[(np.abs(ox) - 1) // 2, (np.abs(oy) - 1) // 2]
    Z[np.ix_(ix, iy)] = zxy
    Z[np.ix_(iy, ix)] = zxy.T
    return Z
