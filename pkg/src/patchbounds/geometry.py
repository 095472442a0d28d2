"""Design region, shape masks, uniform cell mesh and rooftop basis.

Coordinates put the lower-left corner of the design region at the origin.
Cell ``(i, j)`` covers ``[i dx, (i+1) dx] x [j dy, (j+1) dy]``.  An x-directed
rooftop with anchor ``(i, j)`` straddles the vertical edge ``x = i dx`` between
cells ``(i-1, j)`` and ``(i, j)``; a y-directed rooftop with anchor ``(i, j)``
straddles the horizontal edge ``y = j dy`` between cells ``(i, j-1)`` and
``(i, j)``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage


class MeshError(ValueError):
    """Raised when a mask yields an empty or disconnected active set."""


class ShapeKind(str, Enum):
    FULL = "full"
    SLOT = "slot"
    H = "h"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ShapeMask:
    """Which cells of the design region carry metal.

    Fractions are relative to the region side lengths and snap to the nearest
    cell boundary (``round(fraction * n)``), so a sweep over sizes with a fixed
    grid always removes the same cells.

    ``slot`` removes the rectangle ``slot_x x slot_y``; the defaults are the
    slot-loaded patch of the classical designs (slot across the middle half of
    the width, from the centre line to three quarters of the length).
    ``h`` removes two notches ``notch_x x [0, waist_y[0]]`` and
    ``notch_x x [waist_y[1], 1]``, leaving two bars joined by a waist.
    """

    kind: ShapeKind = ShapeKind.FULL
    slot_x: tuple[float, float] = (0.5, 0.75)
    slot_y: tuple[float, float] = (0.25, 0.75)
    notch_x: tuple[float, float] = (1 / 3, 2 / 3)
    waist_y: tuple[float, float] = (1 / 3, 2 / 3)
    custom: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def full(cls) -> "ShapeMask":
        return cls(ShapeKind.FULL)

    @classmethod
    def slot_loaded(cls, slot_x=(0.5, 0.75), slot_y=(0.25, 0.75)) -> "ShapeMask":
        return cls(ShapeKind.SLOT, slot_x=tuple(slot_x), slot_y=tuple(slot_y))

    @classmethod
    def h_shaped(cls, notch_x=(1 / 3, 2 / 3), waist_y=(1 / 3, 2 / 3)) -> "ShapeMask":
        return cls(ShapeKind.H, notch_x=tuple(notch_x), waist_y=tuple(waist_y))

    @classmethod
    def from_text(cls, text: str) -> "ShapeMask":
        """Parse a grid of ``0``/``1`` rows; the first row is the top (largest y)."""
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise MeshError("custom mask is empty")
        width = len(rows[0])
        if any(len(r) != width for r in rows) or any(set(r) - {"0", "1"} for r in rows):
            raise MeshError("custom mask rows must be equal-length strings of 0/1")
        grid = np.array([[c == "1" for c in r] for r in rows], dtype=bool)
        # text row r is y-index ny-1-r; store as [i, j]
        return cls(ShapeKind.CUSTOM, custom=grid[::-1].T.copy())

    def cells(self, nx: int, ny: int) -> np.ndarray:
        """Boolean ``(nx, ny)`` array of masked-in cells."""
        active = np.ones((nx, ny), dtype=bool)
        if self.kind == ShapeKind.FULL:
            return active
        if self.kind == ShapeKind.CUSTOM:
            if self.custom is None or self.custom.shape != (nx, ny):
                shape = None if self.custom is None else self.custom.shape
                raise MeshError(f"custom mask has shape {shape}, mesh is ({nx}, {ny})")
            return self.custom.copy()

        def span(frac, n, what):
            lo, hi = (int(round(f * n)) for f in frac)
            if not 0 <= lo < hi <= n:
                raise MeshError(f"{self.kind.value} mask {what}={frac} spans no cell on a {n}-cell axis")
            return slice(lo, hi)

        if self.kind == ShapeKind.SLOT:
            active[span(self.slot_x, nx, "slot_x"), span(self.slot_y, ny, "slot_y")] = False
        elif self.kind == ShapeKind.H:
            sx = span(self.notch_x, nx, "notch_x")
            lo, hi = (int(round(f * ny)) for f in self.waist_y)
            if not 0 < lo < hi < ny:
                raise MeshError(f"h mask waist_y={self.waist_y} does not leave both notches on {ny} rows")
            active[sx, :lo] = False
            active[sx, hi:] = False
        return active


@dataclass(frozen=True)
class DesignRegion:
    lx: float
    ly: float
    shape: ShapeMask = field(default_factory=ShapeMask.full)

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"region sides must be positive, got {self.lx}, {self.ly}")

    @classmethod
    def canonical(cls, lx: float, shape: ShapeMask | None = None) -> "DesignRegion":
        """Region with the ``ly = 0.77 lx`` aspect used throughout the studies."""
        return cls(lx, 0.77 * lx, shape or ShapeMask.full())


@dataclass(frozen=True, eq=False)
class Mesh:
    region: DesignRegion
    nx: int
    ny: int
    active: np.ndarray  # bool (nx, ny)

    @property
    def dx(self) -> float:
        return self.region.lx / self.nx

    @property
    def dy(self) -> float:
        return self.region.ly / self.ny

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def cell_centers(self) -> np.ndarray:
        i, j = np.nonzero(self.active)
        return np.column_stack([(i + 0.5) * self.dx, (j + 0.5) * self.dy])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.region.lx, self.region.ly], dtype="<f8").tobytes())
        h.update(np.array([self.nx, self.ny], dtype="<u8").tobytes())
        h.update(np.ascontiguousarray(self.active, dtype=np.uint8).tobytes())
        return h.hexdigest()[:16]


def build_mesh(region: DesignRegion, nx: int, ny: int) -> Mesh:
    if nx < 2 or ny < 2:
        raise MeshError(f"mesh needs nx, ny >= 2, got ({nx}, {ny})")
    active = region.shape.cells(nx, ny)
    if not active.any():
        raise MeshError("mask leaves no active cells")
    _, ncomp = ndimage.label(active)  # default structure is 4-connectivity
    if ncomp != 1:
        raise MeshError(f"mask splits into {ncomp} disconnected pieces (4-connectivity)")
    active.setflags(write=False)
    return Mesh(region, nx, ny, active)


def default_cells(lx_over_lambda_eps: float, ly_over_lx: float = 0.77, minimum: int = 16, per_lambda: float = 20.0) -> tuple[int, int]:
    """Cell counts giving ``dx <= lambda_eps/per_lambda`` with at least ``minimum`` cells along x."""
    nx = max(minimum, int(np.ceil(per_lambda * lx_over_lambda_eps - 1e-9)))
    ny = max(2, int(round(nx * ly_over_lx)))
    return nx, ny


@dataclass(frozen=True, eq=False)
class BasisSet:
    mesh: Mesh
    orient: np.ndarray  # 0 = x, 1 = y
    anchor: np.ndarray  # (N, 2) int edge/cell indices

    @property
    def N(self) -> int:
        return len(self.orient)

    @property
    def n_x(self) -> int:
        return int(np.count_nonzero(self.orient == 0))

    def centers(self) -> np.ndarray:
        """Rooftop centres (midpoint of the shared edge), metres."""
        m = self.mesh
        i, j = self.anchor[:, 0].astype(float), self.anchor[:, 1].astype(float)
        isx = self.orient == 0
        x = np.where(isx, i, i + 0.5) * m.dx
        y = np.where(isx, j + 0.5, j) * m.dy
        return np.column_stack([x, y])

    def dipole_moment(self) -> float:
        """Integral of a unit-peak rooftop, A m per unit coefficient."""
        return self.mesh.dx * self.mesh.dy


def build_basis(mesh: Mesh) -> BasisSet:
    a = mesh.active
    anchors, orient = [], []
    for j in range(mesh.ny):
        for i in range(1, mesh.nx):
            if a[i - 1, j] and a[i, j]:
                anchors.append((i, j))
                orient.append(0)
    for j in range(1, mesh.ny):
        for i in range(mesh.nx):
            if a[i, j - 1] and a[i, j]:
                anchors.append((i, j))
                orient.append(1)
    if not anchors:
        raise MeshError("mesh has no shared edges, so no rooftop can be placed")
    return BasisSet(mesh, np.array(orient, dtype=np.int8), np.array(anchors, dtype=np.int64))


def _sinc(u):
    u = np.asarray(u)
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    return np.where(small, 1 - u * u / 6 + u**4 / 120, np.sin(safe) / safe)


def rooftop_spectrum(orient, kx, ky, dx, dy):
    """Fourier transform of a unit-peak rooftop centred at the origin.

    ``psi(k) = integral psi(r) exp(+j k.r) dA``; real and even for real k.
    """
    sx, sy = _sinc(0.5 * kx * dx), _sinc(0.5 * ky * dy)
    if orient == 0:
        return dx * dy * sx * sx * sy
    return dx * dy * sx * sy * sy


def basis_spectrum(basis: BasisSet, kx, ky) -> np.ndarray:
    """Transform of every basis function at one wavenumber, shape ``(N,)``."""
    m = basis.mesh
    c = basis.centers()
    phase = np.exp(1j * (kx * c[:, 0] + ky * c[:, 1]))
    env = np.where(
        basis.orient == 0,
        rooftop_spectrum(0, kx, ky, m.dx, m.dy),
        rooftop_spectrum(1, kx, ky, m.dx, m.dy),
    )
    return env * phase


def rooftop_value(basis: BasisSet, n: int, x, y) -> np.ndarray:
    """Current density magnitude of basis ``n`` at points ``(x, y)`` (along its orientation)."""
    m = basis.mesh
    cx, cy = basis.centers()[n]
    if basis.orient[n] == 0:
        u, v, du, dv = x - cx, y - cy, m.dx, m.dy
    else:
        u, v, du, dv = y - cy, x - cx, m.dy, m.dx
    inside = (np.abs(u) <= du) & (np.abs(v) <= dv / 2)
    return np.where(inside, 1 - np.abs(u) / du, 0.0)
