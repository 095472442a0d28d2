"""Method-of-moments operators on the design region.

All quadratic forms use the half-power convention, ``P = 1/2 I^H A I``:

* ``Z``      impedance matrix; ``R``/``X`` its Hermitian split
* ``R_ohm``  patch Ohmic loss, ``R_s`` times the rooftop Gram matrix
* ``F_s``    far-field rows at hemisphere quadrature nodes, scaled so that
             ``R_r = F_s^H F_s`` gives the radiated power
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import BasisSet, rooftop_spectrum
from .greens import SubstrateStack, WaveContext, hed_farfield, warn_if_multimode
from .spectral import AssemblyOptions, SpectralConvergenceError, fill_from_tables, gauss, offset_tables

log = logging.getLogger(__name__)


class DegenerateCurrentError(ValueError):
    """The current radiates no power, so efficiency is undefined."""


@dataclass(frozen=True, eq=False)
class OperatorSet:
    Z: np.ndarray
    R: np.ndarray
    X: np.ndarray
    R_ohm: np.ndarray
    F_s: np.ndarray
    metadata: dict = field(default_factory=dict)

    @cached_property
    def R_r(self) -> np.ndarray:
        R_r = self.F_s.conj().T @ self.F_s
        return 0.5 * (R_r + R_r.conj().T)

    @property
    def R_total(self) -> np.ndarray:
        return self.R + self.R_ohm

    @property
    def N(self) -> int:
        return self.Z.shape[0]


def split_rx(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"Z must be square, got shape {Z.shape}")
    ZH = Z.conj().T
    return (Z + ZH) / 2, (Z - ZH) / 2j


def assemble_impedance(basis: BasisSet, stack: SubstrateStack, ctx: WaveContext, options: AssemblyOptions | None = None) -> np.ndarray:
    opt = options or AssemblyOptions()
    warn_if_multimode(stack, ctx)
    tables = offset_tables(basis.mesh, stack, ctx, opt)
    if tables.tail_estimate > opt.tail_tolerance:
        raise SpectralConvergenceError(tables.tail_estimate, opt.tail_tolerance)
    log.debug("spectral tail estimate %.2e", tables.tail_estimate)
    return fill_from_tables(basis.orient, basis.anchor, tables)


def ohmic_gram(basis: BasisSet, R_s: float) -> np.ndarray:
    """``R_s`` times the overlap matrix of the rooftops."""
    if R_s < 0:
        raise ValueError(f"surface resistivity must be >= 0, got {R_s}")
    m = basis.mesh
    area = m.dx * m.dy
    o, a = basis.orient, basis.anchor
    same = o[:, None] == o[None, :]
    di = np.abs(a[:, None, 0] - a[None, :, 0])
    dj = np.abs(a[:, None, 1] - a[None, :, 1])
    # offset along the current direction and across it
    along = np.where(o[:, None] == 0, di, dj)
    across = np.where(o[:, None] == 0, dj, di)
    G = np.where(same & (across == 0) & (along == 0), 2 * area / 3, 0.0)
    G = np.where(same & (across == 0) & (along == 1), area / 6, G)
    return R_s * G


def farfield_matrix(basis: BasisSet, stack: SubstrateStack, ctx: WaveContext, theta, phi) -> np.ndarray:
    """Far-field rows for many directions, shape ``(..., 2, N)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta, phi = np.broadcast_arrays(theta, phi)
    m = basis.mesh
    ft_x, fp_x = hed_farfield(theta, phi, "x", stack, ctx)
    ft_y, fp_y = hed_farfield(theta, phi, "y", stack, ctx)
    st = np.sin(theta)
    kx = ctx.k * st * np.cos(phi)
    ky = ctx.k * st * np.sin(phi)
    c = basis.centers()
    phase = np.exp(1j * (kx[..., None] * c[:, 0] + ky[..., None] * c[:, 1]))
    env_x = rooftop_spectrum(0, kx, ky, m.dx, m.dy)[..., None]
    env_y = rooftop_spectrum(1, kx, ky, m.dx, m.dy)[..., None]
    isx = basis.orient == 0
    f_theta = np.where(isx, ft_x[..., None] * env_x, ft_y[..., None] * env_y) * phase
    f_phi = np.where(isx, fp_x[..., None] * env_x, fp_y[..., None] * env_y) * phase
    return np.stack([f_theta, f_phi], axis=-2)


def farfield_row(basis: BasisSet, stack: SubstrateStack, ctx: WaveContext, theta: float, phi: float) -> np.ndarray:
    """``2 x N`` matrix mapping expansion coefficients to ``(F_theta, F_phi)``."""
    return farfield_matrix(basis, stack, ctx, theta, phi)


def hemisphere_rule(n_theta: int, n_phi: int):
    """Gauss-Legendre in cos(theta) on (0, 1] times the trapezoid rule in phi.

    Nodes never reach the grazing direction.  Weights include the solid-angle
    measure.
    """
    if n_theta < 2 or n_phi < 2:
        raise ValueError("quadrature orders must be >= 2")
    u, wu = gauss(0.0, 1.0, n_theta)
    phi = np.arange(n_phi) * (2 * math.pi / n_phi)
    TH, PH = np.meshgrid(np.arccos(u), phi, indexing="ij")
    W = np.outer(wu, np.full(n_phi, 2 * math.pi / n_phi))
    return TH.ravel(), PH.ravel(), W.ravel()


def radiation_operator(basis: BasisSet, stack: SubstrateStack, ctx: WaveContext, n_theta: int = 64, n_phi: int = 128) -> np.ndarray:
    """Stacked far-field rows ``F_s`` (``2 n_theta n_phi x N``).

    Row pairs ``(2q, 2q+1)`` are the theta/phi components at node ``q``
    scaled by ``sqrt(w_q / Z0)``, so ``1/2 I^H F_s^H F_s I`` is the power
    through the upper hemisphere.
    """
    th, ph, w = hemisphere_rule(n_theta, n_phi)
    F = farfield_matrix(basis, stack, ctx, th, ph)
    F *= np.sqrt(w / ctx.Z0)[:, None, None]
    return F.reshape(-1, basis.N)


def assemble_operators(
    basis: BasisSet,
    stack: SubstrateStack,
    ctx: WaveContext,
    R_s: float = 0.0,
    options: AssemblyOptions | None = None,
) -> OperatorSet:
    opt = options or AssemblyOptions()
    Z = assemble_impedance(basis, stack, ctx, opt)
    R, X = split_rx(Z)
    m = basis.mesh
    meta = {
        "frequency": repr(ctx.f),
        "eps_r": repr(stack.eps_r),
        "h": repr(stack.h),
        "R_s": repr(float(R_s)),
        "lx": repr(m.region.lx),
        "ly": repr(m.region.ly),
        "nx": str(m.nx),
        "ny": str(m.ny),
        "mesh": m.digest(),
        "options": opt.key(),
    }
    return OperatorSet(
        Z=Z,
        R=R,
        X=X,
        R_ohm=ohmic_gram(basis, R_s),
        F_s=radiation_operator(basis, stack, ctx, opt.n_theta, opt.n_phi),
        metadata=meta,
    )


@dataclass(frozen=True)
class PowerReport:
    P_d: float
    P_r: float
    P_ohm: float
    P_sub: float
    delta: float
    efficiency: float


def _form(I, A) -> float:
    return float(np.real(np.vdot(I, A @ I)))


def power_report(I, ops: OperatorSet) -> PowerReport:
    """Power bookkeeping for a current vector.

    ``P_sub`` collects everything lost in the substrate (dielectric heating
    and surface waves).
    """
    I = np.asarray(I, dtype=complex)
    if I.shape != (ops.N,):
        raise ValueError(f"current has shape {I.shape}, operators are {ops.N}x{ops.N}")
    P_ohm = 0.5 * _form(I, ops.R_ohm)
    P_d = 0.5 * _form(I, ops.R) + P_ohm
    P_r = 0.5 * float(np.sum(np.abs(ops.F_s @ I) ** 2))
    if not P_r > 0:
        raise DegenerateCurrentError("current radiates no power; efficiency undefined")
    delta = (P_d - P_r) / P_r
    return PowerReport(P_d, P_r, P_ohm, P_d - P_r - P_ohm, delta, P_r / P_d)
