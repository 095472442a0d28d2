"""Grounded dielectric slab: spectral dyad and horizontal-dipole far field.

Time convention ``exp(+j omega t)``.  Vertical wavenumbers take the branch
``Im(kz) <= 0`` so evanescent spectra decay away from the interface.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import C0, EPS0, MU0, Z0


@dataclass(frozen=True)
class SubstrateStack:
    """Slab of complex permittivity ``eps_r = eps' (1 - j tan_delta)`` on PEC."""

    eps_r: complex
    h: float

    def __post_init__(self):
        eps = complex(self.eps_r)
        object.__setattr__(self, "eps_r", eps)
        if eps.real < 1:
            raise ValueError(f"Re(eps_r) must be >= 1, got {eps.real}")
        if eps.imag > 0:
            raise ValueError("Im(eps_r) must be <= 0 (passive, exp(+jwt))")
        if not self.h > 0:
            raise ValueError(f"thickness must be positive, got {self.h}")

    @classmethod
    def from_loss_tangent(cls, eps_real: float, tan_delta: float, h: float) -> "SubstrateStack":
        if tan_delta < 0:
            raise ValueError("tan_delta must be >= 0")
        return cls(complex(eps_real, -eps_real * tan_delta), h)

    @property
    def eps_real(self) -> float:
        return self.eps_r.real

    @property
    def tan_delta(self) -> float:
        return -self.eps_r.imag / self.eps_r.real

    @property
    def lossless(self) -> bool:
        return self.eps_r.imag == 0

    def te_mode_propagates(self, ctx: "WaveContext") -> bool:
        """True when the slab is thick enough for the first TE surface wave."""
        if self.eps_real <= 1:
            return False
        return self.h > ctx.lam / (4 * math.sqrt(self.eps_real - 1))


@dataclass(frozen=True)
class WaveContext:
    f: float
    k: float
    omega: float
    lam: float
    lambda_eps: float
    Z0: float = Z0

    @classmethod
    def at(cls, f: float, eps_real: float = 1.0) -> "WaveContext":
        if not f > 0:
            raise ValueError("frequency must be positive")
        lam = C0 / f
        return cls(f=f, k=2 * math.pi / lam, omega=2 * math.pi * f, lam=lam, lambda_eps=lam / math.sqrt(eps_real))

    @classmethod
    def for_stack(cls, f: float, stack: SubstrateStack) -> "WaveContext":
        return cls.at(f, stack.eps_real)


def kz_air(krho2, k):
    """``sqrt(k^2 - krho^2)`` on the decaying sheet (``Im <= 0``, ``Re >= 0`` when real).

    The branch is fixed explicitly so a signed zero in ``Im(krho^2)`` (e.g.
    from negative real ``kx``) cannot flip it.
    """
    kz = np.sqrt(k * k - np.asarray(krho2, dtype=complex))
    flip = (kz.imag > 0) | ((kz.imag == 0) & (kz.real < 0))
    return np.where(flip, -kz, kz)


def spectral_impedances(krho2, stack: SubstrateStack, ctx: WaveContext):
    """TM and TE impedances seen by a current sheet on the slab.

    Each is the parallel combination of the air half-space and the shorted
    slab transmission line.
    """
    k, w, eps, h = ctx.k, ctx.omega, stack.eps_r, stack.h
    krho2 = np.asarray(krho2, dtype=complex)
    kz0 = kz_air(krho2, k)
    kz1 = np.sqrt(eps * k * k - krho2)
    x = kz1 * h
    t = np.tan(x)
    small = np.abs(x) < 1e-6
    tanc = np.where(small, 1 + x * x / 3, t / np.where(small, 1.0, x))
    ztm_up = kz0 / (w * EPS0)
    ztm_dn = 1j * kz1 * t / (w * EPS0 * eps)
    zte_dn = 1j * w * MU0 * h * tanc
    ztm = ztm_up * ztm_dn / (ztm_up + ztm_dn)
    zte = zte_dn / (1 + kz0 / (w * MU0) * zte_dn)
    return ztm, zte


def spectral_dyad(kx, ky, stack: SubstrateStack, ctx: WaveContext) -> np.ndarray:
    """2x2 dyad ``G`` with ``E_t = -G J`` in the spectral domain.

    Broadcasts over ``kx``, ``ky``; the dyad occupies the last two axes.
    """
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=complex), np.asarray(ky, dtype=complex))
    kr2 = kx * kx + ky * ky
    ztm, zte = spectral_impedances(kr2, stack, ctx)
    at_origin = kr2 == 0
    safe = np.where(at_origin, 1.0, kr2)
    c2 = np.where(at_origin, 1.0, kx * kx / safe)
    s2 = np.where(at_origin, 0.0, ky * ky / safe)
    cs = np.where(at_origin, 0.0, kx * ky / safe)
    g = np.empty(kx.shape + (2, 2), dtype=complex)
    g[..., 0, 0] = c2 * ztm + s2 * zte
    g[..., 1, 1] = s2 * ztm + c2 * zte
    g[..., 0, 1] = g[..., 1, 0] = cs * (ztm - zte)
    return g


def _hed_x(theta, phi, stack: SubstrateStack, ctx: WaveContext, moment):
    k, eps, h = ctx.k, stack.eps_r, stack.h
    ct, st = np.cos(theta), np.sin(theta)
    n = np.sqrt(eps - st * st + 0j)
    cot = 1 / np.tan(k * h * n)
    pref = ctx.Z0 / (2 * math.pi) * moment
    f_theta = pref * (-1j * k * n * np.cos(phi) * ct) / (n - 1j * eps * ct * cot)
    f_phi = pref * (1j * k * np.sin(phi) * ct) / (ct - 1j * n * cot)
    return f_theta, f_phi


def hed_farfield(theta, phi, orientation, stack: SubstrateStack, ctx: WaveContext, dipole_moment=1.0):
    """Far field ``(F_theta, F_phi)`` in volts of a horizontal dipole on the slab.

    ``orientation`` is ``"x"`` or ``"y"``; the y pattern is the x pattern
    rotated by 90 degrees in azimuth.  Grazing and below (theta >= pi/2) is
    rejected.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta >= math.pi / 2) or np.any(theta < 0):
        raise ValueError("far field is defined for 0 <= theta < pi/2")
    if orientation in ("x", 0):
        return _hed_x(theta, phi, stack, ctx, dipole_moment)
    if orientation in ("y", 1):
        return _hed_x(theta, np.asarray(phi) - math.pi / 2, stack, ctx, dipole_moment)
    raise ValueError(f"orientation must be 'x' or 'y', got {orientation!r}")


def warn_if_multimode(stack: SubstrateStack, ctx: WaveContext) -> bool:
    if stack.te_mode_propagates(ctx):
        warnings.warn(
            f"h = {stack.h:g} m exceeds the TE1 cutoff at {ctx.f:g} Hz; "
            "more than one surface-wave mode propagates",
            stacklevel=2,
        )
        return True
    return False
