"""Numpy implementation of the spectral weight kernels.

Reference for ``_kernels.pyx``; both expose ``node_weights`` and
``grid_weights`` with identical signatures and semantics.
"""
import numpy as np

from .constants import EPS0, MU0

NAME = "python"


def _sinc(u):
    small = np.abs(u) < 1e-4
    safe = np.where(small, 1.0, u)
    return np.where(small, 1 - u * u / 6 + u**4 / 120, np.sin(safe) / safe)


def _impedances(kr2, k, eps_r, h, omega):
    kz0 = np.sqrt(k * k - kr2)
    kz0 = np.where((kz0.imag > 0) | ((kz0.imag == 0) & (kz0.real < 0)), -kz0, kz0)
    kz1 = np.sqrt(eps_r * k * k - kr2)
    x = kz1 * h
    t = np.tan(x)
    small = np.abs(x) < 1e-6
    tanc = np.where(small, 1 + x * x / 3, t / np.where(small, 1.0, x))
    ztm_up = kz0 / (omega * EPS0)
    ztm_dn = 1j * kz1 * t / (omega * EPS0 * eps_r)
    zte_dn = 1j * omega * MU0 * h * tanc
    ztm = ztm_up * ztm_dn / (ztm_up + ztm_dn)
    zte = zte_dn / (1 + kz0 / (omega * MU0) * zte_dn)
    return ztm, zte


def _combine(kx, ky, kr2, ztm, zte, dx, dy):
    at0 = kr2 == 0
    safe = np.where(at0, 1.0, kr2)
    c2 = np.where(at0, 1.0, kx * kx / safe)
    s2 = np.where(at0, 0.0, ky * ky / safe)
    cs = np.where(at0, 0.0, kx * ky / safe)
    sx, sy = _sinc(0.5 * kx * dx), _sinc(0.5 * ky * dy)
    a = dx * dy
    fx = a * sx * sx * sy
    fy = a * sx * sy * sy
    return (
        fx * fx * (c2 * ztm + s2 * zte),
        fy * fy * (s2 * ztm + c2 * zte),
        fx * fy * cs * (ztm - zte),
    )


def node_weights(kx, ky, k, eps_r, h, omega, dx, dy):
    """Rooftop-weighted dyad entries at arbitrary (possibly complex) nodes.

    Returns ``(Sxx, Syy, Sxy)`` with ``Sxx = Phi_x^2 G_xx``,
    ``Syy = Phi_y^2 G_yy``, ``Sxy = Phi_x Phi_y G_xy``.
    """
    kx = np.asarray(kx, dtype=complex)
    ky = np.asarray(ky, dtype=complex)
    kr2 = kx * kx + ky * ky
    ztm, zte = _impedances(kr2, k, complex(eps_r), h, omega)
    return _combine(kx, ky, kr2, ztm, zte, dx, dy)


def _window(kr, a, b):
    s = np.clip((kr - a) / (b - a), 0.0, 1.0)
    inner = (s > 0) & (s < 1)
    s_in = np.where(inner, s, 0.5)
    fa = np.exp(-1 / (1 - s_in))
    fb = np.exp(-1 / s_in)
    # fraction of the blend that belongs to the outer region
    return np.where(s <= 0, 0.0, np.where(s >= 1, 1.0, fb / (fa + fb)))


def grid_weights(kx, wx, ky, wy, a, b, k, eps_r, h, omega, dx, dy, lossless):
    """Weighted entries on a real tensor grid, outside a smooth disk cut-off.

    Each output is ``(len(kx), len(ky))`` and already multiplied by
    ``wx[i] wy[j] (1 - chi(krho))`` where ``chi`` is 1 inside radius ``a``
    and 0 beyond ``b``.  For a lossless stack the kernel is purely reactive
    there, so the real part is dropped exactly.
    """
    KX, KY = np.meshgrid(np.asarray(kx, float), np.asarray(ky, float), indexing="ij")
    kr2 = KX * KX + KY * KY
    kr = np.sqrt(kr2)
    win = _window(kr, a, b) * np.outer(wx, wy)
    keep = win > 0
    out = [np.zeros(KX.shape, dtype=complex) for _ in range(3)]
    if not keep.any():
        return tuple(out)
    kxs, kys, k2s = KX[keep], KY[keep], kr2[keep].astype(complex)
    ztm, zte = _impedances(k2s, k, complex(eps_r), h, omega)
    if lossless:
        ztm, zte = 1j * ztm.imag, 1j * zte.imag
    parts = _combine(kxs, kys, k2s.real, ztm, zte, dx, dy)
    for o, p in zip(out, parts):
        o[keep] = p * win[keep]
    return tuple(out)
