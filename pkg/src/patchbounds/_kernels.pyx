# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled spectral weight kernels (see _kernels_py for the reference)."""
import numpy as np

cdef extern from "<complex.h>" nogil:
    double complex csqrt(double complex)
    double complex ctan(double complex)
    double complex csin(double complex)
    double cabs(double complex)
    double cimag(double complex)
    double creal(double complex)

from libc.math cimport sqrt, exp, sin, fabs

NAME = "cython"

cdef double EPS0 = 8.8541878128e-12
cdef double MU0 = 1.25663706212e-6


cdef inline double complex _csinc(double complex u) noexcept nogil:
    cdef double complex u2
    if cabs(u) < 1e-4:
        u2 = u * u
        return 1 - u2 / 6 + u2 * u2 / 120
    return csin(u) / u


cdef inline double _rsinc(double u) noexcept nogil:
    cdef double u2
    if fabs(u) < 1e-4:
        u2 = u * u
        return 1 - u2 / 6 + u2 * u2 / 120
    return sin(u) / u


cdef inline void _impedances(double complex kr2, double k, double complex eps_r, double h,
                             double omega, double complex* ztm, double complex* zte) noexcept nogil:
    cdef double complex kz0 = csqrt(k * k - kr2)
    if cimag(kz0) > 0 or (cimag(kz0) == 0 and creal(kz0) < 0):
        kz0 = -kz0
    cdef double complex kz1 = csqrt(eps_r * k * k - kr2)
    cdef double complex x = kz1 * h
    cdef double complex t = ctan(x)
    cdef double complex tanc
    if cabs(x) < 1e-6:
        tanc = 1 + x * x / 3
    else:
        tanc = t / x
    cdef double complex ztm_up = kz0 / (omega * EPS0)
    cdef double complex ztm_dn = 1j * kz1 * t / (omega * EPS0 * eps_r)
    cdef double complex zte_dn = 1j * omega * MU0 * h * tanc
    ztm[0] = ztm_up * ztm_dn / (ztm_up + ztm_dn)
    zte[0] = zte_dn / (1 + kz0 / (omega * MU0) * zte_dn)


def node_weights(kx, ky, double k, eps_r, double h, double omega, double dx, double dy):
    cdef double complex[::1] ckx = np.ascontiguousarray(kx, dtype=complex).ravel()
    cdef double complex[::1] cky = np.ascontiguousarray(ky, dtype=complex).ravel()
    cdef Py_ssize_t n = ckx.shape[0], i
    sxx_a = np.empty(n, dtype=complex)
    syy_a = np.empty(n, dtype=complex)
    sxy_a = np.empty(n, dtype=complex)
    cdef double complex[::1] sxx = sxx_a, syy = syy_a, sxy = sxy_a
    cdef double complex e = eps_r
    cdef double complex a, b, kr2, ztm, zte, c2, s2, cs, sx, sy, fx, fy
    cdef double area = dx * dy
    with nogil:
        for i in range(n):
            a = ckx[i]
            b = cky[i]
            kr2 = a * a + b * b
            _impedances(kr2, k, e, h, omega, &ztm, &zte)
            if kr2 == 0:
                c2 = 1
                s2 = 0
                cs = 0
            else:
                c2 = a * a / kr2
                s2 = b * b / kr2
                cs = a * b / kr2
            sx = _csinc(0.5 * a * dx)
            sy = _csinc(0.5 * b * dy)
            fx = area * sx * sx * sy
            fy = area * sx * sy * sy
            sxx[i] = fx * fx * (c2 * ztm + s2 * zte)
            syy[i] = fy * fy * (s2 * ztm + c2 * zte)
            sxy[i] = fx * fy * cs * (ztm - zte)
    shape = np.shape(kx)
    return sxx_a.reshape(shape), syy_a.reshape(shape), sxy_a.reshape(shape)


cdef inline double _window(double kr, double a, double b) noexcept nogil:
    cdef double s = (kr - a) / (b - a)
    cdef double fa, fb
    if s <= 0:
        return 0.0
    if s >= 1:
        return 1.0
    fa = exp(-1.0 / (1.0 - s))
    fb = exp(-1.0 / s)
    return fb / (fa + fb)


def grid_weights(kx, wx, ky, wy, double a, double b, double k, eps_r, double h,
                 double omega, double dx, double dy, bint lossless):
    cdef double[::1] rkx = np.ascontiguousarray(kx, dtype=float)
    cdef double[::1] rwx = np.ascontiguousarray(wx, dtype=float)
    cdef double[::1] rky = np.ascontiguousarray(ky, dtype=float)
    cdef double[::1] rwy = np.ascontiguousarray(wy, dtype=float)
    cdef Py_ssize_t nx = rkx.shape[0], ny = rky.shape[0], i, j
    sxx_a = np.zeros((nx, ny), dtype=complex)
    syy_a = np.zeros((nx, ny), dtype=complex)
    sxy_a = np.zeros((nx, ny), dtype=complex)
    cdef double complex[:, ::1] sxx = sxx_a, syy = syy_a, sxy = sxy_a
    sincx_a = np.empty(nx)
    sincy_a = np.empty(ny)
    cdef double[::1] sincx = sincx_a, sincy = sincy_a
    cdef double complex e = eps_r
    cdef double complex ztm, zte
    cdef double kr2, kr, win, c2, s2, cs, fx, fy, area = dx * dy
    with nogil:
        for i in range(nx):
            sincx[i] = _rsinc(0.5 * rkx[i] * dx)
        for j in range(ny):
            sincy[j] = _rsinc(0.5 * rky[j] * dy)
        for i in range(nx):
            for j in range(ny):
                kr2 = rkx[i] * rkx[i] + rky[j] * rky[j]
                kr = sqrt(kr2)
                win = _window(kr, a, b)
                if win == 0:
                    continue
                win = win * rwx[i] * rwy[j]
                _impedances(kr2, k, e, h, omega, &ztm, &zte)
                if lossless:
                    ztm = 1j * cimag(ztm)
                    zte = 1j * cimag(zte)
                c2 = rkx[i] * rkx[i] / kr2
                s2 = rky[j] * rky[j] / kr2
                cs = rkx[i] * rky[j] / kr2
                fx = area * sincx[i] * sincx[i] * sincy[j]
                fy = area * sincx[i] * sincy[j] * sincy[j]
                sxx[i, j] = win * fx * fx * (c2 * ztm + s2 * zte)
                syy[i, j] = win * fy * fy * (s2 * ztm + c2 * zte)
                sxy[i, j] = win * fx * fy * cs * (ztm - zte)
    return sxx_a, syy_a, sxy_a
