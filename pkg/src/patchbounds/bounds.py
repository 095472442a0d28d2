"""Upper bounds on radiation efficiency and gain by current optimization.

Every bound is a quadratically constrained problem over the expansion
coefficients ``I``

    maximize    I^H P I
    subject to  I^H R_t I = 2 P_in
                I^H X I   = 0          (self-resonant variants only)

where ``P`` is ``R_r`` (efficiency) or ``F^H F`` (gain).  Without the
resonance constraint the answer is a generalized eigenvalue.  With it, the
Lagrange dual

    g(nu) = max eig(P, R_t + nu X)

is minimized over the interval where ``R_t + nu X`` stays positive definite.
``g`` is convex; its slope has the sign of ``-I^H X I`` for the dominant
eigenvector, which drives a bisection.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .constants import Z0 as _Z0

log = logging.getLogger(__name__)

P_IN = 0.5


class BoundError(RuntimeError):
    pass


class IndefiniteOperatorError(BoundError):
    """The loss operator is not positive semidefinite (assembly fault)."""


class NuRangeKind(str, Enum):
    INDEFINITE = "indefinite"
    SEMIDEFINITE = "semidefinite"
    VACUOUS = "vacuous"


@dataclass(frozen=True)
class NuRange:
    nu_lo: float
    nu_hi: float
    xi_max: float
    xi_min: float
    kind: NuRangeKind = NuRangeKind.INDEFINITE

    @property
    def width(self) -> float:
        return self.nu_hi - self.nu_lo

    def contains(self, nu: float) -> bool:
        return self.nu_lo < nu < self.nu_hi


@dataclass(frozen=True)
class GapCertificate:
    primal: float
    dual: float
    relative_gap: float
    certified: bool


@dataclass(frozen=True)
class BoundResult:
    value: float
    nu_star: float
    current: np.ndarray
    resonance_residual: float
    power_residual: float
    gap: GapCertificate
    efficiency: float
    directivity: float | None = None
    resonant: bool = False
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def certified(self) -> bool:
        return self.gap.certified


def _herm(A):
    return 0.5 * (A + A.conj().T)


def _rayleigh(I, A) -> float:
    return float(np.real(np.vdot(I, A @ I)))


class _Problem:
    """Objective ``P`` (dense, or via a factor ``F`` with ``P = F^H F``) and constraint forms."""

    def __init__(self, Rt, X, P=None, F=None, scale=1.0, tol=1e-9):
        self.Rt = _herm(np.asarray(Rt, dtype=complex))
        self.X = _herm(np.asarray(X, dtype=complex))
        self.F = None if F is None else np.asarray(F, dtype=complex)
        if P is None:
            P = self.F.conj().T @ self.F
        self.P = _herm(np.asarray(P, dtype=complex))
        self.scale = scale
        self.N = self.Rt.shape[0]
        self.small = self.F is not None and self.F.shape[0] < self.N
        self.notes: list[str] = []
        self.tol = tol

    def objective(self, I) -> float:
        return self.scale * _rayleigh(I, self.P) / _rayleigh(I, self.Rt)

    def top(self, nu, count=2, dense=False):
        """Top eigenpairs of (P, R_t + nu X) with ``v^H (R_t + nu X) v = 1``.

        Raises ``LinAlgError`` when ``R_t + nu X`` is not positive definite.
        """
        A = self.Rt + nu * self.X if nu else self.Rt
        L = sla.cholesky(A, lower=True)
        if self.small and not dense:
            # ordinary M x M form, F A^-1 F^H
            B = sla.solve_triangular(L, self.F.conj().T, lower=True)
            w, U = sla.eigh(_herm(B.conj().T @ B))
            w, U = w[::-1][:count], U[:, ::-1][:, :count]
            V = sla.solve_triangular(L.conj().T, B @ U, lower=False)
            V = V / np.sqrt(np.maximum(w, np.finfo(float).tiny))
        else:
            Linv_P = sla.solve_triangular(L, self.P, lower=True)
            C = sla.solve_triangular(L, Linv_P.conj().T, lower=True)
            n = self.N
            lo = max(0, n - count)
            w, Y = sla.eigh(_herm(C), subset_by_index=[lo, n - 1])
            w, Y = w[::-1], Y[:, ::-1]
            V = sla.solve_triangular(L.conj().T, Y, lower=False)
        return w, V

    def slope_sign(self, v) -> float:
        return _rayleigh(v, self.X)


def _ensure_pd(Rt, notes):
    Rt = _herm(Rt)
    try:
        sla.cholesky(Rt, lower=True)
        return Rt
    except sla.LinAlgError:
        pass
    ev = np.linalg.eigvalsh(Rt)
    scale = np.abs(ev).max()
    if ev[0] < -1e-8 * scale:
        raise IndefiniteOperatorError(f"loss operator is indefinite (min eig {ev[0]:.3e}, max {scale:.3e})")
    eps = 1e-12 * np.trace(Rt).real / Rt.shape[0]
    notes.append(f"regularized loss operator by {eps:.3e} * I")
    return Rt + eps * np.eye(Rt.shape[0])


def nu_range(Rt, X, rtol=1e-12) -> NuRange:
    """Interval of ``nu`` keeping ``R_t + nu X`` positive definite."""
    Rt = _herm(np.asarray(Rt, dtype=complex))
    X = _herm(np.asarray(X, dtype=complex))
    if not np.any(X):
        return NuRange(-math.inf, math.inf, 0.0, 0.0, NuRangeKind.VACUOUS)
    L = sla.cholesky(Rt, lower=True)
    C = sla.solve_triangular(L, sla.solve_triangular(L, X, lower=True).conj().T, lower=True)
    xi = sla.eigvalsh(_herm(C))
    xi_min, xi_max = float(xi[0]), float(xi[-1])
    tiny = rtol * max(abs(xi_min), abs(xi_max))
    if xi_max <= tiny and xi_min >= -tiny:
        return NuRange(-math.inf, math.inf, xi_max, xi_min, NuRangeKind.VACUOUS)
    if xi_min >= -tiny:
        return NuRange(-1 / xi_max, math.inf, xi_max, xi_min, NuRangeKind.SEMIDEFINITE)
    if xi_max <= tiny:
        return NuRange(-math.inf, -1 / xi_min, xi_max, xi_min, NuRangeKind.SEMIDEFINITE)
    return NuRange(-1 / xi_max, -1 / xi_min, xi_max, xi_min)


def _finish(prob: _Problem, nu, v, dual, resonant, p_in=P_IN, Rr=None, gap_tol=1e-6, res_tol=1e-8):
    I = v * math.sqrt(2 * p_in / _rayleigh(v, prob.Rt))
    pRt = _rayleigh(I, prob.Rt)
    res = abs(_rayleigh(I, prob.X)) / pRt if resonant else 0.0
    pres = abs(pRt - 2 * p_in) / (2 * p_in)
    cert = certify(prob.objective(I), dual, res, pres, gap_tol, res_tol)
    eff = _rayleigh(I, Rr) / pRt if Rr is not None else cert.primal
    return I, res, pres, cert, eff


def certify(primal, dual, resonance_residual=0.0, power_residual=0.0, gap_tol=1e-6, res_tol=1e-8) -> GapCertificate:
    """Compare a feasible objective against the dual value."""
    gap = (dual - primal) / dual if dual else 0.0
    ok = gap < gap_tol and resonance_residual < res_tol and power_residual < res_tol
    return GapCertificate(float(primal), float(dual), float(gap), bool(ok))


def certify_current(result: BoundResult, I, Rt, X, P, scale=1.0, p_in=P_IN) -> GapCertificate:
    """Certificate for an arbitrary candidate current against ``result``'s dual value."""
    I = np.asarray(I, dtype=complex)
    pRt = _rayleigh(I, Rt)
    primal = scale * _rayleigh(I, P) / pRt
    res = abs(_rayleigh(I, X)) / pRt if result.resonant else 0.0
    I2 = I * math.sqrt(2 * p_in / pRt)
    pres = abs(_rayleigh(I2, Rt) - 2 * p_in) / (2 * p_in)
    return certify(primal, result.value, res, pres)


def _mix(prob: _Problem, v1, v2):
    """Combine two A-orthonormal eigenvectors so that ``I^H X I = 0``.

    Returns ``None`` when the pair cannot cancel (same-sign reactive power).
    """
    a = _rayleigh(v1, prob.X)
    d = _rayleigh(v2, prob.X)
    if a * d >= 0 or d == 0:
        return None
    c = np.vdot(v1, prob.X @ v2)
    phase = math.pi / 2 - np.angle(c)
    t = math.atan(math.sqrt(-a / d))
    return math.cos(t) * v1 + np.exp(1j * phase) * math.sin(t) * v2


def _solve_dual(prob: _Problem, rng: NuRange, nu_tol=1e-10, max_iter=200):
    """Bisection on the slope sign of ``g``.  Returns ``(nu, w, V, at_edge)``."""
    lo, hi = rng.nu_lo, rng.nu_hi
    if math.isinf(hi) or math.isinf(lo):
        # one-sided interval: grow a finite bracket until the slope changes sign
        finite = hi if math.isinf(lo) else lo
        step = max(1.0, abs(finite))
        direction = 1.0 if math.isinf(hi) else -1.0
        far = finite + direction * step
        for _ in range(60):
            try:
                w, V = prob.top(far)
            except sla.LinAlgError:
                break
            s = prob.slope_sign(V[:, 0])
            if (s < 0) if direction > 0 else (s > 0):
                break
            step *= 2
            far = finite + direction * step
        lo, hi = (finite, far) if direction > 0 else (far, finite)
        prob.notes.append("one-sided nu range (semidefinite reactance)")
    span = hi - lo
    a = lo + 1e-12 * span
    b = hi - 1e-12 * span
    best = None
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        try:
            w, V = prob.top(m)
        except sla.LinAlgError:
            # numerically outside the definite range: pull in the nearer end
            if m - lo < hi - m:
                a = m
            else:
                b = m
            continue
        best = (m, w, V)
        if prob.slope_sign(V[:, 0]) > 0:
            a = m
        else:
            b = m
        if b - a < nu_tol * span:
            break
    if best is None:
        raise BoundError("R_t + nu X never positive definite inside the nu range")
    m, w, V = best
    at_edge = min(m - lo, hi - m) < 10 * nu_tol * span
    return m, w, V, at_edge


def _resonant(prob: _Problem, Rr=None, p_in=P_IN, nu_tol=1e-10) -> BoundResult:
    rng = nu_range(prob.Rt, prob.X)
    if rng.kind is NuRangeKind.VACUOUS:
        w, V = prob.top(0.0)
        I, res, pres, cert, eff = _finish(prob, 0.0, V[:, 0], prob.scale * w[0], True, p_in, Rr)
        return BoundResult(prob.scale * w[0], 0.0, I, res, pres, cert, eff, resonant=True, notes=("reactance vanishes",))
    nu, w, V, at_edge = _solve_dual(prob, rng, nu_tol)
    dual = prob.scale * float(w[0])
    v = V[:, 0]
    if abs(prob.slope_sign(v)) > 1e-14 * _rayleigh(v, prob.Rt):
        # cancel the leftover reactive power with the nearest eigenvector of
        # opposite sign; exact at a degenerate crossing, O(residual) otherwise
        w, V = prob.top(nu, count=min(prob.N, 16), dense=True)
        best = -math.inf
        for j in range(1, V.shape[1]):
            mixed = _mix(prob, V[:, 0], V[:, j])
            if mixed is not None and prob.objective(mixed) > best:
                v, best = mixed, prob.objective(mixed)
        if abs(w[0] - w[1]) <= 1e-8 * abs(w[0]):
            prob.notes.append("degenerate top eigenvalue; two-vector combination")
    if at_edge:
        prob.notes.append("nu search ended at a range endpoint; bound may be unbounded in that direction")
    I, res, pres, cert, eff = _finish(prob, nu, v, dual, True, p_in, Rr)
    if not cert.certified:
        prob.notes.append(f"dual gap not certified (gap {cert.relative_gap:.2e}, residual {res:.2e})")
    return BoundResult(dual, nu, I, res, pres, cert, eff, resonant=True, notes=tuple(prob.notes))


def _project_radiating(Rt, X, Rr, F_s=None, rtol=1e-10):
    w, Q = np.linalg.eigh(_herm(Rr))
    keep = w > rtol * w[-1]
    Q = Q[:, keep]
    proj = lambda A: _herm(Q.conj().T @ A @ Q)  # noqa: E731
    return Q, proj(Rt), proj(X), proj(Rr), None if F_s is None else F_s @ Q


def _use_subspace(flag, N):
    return N > 1000 if flag is None else bool(flag)


def efficiency_ub_nonresonant(Rr, Rt, p_in=P_IN) -> BoundResult:
    """``max eig(R_r, R_t)`` and its eigenvector."""
    notes: list[str] = []
    Rt = _ensure_pd(np.asarray(Rt, dtype=complex), notes)
    prob = _Problem(Rt, np.zeros_like(Rt), P=Rr)
    prob.notes = notes
    w, V = prob.top(0.0, count=1)
    I, res, pres, cert, eff = _finish(prob, 0.0, V[:, 0], float(w[0]), False, p_in, Rr)
    return BoundResult(float(w[0]), 0.0, I, res, pres, cert, eff, notes=tuple(notes))


def efficiency_ub_resonant(Rr, Rt, X, F_s=None, p_in=P_IN, subspace=None, nu_tol=1e-10) -> BoundResult:
    """Self-resonant efficiency bound ``min_nu max eig(R_r, R_t + nu X)``.

    When ``F_s`` has fewer rows than columns the ``M x M`` matrix
    ``F_s (R_t + nu X)^-1 F_s^H`` is used instead of the ``N x N`` pencil.
    """
    notes: list[str] = []
    Rt = _ensure_pd(np.asarray(Rt, dtype=complex), notes)
    Rr = np.asarray(Rr, dtype=complex)
    X = np.asarray(X, dtype=complex)
    Q = None
    if _use_subspace(subspace, Rt.shape[0]):
        Q, Rt, X, Rr, F_s = _project_radiating(Rt, X, Rr, F_s)
        notes.append(f"projected onto {Q.shape[1]}-dim radiating subspace")
    prob = _Problem(Rt, X, P=Rr, F=F_s)
    prob.notes = notes
    r = _resonant(prob, Rr, p_in, nu_tol=nu_tol)
    if Q is not None:
        r = _lift(r, Q)
    return r


def _lift(r: BoundResult, Q) -> BoundResult:
    return replace(r, current=Q @ r.current)


def gain_ub(F, Rt, X, Rr=None, resonant=True, p_in=P_IN, Z0=_Z0, nu_tol=1e-10) -> BoundResult:
    """Gain bound in one direction, ``(4 pi / Z0) min_nu max eig(F (R_t + nu X)^-1 F^H)``.

    ``F`` is the ``2 x N`` far-field matrix of that direction.  When ``Rr``
    is given the directivity ``G / eta(I)`` of the optimal current is
    recorded.
    """
    notes: list[str] = []
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    Rt = _ensure_pd(np.asarray(Rt, dtype=complex), notes)
    X = np.asarray(X, dtype=complex) if resonant else np.zeros_like(Rt)
    scale = 4 * math.pi / Z0
    prob = _Problem(Rt, X, F=F, scale=scale)
    prob.notes = notes
    if resonant:
        r = _resonant(prob, Rr, p_in, nu_tol=nu_tol)
    else:
        w, V = prob.top(0.0)
        v = V[:, 0]
        if len(w) > 1 and abs(w[0] - w[1]) < 1e-8 * abs(w[0]) and Rr is not None:
            # two polarizations reach the same gain; let radiated power break the tie
            v = _tiebreak(prob, Rr, w[0])
            notes.append("degenerate gain eigenvalue; objective augmented with R_r")
        I, res, pres, cert, eff = _finish(prob, 0.0, v, scale * float(w[0]), False, p_in, Rr)
        r = BoundResult(scale * float(w[0]), 0.0, I, res, pres, cert, eff, notes=tuple(notes))
    if Rr is not None and r.efficiency > 0:
        r = replace(r, directivity=r.value / r.efficiency)
    return r


def _tiebreak(prob: _Problem, Rr, lam):
    P = prob.P + 1e-6 * lam * np.trace(prob.Rt).real / max(np.trace(Rr).real, 1e-300) * _herm(Rr)
    w, V = sla.eigh(P, prob.Rt, subset_by_index=[prob.N - 1, prob.N - 1])
    return V[:, 0]


def dual_function(nu, Rr, Rt, X, F_s=None) -> float:
    """``g(nu) = max eig(R_r, R_t + nu X)``; ``inf`` outside the definite range."""
    prob = _Problem(Rt, X, P=Rr, F=F_s)
    try:
        w, _ = prob.top(nu, count=1)
    except sla.LinAlgError:
        return math.inf
    return float(w[0])


def efficiency_bounds(ops, resonant=True, p_in=P_IN, subspace=None) -> BoundResult:
    """Efficiency bound for an :class:`~patchbounds.mom.OperatorSet`."""
    if not resonant:
        return efficiency_ub_nonresonant(ops.R_r, ops.R_total, p_in)
    return efficiency_ub_resonant(ops.R_r, ops.R_total, ops.X, ops.F_s, p_in, subspace)
