"""Closed-form surface-wave and Q-factor estimates.

These relate a (measured or simulated) Q-factor of a half-wave patch to its
radiation efficiency and extrapolate to smaller patches.  All formulas use
the real part of the permittivity only.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Protocol

from .constants import C0, Z0
from .greens import SubstrateStack


class NonPhysicalEfficiencyError(ValueError):
    """``Q tan(delta) >= 1`` leaves no power for radiation."""


def _check_qtd(Q, tan_delta):
    if Q <= 0:
        raise ValueError(f"Q must be positive, got {Q}")
    if Q * tan_delta >= 1:
        raise NonPhysicalEfficiencyError(f"Q*tan_delta = {Q * tan_delta:.4g} >= 1; efficiency would be <= 0")


def delta_sw(eps_r_real: float, kh: float) -> float:
    """Surface-wave to radiated power ratio of a horizontal dipole on a thin slab."""
    e = float(eps_r_real)
    if e < 1:
        raise ValueError(f"eps_r_real must be >= 1, got {e}")
    if kh <= 0:
        raise ValueError(f"kh must be positive, got {kh}")
    if e > 1 and kh > math.pi / (2 * math.sqrt(e - 1)):
        warnings.warn("slab supports the TE1 surface wave; single-mode estimate is unreliable", stacklevel=2)
    return 0.75 * math.pi * (e - 1) ** 3 * kh / (e * e * (e - 1) + 0.4 * e)


def delta_rho(delta: float, delta_sw_value: float) -> float:
    """Dissipation factor with the surface-wave share removed (not clamped)."""
    if delta < 0:
        raise ValueError(f"dissipation factor must be >= 0, got {delta}")
    return delta - delta_sw_value


def efficiency_from_q(Q: float, tan_delta: float, delta_sw_value: float) -> float:
    _check_qtd(Q, tan_delta)
    return (1 - Q * tan_delta) / (1 + delta_sw_value)


def q_lossless(Q: float, tan_delta: float) -> float:
    """Q-factor with dielectric loss removed."""
    _check_qtd(Q, tan_delta)
    return Q / (1 - Q * tan_delta)


def eta_ub_from_qlb(Q_lb: float, tan_delta: float, delta_sw_value: float) -> float:
    return 1.0 / ((Q_lb * tan_delta + 1) * (delta_sw_value + 1))


def ohmic_loss_tangent(R_s: float, kh: float, variant: str = "patch_only", z0: float = Z0) -> float:
    """Equivalent loss tangent of conductor loss, patch alone or patch and ground."""
    factors = {"patch_only": 1.0, "patch_and_ground": 2.0}
    try:
        n = factors[variant]
    except KeyError:
        raise ValueError(f"variant must be one of {sorted(factors)}, got {variant!r}") from None
    if R_s < 0 or kh <= 0:
        raise ValueError("need R_s >= 0 and kh > 0")
    return n * R_s / (kh * z0)


def eta_ub_from_qlb_ohmic(Q_lb: float, R_s: float, kh: float, variant: str = "patch_only", delta_sw_value: float = 0.0) -> float:
    return eta_ub_from_qlb(Q_lb, ohmic_loss_tangent(R_s, kh, variant), delta_sw_value)


# -- Q scaling between frequencies -------------------------------------------


class QScalingRule(Protocol):
    approximate: bool

    def __call__(self, q_lb: float, f1: float, f2: float) -> float: ...

    def describe(self) -> str: ...


@dataclass(frozen=True)
class Pinned:
    """User-supplied Q_lb at the target frequency."""

    value: float
    approximate: bool = False

    def __call__(self, q_lb, f1, f2):
        return float(self.value)

    def describe(self):
        return f"pinned({self.value:g})"


@dataclass(frozen=True)
class PowerLaw:
    """``Q_lb(f2) = Q_lb(f1) (f1/f2)^p``; a heuristic, flagged approximate."""

    exponent: float = 5.0
    approximate: bool = True

    def __call__(self, q_lb, f1, f2):
        return q_lb * (f1 / f2) ** self.exponent

    def describe(self):
        return f"power_law({self.exponent:g}) [approximate]"


@dataclass(frozen=True)
class Identity:
    approximate: bool = False

    def __call__(self, q_lb, f1, f2):
        return q_lb

    def describe(self):
        return "identity"


def parse_scaling(text: str) -> QScalingRule:
    """``pinned:135.4``, ``power_law``, ``power_law:4.5`` or ``identity``."""
    name, _, arg = text.strip().partition(":")
    name = name.strip().lower().replace("-", "_")
    if name == "pinned":
        if not arg:
            raise ValueError("pinned scaling needs a value, e.g. pinned:135.4")
        return Pinned(float(arg))
    if name == "power_law":
        return PowerLaw(float(arg)) if arg else PowerLaw()
    if name == "identity":
        return Identity()
    raise ValueError(f"unknown Q scaling rule {text!r}")


@dataclass(frozen=True)
class QLinkInput:
    Q: float
    tan_delta: float
    stack: SubstrateStack
    f: float

    def __post_init__(self):
        _check_qtd(self.Q, self.tan_delta)
        if self.f <= 0:
            raise ValueError("frequency must be positive")

    def kh(self, f=None) -> float:
        return 2 * math.pi * (f or self.f) / C0 * self.stack.h


@dataclass(frozen=True)
class PipelineReport:
    Q_hw: float
    delta_sw_f1: float
    eta_f1: float
    Q_lb_f1: float
    Q_lb_f2: float
    delta_sw_f2: float
    eta_ub_f2: float
    f1: float
    f2: float
    scaling: str
    approximate: bool

    def rows(self):
        return [
            (1, "Q_hw", self.Q_hw),
            (2, "delta_sw_f1", self.delta_sw_f1),
            (3, "eta_f1", self.eta_f1),
            (4, "Q_lb_f1", self.Q_lb_f1),
            (5, "Q_lb_f2", self.Q_lb_f2),
            (6, "delta_sw_f2", self.delta_sw_f2),
            (7, "eta_ub_f2", self.eta_ub_f2),
        ]


def appendix_pipeline(measured: QLinkInput, f2: float, scaling: QScalingRule | None = None) -> PipelineReport:
    """Extrapolate the efficiency of a half-wave patch at ``f1`` to a smaller patch at ``f2``."""
    scaling = scaling or PowerLaw()
    f1 = measured.f
    if f2 > f1:
        raise ValueError(f"target frequency {f2:g} must not exceed the measured {f1:g}")
    eps = measured.stack.eps_real
    td = measured.tan_delta
    dsw1 = delta_sw(eps, measured.kh(f1))
    eta1 = efficiency_from_q(measured.Q, td, dsw1)
    qlb1 = q_lossless(measured.Q, td)
    qlb2 = scaling(qlb1, f1, f2)
    dsw2 = delta_sw(eps, measured.kh(f2))
    eta2 = eta_ub_from_qlb(qlb2, td, dsw2)
    return PipelineReport(measured.Q, dsw1, eta1, qlb1, qlb2, dsw2, eta2, f1, f2, scaling.describe(), scaling.approximate)
