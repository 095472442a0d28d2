"""Physical bounds on radiation efficiency and gain of microstrip patch antennas."""
from .bounds import (
    BoundResult,
    GapCertificate,
    NuRange,
    certify,
    efficiency_bounds,
    efficiency_ub_nonresonant,
    efficiency_ub_resonant,
    gain_ub,
    nu_range,
)
from .geometry import BasisSet, DesignRegion, Mesh, ShapeMask, build_basis, build_mesh
from .greens import SubstrateStack, WaveContext, hed_farfield, spectral_dyad
from .mom import OperatorSet, assemble_operators, farfield_row, power_report, radiation_operator
from .spectral import AssemblyOptions

__version__ = "0.1.0"

__all__ = [
    "AssemblyOptions", "BasisSet", "BoundResult", "DesignRegion", "GapCertificate", "Mesh", "NuRange",
    "OperatorSet", "ShapeMask", "SubstrateStack", "WaveContext", "assemble_operators", "build_basis",
    "build_mesh", "certify", "efficiency_bounds", "efficiency_ub_nonresonant", "efficiency_ub_resonant",
    "farfield_row", "gain_ub", "hed_farfield", "nu_range", "power_report", "radiation_operator",
    "spectral_dyad",
]
