"""Dolbeault spectra and Ray-Singer torsion of line bundles on flat complex tori."""

from .errors import AbelTorsionError, ComputationError, ValidationError, VerificationError
from .spectral import EigenData, SpectrumLine, SpectrumTable, enumerate_spectrum, hermitian_eigen
from .torsion import TorsionResult, torsion_closed_form, torsion_via_zeta, zeta_expression
from .torus_model import TorusBundle, euler_characteristic, load_bundle, validate

__all__ = [
    "AbelTorsionError",
    "ComputationError",
    "EigenData",
    "SpectrumLine",
    "SpectrumTable",
    "TorsionResult",
    "TorusBundle",
    "ValidationError",
    "VerificationError",
    "enumerate_spectrum",
    "euler_characteristic",
    "hermitian_eigen",
    "load_bundle",
    "torsion_closed_form",
    "torsion_via_zeta",
    "validate",
    "zeta_expression",
]
__version__ = "0.1.0"
