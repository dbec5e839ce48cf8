"""STIRAP population-transfer simulator.

Models stimulated Raman adiabatic passage in a 3-level lambda system and in
the Tm3+:YAG 4-level + metastable level scheme, including the inhomogeneous
broadening of the Raman transition, and provides the scan/fit analysis layer
and CLI on top.
"""

from .analysis import (
    GaussianFit,
    ScanResult,
    SpectrumFeature,
    beer_efficiency,
    fit_gaussian,
    fwhm,
    predict_spectrum_features,
    scan_delay,
    scan_optical,
    scan_rabi,
    scan_two_photon,
    transfer_efficiency,
)
from .dressed import (
    DressedSystem,
    GlobalConditions,
    LocalAdiabaticity,
    MixingAngles,
    adiabaticity_local,
    dressed_system,
    global_conditions,
    mixing_angles,
)
from .dynamics import (
    DriveConfig,
    IntegrationError,
    Trajectory,
    default_window,
    evolve,
    evolve_expm_oracle,
    hamiltonian_3,
    hamiltonian_4,
    lindblad_rhs,
)
from .ensemble import EnsembleSpec, average, averaged_scan
from .kernel import BACKEND, available_backends
from .levels import (
    DecayParams,
    FieldToScheme,
    LevelScheme,
    Role,
    Variant,
    scheme_from_field,
)
from .pulses import PulsePair, effective_rabi, envelope, rabi_at

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DecayParams",
    "DressedSystem",
    "DriveConfig",
    "EnsembleSpec",
    "FieldToScheme",
    "GaussianFit",
    "GlobalConditions",
    "IntegrationError",
    "LevelScheme",
    "LocalAdiabaticity",
    "MixingAngles",
    "PulsePair",
    "Role",
    "ScanResult",
    "SpectrumFeature",
    "Trajectory",
    "Variant",
    "adiabaticity_local",
    "available_backends",
    "average",
    "averaged_scan",
    "beer_efficiency",
    "default_window",
    "dressed_system",
    "effective_rabi",
    "envelope",
    "evolve",
    "evolve_expm_oracle",
    "fit_gaussian",
    "fwhm",
    "global_conditions",
    "hamiltonian_3",
    "hamiltonian_4",
    "lindblad_rhs",
    "mixing_angles",
    "predict_spectrum_features",
    "rabi_at",
    "scan_delay",
    "scan_optical",
    "scan_rabi",
    "scan_two_photon",
    "scheme_from_field",
    "transfer_efficiency",
]
