"""Multi-tone cavity electromechanics: closed-form, lattice and time-domain
spectra of a mechanically compliant microwave cavity under two-tone drives,
plus the calibration and measurement protocols built on them."""

from .model import (
    BAE,
    BAEWithProbe,
    BalanceError,
    CoolingTone,
    DetunedTwoTone,
    DriveScheme,
    EffectiveMechanics,
    ParameterError,
    SingleRed,
    SystemParams,
    Tone,
    ToneRole,
    apply_cooling,
    gamma_opt,
    n_p_for_gamma_opt,
    paper_params,
)
from .spectrum import Spectrum, SpectrumKind, SpectrumReference

__all__ = [
    "BAE",
    "BAEWithProbe",
    "BalanceError",
    "CoolingTone",
    "DetunedTwoTone",
    "DriveScheme",
    "EffectiveMechanics",
    "ParameterError",
    "SingleRed",
    "Spectrum",
    "SpectrumKind",
    "SpectrumReference",
    "SystemParams",
    "Tone",
    "ToneRole",
    "apply_cooling",
    "gamma_opt",
    "n_p_for_gamma_opt",
    "paper_params",
]

__version__ = "0.1.0"
