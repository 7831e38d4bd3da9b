"""Device parameters, drive configurations and derived quantities.

Everything internal is SI with angular frequencies (rad/s).  Config files
use ordinary frequencies in Hz and are converted on load (see config.py).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

# CODATA 2018
HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23  # J/K

TWO_PI = 2.0 * math.pi

PORTS = ("L", "R", "int")


class ParameterError(ValueError):
    """Invalid physical parameter (non-positive rate, bad geometry, ...)."""


class BalanceError(ValueError):
    """Drive-tone balance violates a formula's assumptions."""


@dataclass(frozen=True)
class Constants:
    """Fundamental constants. Immutable; fixed CODATA values."""

    hbar: float = HBAR
    kB: float = KB


@dataclass(frozen=True)
class SystemParams:
    """Fixed device constants.

    All frequencies/rates are angular (rad/s).  ``n_c_bath`` maps the cavity
    ports L, R, int to their thermal photon occupancies.
    """

    omega_m: float
    omega_c: float
    kappa_L: float
    kappa_R: float
    kappa_int: float
    g0: float
    gamma_m0: float
    mass: float
    n_m0_thermal: float
    n_c_bath: Mapping[str, float] = field(
        default_factory=lambda: {"L": 0.0, "R": 0.0, "int": 0.0}
    )

    def __post_init__(self):
        for name in ("omega_m", "omega_c", "kappa_L", "kappa_R", "kappa_int",
                     "g0", "gamma_m0", "mass"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be strictly positive")
        if set(self.n_c_bath) != set(PORTS):
            raise ParameterError(f"n_c_bath must have ports {PORTS}")
        for port, n in self.n_c_bath.items():
            if n < 0:
                raise ParameterError(f"n_c_bath[{port!r}] must be >= 0")
        object.__setattr__(self, "n_c_bath", dict(self.n_c_bath))
        if not math.isfinite(self.x_zp) or self.x_zp <= 0:
            raise ParameterError("derived x_zp is not finite and positive")

    @property
    def kappa(self) -> float:
        """Total cavity linewidth; by construction the sum of the port rates."""
        return self.kappa_L + self.kappa_R + self.kappa_int

    @property
    def x_zp(self) -> float:
        """Zero-point displacement amplitude sqrt(hbar / (2 m omega_m))."""
        return math.sqrt(HBAR / (2.0 * self.mass * self.omega_m))

    @property
    def n_c(self) -> float:
        """Port-rate-weighted total cavity occupancy."""
        k = {"L": self.kappa_L, "R": self.kappa_R, "int": self.kappa_int}
        return sum(k[p] * self.n_c_bath[p] for p in PORTS) / self.kappa

    @property
    def sideband_resolved(self) -> bool:
        return self.omega_m > self.kappa

    def require_sideband_resolved(self) -> None:
        if not self.sideband_resolved:
            raise ParameterError(
                "scheme requires sideband resolution omega_m > kappa "
                f"(omega_m={self.omega_m:.3g}, kappa={self.kappa:.3g})"
            )

    def with_cavity_occupancy(self, n_c: float) -> "SystemParams":
        """Copy with L/int bath occupancies scaled so the weighted total is n_c.

        The R-port occupancy is left untouched (it is set by the output line,
        not by injected noise).  Injected noise enters through the input side.
        """
        if n_c < 0:
            raise ParameterError("n_c must be >= 0")
        k = {"L": self.kappa_L, "R": self.kappa_R, "int": self.kappa_int}
        target = n_c * self.kappa - k["R"] * self.n_c_bath["R"]
        if target < 0:
            raise ParameterError(
                "requested n_c below the contribution of the R-port bath"
            )
        # put the injected part on the L port
        bath = dict(self.n_c_bath)
        bath["L"] = target / k["L"] - k["int"] * bath["int"] / k["L"]
        if bath["L"] < 0:
            bath["int"] = 0.0
            bath["L"] = target / k["L"]
        return replace(self, n_c_bath=bath)


class ToneRole(Enum):
    PUMP_RED = "pump_red"
    PUMP_BLUE = "pump_blue"
    PROBE_RED = "probe_red"
    PROBE_BLUE = "probe_blue"
    COOLING = "cooling"


@dataclass(frozen=True)
class Tone:
    """One applied drive tone.

    ``detuning_from_cavity`` is the lab-frame offset from the cavity
    resonance (rad/s); red-side tones have negative detuning.
    ``photon_number`` is the intracavity photon number of this tone alone.
    """

    detuning_from_cavity: float
    photon_number: float
    phase: float = 0.0
    role: ToneRole = ToneRole.PUMP_RED

    def __post_init__(self):
        if self.photon_number < 0:
            raise ParameterError("photon_number must be >= 0")
        red_roles = (ToneRole.PUMP_RED, ToneRole.PROBE_RED, ToneRole.COOLING)
        if self.role in red_roles and self.detuning_from_cavity > 0:
            raise ParameterError(f"{self.role} tone must have negative detuning")
        if self.role in (ToneRole.PUMP_BLUE, ToneRole.PROBE_BLUE) and \
                self.detuning_from_cavity < 0:
            raise ParameterError(f"{self.role} tone must have positive detuning")

    @property
    def amplitude(self) -> complex:
        """Complex field amplitude (|A|^2 = photon number)."""
        return math.sqrt(self.photon_number) * complex(
            math.cos(self.phase), math.sin(self.phase)
        )


@dataclass(frozen=True)
class CoolingTone:
    """Auxiliary red-detuned cooling tone, offset below the red sideband."""

    delta_omega_cool: float  # offset below -omega_m (rad/s), > 0
    n_p_cool: float

    def as_tone(self, params: SystemParams) -> Tone:
        return Tone(
            detuning_from_cavity=-(params.omega_m + self.delta_omega_cool),
            photon_number=self.n_p_cool,
            role=ToneRole.COOLING,
        )


@dataclass(frozen=True)
class DriveScheme:
    """Base class for the drive configurations."""

    cooling: Optional[CoolingTone] = None

    def tones(self, params: SystemParams) -> list[Tone]:
        raise NotImplementedError

    def check(self, params: SystemParams, eff: "EffectiveMechanics" = None) -> None:
        if self.cooling is not None and eff is not None:
            if self.cooling.delta_omega_cool < 20.0 * eff.gamma_m:
                warnings.warn(
                    "cooling offset is not well separated from the mechanical "
                    "linewidth; independent-tone treatment is questionable",
                    stacklevel=2,
                )


@dataclass(frozen=True)
class DetunedTwoTone(DriveScheme):
    """Balanced tones at +-(omega_m + Delta); measures both quadratures."""

    Delta: float = 0.0  # rad/s
    n_p_per_tone: float = 0.0
    power_ratio_blue_red: float = 1.0

    def tones(self, params: SystemParams) -> list[Tone]:
        nu = params.omega_m + self.Delta
        r = self.power_ratio_blue_red
        # split the imbalance symmetrically so total power is conserved
        n_red = self.n_p_per_tone * 2.0 / (1.0 + r)
        n_blue = self.n_p_per_tone * 2.0 * r / (1.0 + r)
        return [
            Tone(-nu, n_red, role=ToneRole.PUMP_RED),
            Tone(+nu, n_blue, role=ToneRole.PUMP_BLUE),
        ]

    @property
    def balanced(self) -> bool:
        return abs(self.power_ratio_blue_red - 1.0) < 1e-12


@dataclass(frozen=True)
class BAE(DriveScheme):
    """Back-action evading pair at exactly +-omega_m.

    ``n_p_total`` counts photons from both tones together.
    """

    n_p_total: float = 0.0

    def tones(self, params: SystemParams) -> list[Tone]:
        n = self.n_p_total / 2.0
        return [
            Tone(-params.omega_m, n, role=ToneRole.PUMP_RED),
            Tone(+params.omega_m, n, role=ToneRole.PUMP_BLUE),
        ]


@dataclass(frozen=True)
class BAEWithProbe(DriveScheme):
    """BAE pump pair plus a weak probe pair offset by delta with phase phi."""

    n_p_pump: float = 0.0
    n_p_probe: float = 0.0
    delta: float = 0.0  # rad/s
    phi: float = 0.0  # rad

    def tones(self, params: SystemParams) -> list[Tone]:
        wm = params.omega_m
        np_pump = self.n_p_pump / 2.0
        np_probe = self.n_p_probe / 2.0
        return [
            Tone(-wm, np_pump, role=ToneRole.PUMP_RED),
            Tone(+wm, np_pump, role=ToneRole.PUMP_BLUE),
            Tone(-wm + self.delta, np_probe, phase=self.phi,
                 role=ToneRole.PROBE_RED),
            Tone(+wm + self.delta, np_probe, phase=-self.phi,
                 role=ToneRole.PROBE_BLUE),
        ]

    def check(self, params, eff=None):
        super().check(params, eff)
        if self.n_p_probe > self.n_p_pump:
            raise BalanceError("probe stronger than pump: perturbative "
                               "formulas invalid")


@dataclass(frozen=True)
class SingleRed(DriveScheme):
    """Single red-detuned tone at -omega_m (thermal-calibration pump)."""

    n_p: float = 0.0

    def tones(self, params: SystemParams) -> list[Tone]:
        return [Tone(-params.omega_m, self.n_p, role=ToneRole.PUMP_RED)]


@dataclass(frozen=True)
class EffectiveMechanics:
    """Mechanical linewidth/occupancy after cavity cooling is folded in."""

    gamma_m: float
    n_m_T: float

    def __post_init__(self):
        if self.gamma_m <= 0:
            raise ParameterError("gamma_m must be positive")
        if self.n_m_T < 0:
            raise ParameterError("n_m_T must be >= 0")

    @classmethod
    def bare(cls, params: SystemParams) -> "EffectiveMechanics":
        return cls(gamma_m=params.gamma_m0, n_m_T=params.n_m0_thermal)


def derive_xzp(params: SystemParams) -> float:
    """Zero-point amplitude sqrt(hbar/(2 m omega_m)) in metres."""
    return params.x_zp


def mass_for_xzp(x_zp: float, omega_m: float) -> float:
    """Mass that yields the requested zero-point amplitude."""
    if x_zp <= 0 or omega_m <= 0:
        raise ParameterError("x_zp and omega_m must be positive")
    return HBAR / (2.0 * omega_m * x_zp ** 2)


def gamma_opt(params: SystemParams, n_p: float) -> float:
    """Optical damping rate 4 g0^2 n_p / kappa of a detuned tone."""
    if n_p < 0:
        raise ParameterError("n_p must be >= 0")
    return 4.0 * params.g0 ** 2 * n_p / params.kappa


def n_p_for_gamma_opt(params: SystemParams, gamma: float) -> float:
    """Photon number producing the requested optical damping rate."""
    return gamma * params.kappa / (4.0 * params.g0 ** 2)


def apply_cooling(params: SystemParams, cooling: Tone,
                  n_m_T_override: float | None = None) -> EffectiveMechanics:
    """Fold a red-detuned cooling tone into an effective mechanical mode.

    Standard weighted-bath composition: the optical bath enters with weight
    Gamma_opt and occupancy n_c + (kappa/4 omega_m)^2.  The occupancy closure
    is not constrained by measurement, so ``n_m_T_override`` lets protocol
    runs pin the cooled occupancy to a measured value.
    """
    if cooling.detuning_from_cavity > 0:
        raise ParameterError("blue-detuned cooling tone: anti-damping "
                             "unsupported")
    g_cool = gamma_opt(params, cooling.photon_number)
    gamma_m = params.gamma_m0 + g_cool
    if n_m_T_override is not None:
        return EffectiveMechanics(gamma_m=gamma_m, n_m_T=n_m_T_override)
    n_bad_cool = (params.kappa / (4.0 * params.omega_m)) ** 2
    n_m_T = (params.gamma_m0 * params.n_m0_thermal
             + g_cool * (params.n_c + n_bad_cool)) / gamma_m
    return EffectiveMechanics(gamma_m=gamma_m, n_m_T=n_m_T)


def occupancy_from_temperature(params: SystemParams, T_m: float) -> float:
    """Thermal phonon occupancy kB T / (hbar omega_m) (high-T convention)."""
    if T_m <= 0:
        raise ParameterError("T_m must be positive")
    return KB * T_m / (HBAR * params.omega_m)


def temperature_from_occupancy(params: SystemParams, n_m: float) -> float:
    return n_m * HBAR * params.omega_m / KB


def paper_params() -> SystemParams:
    """Device constants of the default configuration."""
    return SystemParams(
        omega_m=TWO_PI * 4.0e6,
        omega_c=TWO_PI * 5.4e9,
        kappa_L=TWO_PI * 0.31e6,
        kappa_R=TWO_PI * 0.45e6,
        kappa_int=TWO_PI * 0.10e6,
        g0=TWO_PI * 13.8,
        gamma_m0=TWO_PI * 10.0,
        mass=6.5e-13,
        n_m0_thermal=104.0,
        n_c_bath={"L": 0.0, "R": 0.2, "int": 0.0},
    )
