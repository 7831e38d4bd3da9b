"""Configuration loading.

Config files are YAML with nested sections (system / amplifier / cooling /
drive / analysis).  Frequencies and rates are ordinary Hz in the file and
converted to angular frequencies here.  Unknown keys are rejected with the
full key path.  A sha256 digest of the canonicalised content identifies the
configuration in output-file headers.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .model import (
    BAE,
    BAEWithProbe,
    CoolingTone,
    DetunedTwoTone,
    DriveScheme,
    EffectiveMechanics,
    SingleRed,
    SystemParams,
    apply_cooling,
)

TWO_PI = 2.0 * math.pi

ATTOWATT = 1e-18


class ConfigError(ValueError):
    """Invalid or inconsistent configuration file."""


_SYSTEM_KEYS = {
    "omega_m", "omega_c", "kappa_L", "kappa_R", "kappa_int",
    "g0", "gamma_m0", "mass", "n_m0_thermal", "n_c_bath",
}
_HZ_KEYS = {"omega_m", "omega_c", "kappa_L", "kappa_R", "kappa_int",
            "g0", "gamma_m0"}
_AMP_KEYS = {"alpha", "added_noise_quanta"}
_COOL_KEYS = {"enabled", "n_p_cool", "offset", "n_m_T_override"}
_DRIVE_KEYS = {"scheme", "n_p_total", "Delta", "n_p_per_tone",
               "power_ratio_blue_red", "n_p_pump", "n_p_probe", "delta",
               "phi", "n_p"}
_ANALYSIS_KEYS = {"mask_width", "grid_span_linewidths", "grid_points"}
_SECTIONS = {"system", "amplifier", "cooling", "drive", "analysis"}


@dataclass(frozen=True)
class AmplifierConfig:
    """Analyzer/amplifier noise chain parameters.

    ``alpha`` converts analyzer power density (aW/Hz) to output quanta;
    ``added_noise_quanta`` is the flat amplifier floor referred to the
    cavity-output quanta scale.
    """

    alpha: float = 0.22
    added_noise_quanta: float = 26.0

    @property
    def alpha_si(self) -> float:
        """alpha in (W/Hz)^-1."""
        return self.alpha / ATTOWATT

    def s_v_hemt(self, params: SystemParams) -> float:
        """Amplifier voltage-noise floor in W/Hz."""
        return (self.added_noise_quanta * params.kappa
                / (4.0 * params.kappa_R) / self.alpha_si)


@dataclass(frozen=True)
class AnalysisConfig:
    mask_width: float = TWO_PI * 5.0  # rad/s
    grid_span_linewidths: float = 25.0
    grid_points: int = 2001


@dataclass(frozen=True)
class CoolingConfig:
    enabled: bool = True
    n_p_cool: float = 1.0e5
    offset: float = TWO_PI * 3.0e5  # rad/s below the red sideband
    n_m_T_override: Optional[float] = 15.0

    def tone(self) -> Optional[CoolingTone]:
        if not self.enabled:
            return None
        return CoolingTone(delta_omega_cool=self.offset, n_p_cool=self.n_p_cool)


@dataclass(frozen=True)
class RunConfig:
    """Everything a protocol run needs, plus the config digest."""

    params: SystemParams
    amplifier: AmplifierConfig
    cooling: CoolingConfig
    scheme: Optional[DriveScheme]
    analysis: AnalysisConfig
    digest: str
    raw: dict = field(repr=False, default_factory=dict)

    def effective_mechanics(self) -> EffectiveMechanics:
        tone = self.cooling.tone()
        if tone is None:
            return EffectiveMechanics.bare(self.params)
        return apply_cooling(self.params, tone.as_tone(self.params),
                             n_m_T_override=self.cooling.n_m_T_override)


def _check_keys(section: dict, allowed: set, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}' "
                              f"(allowed: {sorted(allowed)})")


def _require(section: dict, key: str, path: str) -> Any:
    if key not in section:
        raise ConfigError(f"missing required key '{path}.{key}'")
    return section[key]


def _build_scheme(drive: dict) -> DriveScheme:
    _check_keys(drive, _DRIVE_KEYS, "drive")
    name = _require(drive, "scheme", "drive")
    if name == "dtt":
        return DetunedTwoTone(
            Delta=TWO_PI * float(drive.get("Delta", 0.0)),
            n_p_per_tone=float(_require(drive, "n_p_per_tone", "drive")),
            power_ratio_blue_red=float(drive.get("power_ratio_blue_red", 1.0)),
        )
    if name == "bae":
        return BAE(n_p_total=float(_require(drive, "n_p_total", "drive")))
    if name == "bae_probe":
        return BAEWithProbe(
            n_p_pump=float(_require(drive, "n_p_pump", "drive")),
            n_p_probe=float(_require(drive, "n_p_probe", "drive")),
            delta=TWO_PI * float(drive.get("delta", 0.0)),
            phi=float(drive.get("phi", 0.0)),
        )
    if name == "single_red":
        return SingleRed(n_p=float(_require(drive, "n_p", "drive")))
    raise ConfigError(f"unknown drive.scheme '{name}' "
                      "(expected dtt, bae, bae_probe or single_red)")


def config_digest(raw: dict) -> str:
    """sha256 of the canonical JSON form of the raw config mapping."""
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section '{key}' "
                              f"(allowed: {sorted(_SECTIONS)})")

    system = raw.get("system")
    if system is None:
        raise ConfigError("missing required section 'system'")
    _check_keys(system, _SYSTEM_KEYS, "system")
    kwargs = {}
    for key in _SYSTEM_KEYS - {"n_c_bath"}:
        val = float(_require(system, key, "system"))
        kwargs[key] = TWO_PI * val if key in _HZ_KEYS else val
    bath = _require(system, "n_c_bath", "system")
    _check_keys(bath, {"L", "R", "int"}, "system.n_c_bath")
    kwargs["n_c_bath"] = {k: float(v) for k, v in bath.items()}
    try:
        params = SystemParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid system parameters: {exc}") from exc

    amp_raw = raw.get("amplifier", {})
    _check_keys(amp_raw, _AMP_KEYS, "amplifier")
    amplifier = AmplifierConfig(
        alpha=float(amp_raw.get("alpha", 0.22)),
        added_noise_quanta=float(amp_raw.get("added_noise_quanta", 26.0)),
    )
    if amplifier.alpha <= 0:
        raise ConfigError("amplifier.alpha must be positive")

    cool_raw = raw.get("cooling", {})
    _check_keys(cool_raw, _COOL_KEYS, "cooling")
    override = cool_raw.get("n_m_T_override", 15.0)
    cooling = CoolingConfig(
        enabled=bool(cool_raw.get("enabled", True)),
        n_p_cool=float(cool_raw.get("n_p_cool", 1.0e5)),
        offset=TWO_PI * float(cool_raw.get("offset", 3.0e5)),
        n_m_T_override=None if override is None else float(override),
    )

    scheme = None
    if "drive" in raw:
        scheme = _build_scheme(raw["drive"])

    ana_raw = raw.get("analysis", {})
    _check_keys(ana_raw, _ANALYSIS_KEYS, "analysis")
    analysis = AnalysisConfig(
        mask_width=TWO_PI * float(ana_raw.get("mask_width", 5.0)),
        grid_span_linewidths=float(ana_raw.get("grid_span_linewidths", 25.0)),
        grid_points=int(ana_raw.get("grid_points", 2001)),
    )
    if analysis.grid_points < 16:
        raise ConfigError("analysis.grid_points must be at least 16")

    return RunConfig(params=params, amplifier=amplifier, cooling=cooling,
                     scheme=scheme, analysis=analysis,
                     digest=config_digest(raw), raw=raw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    if raw is None:
        raise ConfigError(f"{path} is empty")
    return load_config_dict(raw)


def default_config() -> RunConfig:
    """The in-repo device configuration."""
    ref = importlib.resources.files("twotone.data") / "paper_default.yaml"
    raw = yaml.safe_load(ref.read_text())
    return load_config_dict(raw)
