"""Closed-form rotating-wave spectral densities for the drive schemes,
plus the cavity-output / voltage-noise conversion chain.

Area bookkeeping: a Lorentzian ``A * g / ((w - w0)^2 + (g/2)^2)`` integrates
to ``A`` over ordinary frequency, so variances are carried directly by the
``A`` coefficients below.  Mechanical variances are quoted in x_zp^2 units as
(1 + 2n) with n the relevant occupancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    BAE,
    BAEWithProbe,
    BalanceError,
    DetunedTwoTone,
    EffectiveMechanics,
    HBAR,
    ParameterError,
    SystemParams,
    gamma_opt,
)
from .spectrum import Spectrum, SpectrumKind, SpectrumReference

TWO_PI = 2.0 * math.pi


def lorentzian(omega: np.ndarray, fwhm: float, area: float = 1.0,
               center: float = 0.0) -> np.ndarray:
    """Lorentzian with unit-area normalisation per ordinary frequency."""
    return area * fwhm / ((omega - center) ** 2 + (fwhm / 2.0) ** 2)


@dataclass(frozen=True)
class BackactionBudget:
    """Decomposition of quadrature variance into occupancy contributions."""

    n_m_T: float
    n_ba: float  # detuned-two-tone measurement back-action
    n_ba_BAE: float  # back-action into the unmeasured quadrature
    n_bad: float  # sideband-resolution leakage into the measured quadrature
    n_extra: float  # probe-tone back-action
    n_c: float

    def __post_init__(self):
        for name in ("n_m_T", "n_ba", "n_ba_BAE", "n_bad", "n_extra", "n_c"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")


def dtt_backaction_occupancy(params: SystemParams, eff: EffectiveMechanics,
                             scheme: DetunedTwoTone) -> float:
    """Measurement heating (Gamma_opt/Gamma_m)(2 n_c + 1) per tone pair."""
    g_opt = gamma_opt(params, scheme.n_p_per_tone)
    return (g_opt / eff.gamma_m) * (2.0 * params.n_c + 1.0)


def s_x_dtt(omega: np.ndarray, params: SystemParams, eff: EffectiveMechanics,
            scheme: DetunedTwoTone) -> Spectrum:
    """Displacement spectrum under a balanced detuned two-tone drive.

    Lorentzian of width gamma_m and area x_zp^2 (1 + 2 n_bar) with
    n_bar = n_m_T + n_ba.  Offsets are from the mechanical resonance.
    """
    if not scheme.balanced:
        raise BalanceError("unbalanced tones: balanced closed form invalid")
    n_bar = eff.n_m_T + dtt_backaction_occupancy(params, eff, scheme)
    area = params.x_zp ** 2 * (1.0 + 2.0 * n_bar)
    vals = lorentzian(np.asarray(omega, float), eff.gamma_m, area)
    return Spectrum(omega, vals, SpectrumKind.MECHANICAL_X,
                    SpectrumReference.MECHANICAL_RESONANCE,
                    {"n_bar": n_bar})


def sideband_weights(params: SystemParams, eff: EffectiveMechanics,
                     scheme: DetunedTwoTone,
                     n_m_bar: float | None = None) -> tuple[float, float]:
    """(red, blue) Lorentzian weights of the two motional sidebands.

    The up-converted (red-pump) sideband carries n_bar + n_cR - 2 n_c, the
    down-converted one n_bar + 1 - n_cR + 2 n_c; their average is n_bar + 1/2
    for any cavity-noise configuration.
    """
    if n_m_bar is None:
        n_m_bar = eff.n_m_T + dtt_backaction_occupancy(params, eff, scheme)
    n_c = params.n_c
    n_cR = params.n_c_bath["R"]
    w_red = n_m_bar + n_cR - 2.0 * n_c
    w_blue = n_m_bar + 1.0 - n_cR + 2.0 * n_c
    return w_red, w_blue


def sideband_floor(params: SystemParams) -> float:
    """Flat background of an output sideband spectrum (quanta units)."""
    n_c = params.n_c
    n_cR = params.n_c_bath["R"]
    return 0.5 + n_cR + 4.0 * params.kappa_R / params.kappa * (n_c - n_cR)


def sideband_out(omega: np.ndarray, params: SystemParams,
                 eff: EffectiveMechanics, scheme: DetunedTwoTone,
                 side: str, n_m_bar: float | None = None) -> Spectrum:
    """Output spectrum of one motional sideband, offsets from its centre.

    ``side`` is "red" (up-converted) or "blue" (down-converted).  Valid for
    offsets much smaller than kappa.
    """
    if side not in ("red", "blue"):
        raise ValueError("side must be 'red' or 'blue'")
    w_red, w_blue = sideband_weights(params, eff, scheme, n_m_bar)
    weight = w_red if side == "red" else w_blue
    g_opt = gamma_opt(params, scheme.n_p_per_tone)
    area = (params.kappa_R / params.kappa) * g_opt * weight
    vals = sideband_floor(params) + lorentzian(np.asarray(omega, float),
                                               eff.gamma_m, area)
    return Spectrum(omega, vals, SpectrumKind.CAVITY_OUTPUT_QUANTA,
                    SpectrumReference.SIDEBAND_CENTER,
                    {"side": side, "weight": weight})


@dataclass(frozen=True)
class QuadratureSpectra:
    s_x1: Spectrum
    s_x2: Spectrum
    s_xphi: Spectrum
    budget: BackactionBudget


def bae_backaction_budget(params: SystemParams, eff: EffectiveMechanics,
                          scheme: BAE | BAEWithProbe,
                          n_extra_prefactor: float = 1.0) -> BackactionBudget:
    """Occupancy budget for the BAE quadratures.

    n_ba_BAE uses the total photon number of the pump pair; n_bad is the
    exact (1/32)(kappa/omega_m)^2 fraction of it; n_extra carries the probe
    back-action with an order-unity prefactor knob (the theory fixes only
    its scaling).
    """
    if isinstance(scheme, BAEWithProbe):
        n_p_pump, n_p_probe, phi = scheme.n_p_pump, scheme.n_p_probe, scheme.phi
        scheme.check(params)
    else:
        n_p_pump, n_p_probe, phi = scheme.n_p_total, 0.0, 0.0
    params.require_sideband_resolved()
    n_c = params.n_c
    g_opt = gamma_opt(params, n_p_pump)
    n_ba_bae = (g_opt / eff.gamma_m) * (2.0 * n_c + 1.0)
    n_bad = (1.0 / 32.0) * (params.kappa / params.omega_m) ** 2 * n_ba_bae
    n_extra = 0.0
    if n_p_probe > 0:
        n_extra = (n_extra_prefactor * n_ba_bae * math.sin(phi) ** 2
                   * (n_p_probe / n_p_pump))
    return BackactionBudget(n_m_T=eff.n_m_T, n_ba=0.0, n_ba_BAE=n_ba_bae,
                            n_bad=n_bad, n_extra=n_extra, n_c=n_c)


def s_quadratures_bae(omega: np.ndarray, params: SystemParams,
                      eff: EffectiveMechanics, scheme: BAE | BAEWithProbe,
                      n_extra_prefactor: float = 1.0) -> QuadratureSpectra:
    """Quadrature spectra S_X1, S_X2 and the rotated S_Xphi under BAE drive.

    S_X2 carries the measurement back-action n_ba_BAE; S_X1 only the
    sideband-resolution leakage n_bad plus the probe term n_extra.
    S_Xphi = cos^2(phi) S_X1 + sin^2(phi) S_X2.
    """
    budget = bae_backaction_budget(params, eff, scheme, n_extra_prefactor)
    omega = np.asarray(omega, float)
    xzp2 = params.x_zp ** 2
    a1 = xzp2 * (1.0 + 2.0 * (budget.n_m_T + budget.n_bad + budget.n_extra))
    a2 = xzp2 * (1.0 + 2.0 * (budget.n_m_T + budget.n_ba_BAE))
    v1 = lorentzian(omega, eff.gamma_m, a1)
    v2 = lorentzian(omega, eff.gamma_m, a2)
    phi = scheme.phi if isinstance(scheme, BAEWithProbe) else 0.0
    vphi = math.cos(phi) ** 2 * v1 + math.sin(phi) ** 2 * v2
    ref = SpectrumReference.MECHANICAL_RESONANCE
    return QuadratureSpectra(
        s_x1=Spectrum(omega, v1, SpectrumKind.QUADRATURE_X1, ref),
        s_x2=Spectrum(omega, v2, SpectrumKind.QUADRATURE_X2, ref),
        s_xphi=Spectrum(omega, vphi, SpectrumKind.QUADRATURE_PHI, ref,
                        {"phi": phi}),
        budget=budget,
    )


def cavity_output_noise(omega: np.ndarray,
                        params: SystemParams) -> Spectrum:
    """Noise-only output spectrum: cavity Lorentzian on a flat floor.

    Offsets are from the cavity resonance; no drive tones are assumed.
    """
    omega = np.asarray(omega, float)
    n_c = params.n_c
    n_cR = params.n_c_bath["R"]
    kap = params.kappa
    vals = (params.kappa_R * kap / ((kap / 2.0) ** 2 + omega ** 2)
            * (n_c - n_cR) + n_cR + 0.5)
    return Spectrum(omega, vals, SpectrumKind.CAVITY_OUTPUT_QUANTA,
                    SpectrumReference.CAVITY_RESONANCE)


class NoiseConversion:
    """Affine chain between output quanta and spectrum-analyzer voltage noise.

    ``alpha`` is the conversion factor in (W/Hz)^-1 (configs quote it per
    aW/Hz); ``s_v_hemt`` is the amplifier floor in W/Hz.
    """

    def __init__(self, params: SystemParams, alpha: float, s_v_hemt: float):
        if alpha <= 0:
            raise ParameterError("alpha must be positive")
        self.params = params
        self.alpha = alpha
        self.s_v_hemt = s_v_hemt

    def to_voltage(self, spectrum: Spectrum) -> Spectrum:
        if spectrum.kind is not SpectrumKind.CAVITY_OUTPUT_QUANTA:
            raise ValueError("voltage conversion needs an output-quanta "
                             "spectrum")
        p = self.params
        vals = (spectrum.values * p.kappa / (4.0 * p.kappa_R) / self.alpha
                + self.s_v_hemt)
        return Spectrum(spectrum.freq, vals, SpectrumKind.VOLTAGE_NOISE,
                        spectrum.reference, dict(spectrum.meta))

    def eta(self) -> float:
        """On-resonance voltage noise density with the device connected."""
        p = self.params
        n_c = p.n_c
        n_cR = p.n_c_bath["R"]
        return ((n_c - n_cR + p.kappa / (4.0 * p.kappa_R) * n_cR
                 + p.kappa / (8.0 * p.kappa_R)) / self.alpha + self.s_v_hemt)

    def eta0(self) -> float:
        """Calibration-mode floor (short connected): vacuum plus amplifier."""
        p = self.params
        return p.kappa / (8.0 * p.kappa_R) / self.alpha + self.s_v_hemt

    def delta_eta(self) -> float:
        return self.eta() - self.eta0()

    def n_c_from_delta_eta(self, delta_eta: float,
                           n_cR: float | None = None) -> float:
        p = self.params
        if n_cR is None:
            n_cR = p.n_c_bath["R"]
        corr = (4.0 * p.kappa_R - p.kappa) / (4.0 * p.kappa_R)
        return self.alpha * delta_eta + corr * n_cR

    def delta_eta_from_n_c(self, n_c: float,
                           n_cR: float | None = None) -> float:
        p = self.params
        if n_cR is None:
            n_cR = p.n_c_bath["R"]
        corr = (4.0 * p.kappa_R - p.kappa) / (4.0 * p.kappa_R)
        return (n_c - corr * n_cR) / self.alpha


def imprecision_variance(noise_floor_sx0: float, gamma_m: float) -> float:
    """Variance of a Lorentzian with peak at the noise floor and FWHM gamma_m.

    This is the additive-noise bookkeeping for the measurement floor:
    area = S_x0 * gamma_m / 4 per ordinary frequency.
    """
    if noise_floor_sx0 < 0:
        raise ParameterError("noise floor must be >= 0")
    return noise_floor_sx0 * gamma_m / 4.0


def quantum_limit_imprecision(params: SystemParams, n_p: float,
                              gamma_m: float) -> float:
    """Quantum-limited imprecision x_zp^2 gamma_m / (8 Gamma_opt)."""
    return params.x_zp ** 2 * gamma_m / (8.0 * gamma_opt(params, n_p))


def imprecision(noise_floor_sx0: float, eff: EffectiveMechanics,
                params: SystemParams, n_p: float) -> tuple[float, float]:
    """(imprecision variance, quantum-limit variance), both in m^2."""
    return (imprecision_variance(noise_floor_sx0, eff.gamma_m),
            quantum_limit_imprecision(params, n_p, eff.gamma_m))


def backaction_force_psd(backaction_var_x1: float, params: SystemParams,
                         gamma_m: float) -> float:
    """Force PSD whose drive reproduces the measured-quadrature back-action.

    Normalised so a white force of this density, filtered by a Lorentzian
    quadrature response of linewidth gamma_m, yields the given variance:
    S_F = m^2 omega_m^2 gamma_m <X1^2>_ba.  See README for the derivation
    and the cross-checks against the reported noise products.
    """
    if backaction_var_x1 < 0:
        raise ParameterError("back-action variance must be >= 0")
    return (params.mass ** 2 * params.omega_m ** 2 * gamma_m
            * backaction_var_x1)


def noise_product(imprecision_floor_sx1: float, force_psd: float) -> float:
    """Detector noise product sqrt(S_X1 S_F) in units of hbar."""
    return math.sqrt(imprecision_floor_sx1 * force_psd) / HBAR


def noise_product_from_variances(imprecision_var: float,
                                 backaction_var: float,
                                 params: SystemParams,
                                 gamma_m: float) -> float:
    """Noise product from quadrature variances (m^2).

    Equivalent to sqrt(u v) in hbar units with u, v the imprecision and
    measured-quadrature back-action variances in x_zp^2 units.
    """
    floor = 4.0 * imprecision_var / gamma_m
    s_f = backaction_force_psd(backaction_var, params, gamma_m)
    return noise_product(floor, s_f)
