import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twotone.model import (
    BAE,
    BAEWithProbe,
    BalanceError,
    CoolingTone,
    DetunedTwoTone,
    EffectiveMechanics,
    ParameterError,
    SystemParams,
    Tone,
    ToneRole,
    apply_cooling,
    derive_xzp,
    gamma_opt,
    mass_for_xzp,
    n_p_for_gamma_opt,
    occupancy_from_temperature,
    paper_params,
    temperature_from_occupancy,
)

TWO_PI = 2.0 * math.pi


@pytest.fixture
def params():
    return paper_params()


def test_xzp_default_device(params):
    # mass chosen so the zero-point amplitude lands at ~1.8 fm
    assert derive_xzp(params) == pytest.approx(1.797e-15, rel=1e-3)


def test_mass_xzp_round_trip(params):
    m = mass_for_xzp(params.x_zp, params.omega_m)
    assert m == pytest.approx(params.mass, rel=1e-12)


@given(st.floats(min_value=1e-16, max_value=1e-13),
       st.floats(min_value=1e5, max_value=1e9))
def test_mass_xzp_round_trip_property(x_zp, omega_m):
    m = mass_for_xzp(x_zp, omega_m)
    back = math.sqrt(1.054571817e-34 / (2.0 * m * omega_m))
    assert back == pytest.approx(x_zp, rel=1e-12)


def test_kappa_is_port_sum(params):
    assert params.kappa == pytest.approx(
        params.kappa_L + params.kappa_R + params.kappa_int)


def test_gamma_opt_value(params):
    # 2.3e6 photons -> optical damping of roughly 2 pi * 2 kHz
    assert gamma_opt(params, 2.3e6) == pytest.approx(TWO_PI * 2037.3, rel=1e-3)


@given(st.floats(min_value=0.0, max_value=1e8),
       st.floats(min_value=1.0, max_value=10.0))
def test_gamma_opt_linearity(n_p, factor):
    p = paper_params()
    assert gamma_opt(p, factor * n_p) == pytest.approx(
        factor * gamma_opt(p, n_p), rel=1e-12, abs=1e-30)


def test_gamma_opt_inverse(params):
    n_p = n_p_for_gamma_opt(params, TWO_PI * 1000.0)
    assert gamma_opt(params, n_p) == pytest.approx(TWO_PI * 1000.0, rel=1e-12)


def test_gamma_opt_negative_photons(params):
    with pytest.raises(ParameterError):
        gamma_opt(params, -1.0)


def test_occupancy_temperature_values(params):
    assert occupancy_from_temperature(params, 7.2e-3) == pytest.approx(
        37.5, rel=0.01)
    assert occupancy_from_temperature(params, 0.02) == pytest.approx(
        104.2, rel=0.01)
    T = temperature_from_occupancy(params, 37.5)
    assert occupancy_from_temperature(params, T) == pytest.approx(37.5)


def test_cooling_composition(params):
    tone = CoolingTone(delta_omega_cool=TWO_PI * 3e5, n_p_cool=1e5)
    eff = apply_cooling(params, tone.as_tone(params))
    assert eff.gamma_m > params.gamma_m0
    assert eff.n_m_T < params.n_m0_thermal
    # weighted-bath closure at this operating point
    assert eff.n_m_T == pytest.approx(10.5, abs=0.3)


def test_cooling_override(params):
    tone = CoolingTone(delta_omega_cool=TWO_PI * 3e5, n_p_cool=1e5)
    eff = apply_cooling(params, tone.as_tone(params), n_m_T_override=15.0)
    assert eff.n_m_T == 15.0
    assert eff.gamma_m == pytest.approx(
        params.gamma_m0 + gamma_opt(params, 1e5))


def test_blue_cooling_rejected(params):
    blue = Tone(detuning_from_cavity=params.omega_m, photon_number=1e5,
                role=ToneRole.PUMP_BLUE)
    with pytest.raises(ParameterError):
        apply_cooling(params, blue)


def test_tone_role_sign_convention():
    with pytest.raises(ParameterError):
        Tone(detuning_from_cavity=1e6, photon_number=10,
             role=ToneRole.PUMP_RED)
    with pytest.raises(ParameterError):
        Tone(detuning_from_cavity=-1e6, photon_number=10,
             role=ToneRole.PUMP_BLUE)


def test_tone_amplitude_phase():
    t = Tone(detuning_from_cavity=-1e6, photon_number=4.0,
             phase=math.pi / 2.0, role=ToneRole.PUMP_RED)
    assert t.amplitude == pytest.approx(2j)


def test_dtt_power_split_conserves_total(params):
    scheme = DetunedTwoTone(Delta=TWO_PI * 1e4, n_p_per_tone=1e6,
                            power_ratio_blue_red=1.02)
    red, blue = scheme.tones(params)
    assert red.photon_number + blue.photon_number == pytest.approx(2e6)
    assert blue.photon_number / red.photon_number == pytest.approx(1.02)


def test_bae_total_photon_split(params):
    red, blue = BAE(n_p_total=4.7e6).tones(params)
    assert red.photon_number == blue.photon_number == pytest.approx(2.35e6)
    assert red.detuning_from_cavity == -params.omega_m
    assert blue.detuning_from_cavity == params.omega_m


def test_probe_stronger_than_pump_rejected(params):
    scheme = BAEWithProbe(n_p_pump=1e5, n_p_probe=1e6, delta=TWO_PI * 1e3)
    with pytest.raises(BalanceError):
        scheme.check(params)


def test_probe_phases_opposite(params):
    scheme = BAEWithProbe(n_p_pump=1e6, n_p_probe=1e4, delta=TWO_PI * 1e3,
                          phi=0.3)
    tones = scheme.tones(params)
    assert tones[2].phase == pytest.approx(0.3)
    assert tones[3].phase == pytest.approx(-0.3)


def test_effective_mechanics_validation():
    with pytest.raises(ParameterError):
        EffectiveMechanics(gamma_m=-1.0, n_m_T=10.0)
    with pytest.raises(ParameterError):
        EffectiveMechanics(gamma_m=1.0, n_m_T=-0.1)


def test_with_cavity_occupancy(params):
    p2 = params.with_cavity_occupancy(0.6)
    assert p2.n_c == pytest.approx(0.6)
    assert p2.n_c_bath["R"] == params.n_c_bath["R"]


def test_sideband_resolution_guard(params):
    assert params.sideband_resolved
    params.require_sideband_resolved()
    from dataclasses import replace
    bad = replace(params, omega_m=params.kappa / 2.0)
    with pytest.raises(ParameterError):
        bad.require_sideband_resolved()


@given(st.floats(min_value=0.0, max_value=5.0))
@settings(max_examples=30)
def test_weighted_cavity_occupancy(n_c):
    p = paper_params().with_cavity_occupancy(max(n_c, 0.2))
    k = {"L": p.kappa_L, "R": p.kappa_R, "int": p.kappa_int}
    manual = sum(k[q] * p.n_c_bath[q] for q in k) / p.kappa
    assert p.n_c == pytest.approx(manual, rel=1e-12)
