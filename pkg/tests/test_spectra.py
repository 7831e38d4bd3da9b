import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twotone import spectra
from twotone.model import (
    BAE,
    BAEWithProbe,
    BalanceError,
    DetunedTwoTone,
    EffectiveMechanics,
    HBAR,
    gamma_opt,
    paper_params,
)
from twotone.spectrum import default_grid, wide_grid

TWO_PI = 2.0 * math.pi


@pytest.fixture
def params():
    return paper_params()


@pytest.fixture
def eff():
    return EffectiveMechanics(gamma_m=TWO_PI * 100.0, n_m_T=15.0)


def grid_for(eff):
    return default_grid(eff.gamma_m)


def test_lorentzian_area_normalization():
    w = np.linspace(-1e5, 1e5, 200001)
    vals = spectra.lorentzian(w, fwhm=500.0, area=3.0)
    assert np.trapezoid(vals, w) / TWO_PI == pytest.approx(3.0, rel=5e-3)


def test_lorentzian_peak_height():
    vals = spectra.lorentzian(np.array([0.0]), fwhm=500.0, area=3.0)
    assert vals[0] == pytest.approx(4.0 * 3.0 / 500.0)


def test_dtt_spectrum_area(params, eff):
    scheme = DetunedTwoTone(Delta=TWO_PI * 1e4, n_p_per_tone=2.3e6)
    grid = wide_grid(eff.gamma_m)
    spec = spectra.s_x_dtt(grid, params, eff, scheme)
    n_bar = eff.n_m_T + spectra.dtt_backaction_occupancy(params, eff, scheme)
    expected = params.x_zp ** 2 * (1.0 + 2.0 * n_bar)
    assert spec.area() == pytest.approx(expected, rel=2e-3)


def test_dtt_unbalanced_rejected(params, eff):
    scheme = DetunedTwoTone(Delta=0.0, n_p_per_tone=1e6,
                            power_ratio_blue_red=1.05)
    with pytest.raises(BalanceError):
        spectra.s_x_dtt(grid_for(eff), params, eff, scheme)


def test_dtt_heating_value(params):
    # high-power two-quadrature measurement heats the cooled mode
    eff = EffectiveMechanics(gamma_m=TWO_PI * 100.0, n_m_T=15.0)
    p = params.with_cavity_occupancy(0.6)
    scheme = DetunedTwoTone(Delta=TWO_PI * 1e4, n_p_per_tone=2.3e6)
    n_bar = eff.n_m_T + spectra.dtt_backaction_occupancy(p, eff, scheme)
    assert n_bar == pytest.approx(60.0, abs=3.0)


@given(n_c=st.floats(min_value=0.0, max_value=5.0),
       n_cR=st.floats(min_value=0.0, max_value=5.0))
@settings(max_examples=40)
def test_sideband_average_identity(n_c, n_cR):
    """Averaged sideband weight is n_bar + 1/2 for any noise configuration."""
    from dataclasses import replace
    p = paper_params()
    p = replace(p, n_c_bath={"L": n_c, "R": n_cR, "int": n_c})
    eff = EffectiveMechanics(gamma_m=TWO_PI * 100.0, n_m_T=15.0)
    scheme = DetunedTwoTone(Delta=TWO_PI * 1e4, n_p_per_tone=1e6)
    w_red, w_blue = spectra.sideband_weights(p, eff, scheme)
    n_bar = eff.n_m_T + spectra.dtt_backaction_occupancy(p, eff, scheme)
    assert 0.5 * (w_red + w_blue) == pytest.approx(n_bar + 0.5, rel=1e-12)


def test_sideband_asymmetry_paper_point(params, eff):
    p = params.with_cavity_occupancy(0.6)
    scheme = DetunedTwoTone(Delta=TWO_PI * 1e4, n_p_per_tone=2.3e6)
    w_red, w_blue = spectra.sideband_weights(p, eff, scheme, n_m_bar=65.0)
    assert w_red == pytest.approx(64.0, abs=1e-9)
    assert w_blue == pytest.approx(67.0, abs=1e-9)
    assert w_blue / w_red == pytest.approx(1.047, abs=0.001)


def test_sideband_out_area(params, eff):
    scheme = DetunedTwoTone(Delta=TWO_PI * 1e4, n_p_per_tone=1e6)
    spec = spectra.sideband_out(grid_for(eff), params, eff, scheme, "red")
    g_opt = gamma_opt(params, 1e6)
    w_red, _ = spectra.sideband_weights(params, eff, scheme)
    floor = spectra.sideband_floor(params)
    area = np.trapezoid(spec.values - floor, spec.freq) / TWO_PI
    assert area == pytest.approx(
        params.kappa_R / params.kappa * g_opt * w_red, rel=0.02)


def test_sideband_out_bad_side(params, eff):
    with pytest.raises(ValueError):
        spectra.sideband_out(grid_for(eff), params, eff,
                             DetunedTwoTone(n_p_per_tone=1e6), "green")


def test_bae_budget_ratio_exact(params, eff):
    budget = spectra.bae_backaction_budget(params, eff, BAE(n_p_total=4.7e6))
    expected = (1.0 / 32.0) * (params.kappa / params.omega_m) ** 2
    assert budget.n_bad / budget.n_ba_BAE == pytest.approx(expected,
                                                           rel=1e-12)


@given(n_p=st.floats(min_value=1e4, max_value=1e7))
@settings(max_examples=30)
def test_bae_budget_ratio_property(n_p):
    p = paper_params()
    eff = EffectiveMechanics(gamma_m=TWO_PI * 100.0, n_m_T=15.0)
    budget = spectra.bae_backaction_budget(p, eff, BAE(n_p_total=n_p))
    expected = (1.0 / 32.0) * (p.kappa / p.omega_m) ** 2
    assert budget.n_bad == pytest.approx(expected * budget.n_ba_BAE,
                                         rel=1e-12)


def test_bae_residual_backaction_value(eff):
    """At full pump power with a cold cavity the measured-quadrature
    back-action is ~0.12 zero-point variances."""
    from dataclasses import replace
    p = replace(paper_params(), n_c_bath={"L": 0.0, "R": 0.0, "int": 0.0})
    budget = spectra.bae_backaction_budget(p, eff, BAE(n_p_total=4.7e6))
    assert 2.0 * budget.n_bad == pytest.approx(0.12, abs=0.01)


def test_bae_x2_backaction_formula(params, eff):
    budget = spectra.bae_backaction_budget(params, eff, BAE(n_p_total=2e6))
    g_opt = gamma_opt(params, 2e6)
    assert budget.n_ba_BAE == pytest.approx(
        (g_opt / eff.gamma_m) * (2.0 * params.n_c + 1.0), rel=1e-12)


def test_quadrature_spectra_ordering(params, eff):
    grid = grid_for(eff)
    scheme = BAEWithProbe(n_p_pump=1e6, n_p_probe=1e4, delta=TWO_PI * 1e3,
                          phi=0.7)
    qs = spectra.s_quadratures_bae(grid, params, eff, scheme)
    # rotated spectrum lies between the two principal quadratures
    assert np.all(qs.s_xphi.values >= np.minimum(qs.s_x1.values,
                                                 qs.s_x2.values) - 1e-30)
    assert np.all(qs.s_xphi.values <= np.maximum(qs.s_x1.values,
                                                 qs.s_x2.values) + 1e-30)


@given(phi=st.floats(min_value=0.0, max_value=math.pi))
@settings(max_examples=20)
def test_xphi_interpolates(phi):
    p = paper_params()
    eff = EffectiveMechanics(gamma_m=TWO_PI * 100.0, n_m_T=15.0)
    grid = default_grid(eff.gamma_m, n_points=101)
    scheme = BAEWithProbe(n_p_pump=1e6, n_p_probe=1e4, delta=TWO_PI * 1e3,
                          phi=phi)
    qs = spectra.s_quadratures_bae(grid, p, eff, scheme)
    manual = (math.cos(phi) ** 2 * qs.s_x1.values
              + math.sin(phi) ** 2 * qs.s_x2.values)
    assert np.allclose(qs.s_xphi.values, manual, rtol=1e-12)


def test_probe_backaction_scaling(params, eff):
    base = spectra.bae_backaction_budget(
        params, eff, BAEWithProbe(n_p_pump=1e6, n_p_probe=1e4,
                                  delta=TWO_PI * 1e3, phi=math.pi / 2.0))
    quarter = spectra.bae_backaction_budget(
        params, eff, BAEWithProbe(n_p_pump=1e6, n_p_probe=2.5e3,
                                  delta=TWO_PI * 1e3, phi=math.pi / 2.0))
    assert base.n_extra == pytest.approx(4.0 * quarter.n_extra, rel=1e-12)
    aligned = spectra.bae_backaction_budget(
        params, eff, BAEWithProbe(n_p_pump=1e6, n_p_probe=1e4,
                                  delta=TWO_PI * 1e3, phi=0.0))
    assert aligned.n_extra == 0.0


def test_probe_backaction_paper_magnitude(params, eff):
    # 20 dB weaker probe at the tomography operating point stays small
    budget = spectra.bae_backaction_budget(
        params, eff, BAEWithProbe(n_p_pump=1.1e6, n_p_probe=1.1e4,
                                  delta=TWO_PI * 1e3, phi=math.pi / 2.0))
    assert budget.n_extra <= 0.3


def test_cavity_output_noise_limits(params):
    grid = np.linspace(-10.0, 10.0, 2001) * params.kappa
    spec = spectra.cavity_output_noise(grid, params)
    n_cR = params.n_c_bath["R"]
    # far off resonance: line noise plus vacuum
    assert spec.values[0] == pytest.approx(0.5 + n_cR, rel=1e-2)
    # on resonance the cavity swaps in the weighted internal occupancy
    i0 = np.argmin(np.abs(grid))
    expected = (0.5 + n_cR + 4.0 * params.kappa_R / params.kappa
                * (params.n_c - n_cR))
    assert spec.values[i0] == pytest.approx(expected, rel=1e-6)


def test_voltage_conversion_chain(params):
    conv = spectra.NoiseConversion(params, alpha=0.22e18, s_v_hemt=1e-18)
    grid = np.linspace(-2.0, 2.0, 101) * params.kappa
    quanta = spectra.cavity_output_noise(grid, params)
    volts = conv.to_voltage(quanta)
    manual = (quanta.values * params.kappa / (4.0 * params.kappa_R)
              / 0.22e18 + 1e-18)
    assert np.allclose(volts.values, manual)


def test_delta_eta_round_trip(params):
    conv = spectra.NoiseConversion(params, alpha=0.22e18, s_v_hemt=0.0)
    for n_c in (0.2, 1.0, 4.62):
        d_eta = conv.delta_eta_from_n_c(n_c)
        assert conv.n_c_from_delta_eta(d_eta) == pytest.approx(n_c,
                                                               rel=1e-12)


def test_delta_eta_paper_point(params):
    # the highest injected level corresponds to ~21 aW/Hz above baseline
    conv = spectra.NoiseConversion(params, alpha=0.22 / 1e-18, s_v_hemt=0.0)
    d_eta = conv.delta_eta_from_n_c(4.62) / 1e-18  # in aW/Hz
    assert d_eta == pytest.approx(20.5, abs=0.8)


def test_imprecision_bookkeeping(params, eff):
    var = spectra.imprecision_variance(1e-30, eff.gamma_m)
    assert var == pytest.approx(1e-30 * eff.gamma_m / 4.0)
    ql = spectra.quantum_limit_imprecision(params, 4.7e6, eff.gamma_m)
    g_opt = gamma_opt(params, 4.7e6)
    assert ql == pytest.approx(params.x_zp ** 2 * eff.gamma_m
                               / (8.0 * g_opt), rel=1e-12)


def test_noise_product_units(params, eff):
    # u = 0.6 and v = 10 zero-point variances -> ~2.45 hbar
    xzp2 = params.x_zp ** 2
    np_hbar = spectra.noise_product_from_variances(
        0.6 * xzp2, 10.0 * xzp2, params, eff.gamma_m)
    assert np_hbar == pytest.approx(math.sqrt(6.0), rel=1e-6)
    # quantum-limited combination: sqrt(u v) = 1/2 at the ideal point
    np_min = spectra.noise_product_from_variances(
        0.125 * xzp2, 0.5 * xzp2, params, eff.gamma_m)
    assert np_min == pytest.approx(0.25, rel=1e-6)
