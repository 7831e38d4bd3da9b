import io
import math

import numpy as np
import pytest

from twotone import spectra
from twotone.spectrum import (
    GridError,
    Spectrum,
    SpectrumKind,
    SpectrumReference,
    default_grid,
    wide_grid,
)

TWO_PI = 2.0 * math.pi


def make(freq=None, vals=None):
    if freq is None:
        freq = np.linspace(-100.0, 100.0, 11)
    if vals is None:
        vals = np.ones_like(freq)
    return Spectrum(freq, vals, SpectrumKind.CAVITY_OUTPUT_QUANTA,
                    SpectrumReference.CAVITY_RESONANCE)


def test_grid_must_increase():
    with pytest.raises(GridError):
        make(freq=np.array([0.0, 1.0, 1.0]), vals=np.zeros(3))


def test_negative_values_rejected():
    with pytest.raises(ValueError):
        make(vals=np.array([1.0] * 10 + [-1.0]))


def test_shape_mismatch():
    with pytest.raises(GridError):
        make(freq=np.linspace(0, 1, 5), vals=np.zeros(6))


def test_area_is_variance():
    gm = 500.0
    grid = wide_grid(gm)
    spec = Spectrum(grid, spectra.lorentzian(grid, gm, 7.0),
                    SpectrumKind.MECHANICAL_X,
                    SpectrumReference.MECHANICAL_RESONANCE)
    assert spec.area() == pytest.approx(7.0, rel=2e-3)


def test_interpolation_bounds():
    spec = make()
    with pytest.raises(GridError):
        spec.interpolated(np.linspace(-200.0, 200.0, 5))
    sub = spec.interpolated(np.linspace(-50.0, 50.0, 7))
    assert np.allclose(sub.values, 1.0)


def test_csv_round_trip(tmp_path):
    grid = default_grid(TWO_PI * 100.0)
    spec = Spectrum(grid, spectra.lorentzian(grid, TWO_PI * 100.0, 2.5) + 0.5,
                    SpectrumKind.CAVITY_OUTPUT_QUANTA,
                    SpectrumReference.SIDEBAND_CENTER, {"side": "red"})
    path = tmp_path / "spec.csv"
    spec.to_csv(str(path), header_meta={"config_digest": "abc", "seed": 7})
    text = path.read_text()
    assert text.startswith("# kind=cavity_output_quanta")
    assert "# config_digest=abc" in text
    assert "offset_hz,psd_value,units" in text
    back = Spectrum.from_csv(str(path))
    assert back.kind is spec.kind
    assert back.reference is spec.reference
    assert np.allclose(back.freq, spec.freq, rtol=1e-10)
    assert np.allclose(back.values, spec.values, rtol=1e-10)
    assert back.meta["side"] == "red"


def test_csv_buffer_write():
    spec = make()
    buf = io.StringIO()
    spec.to_csv(buf)
    assert buf.getvalue().count("\n") == 11 + 3  # meta(2) + header + rows


def test_default_grid_row_count():
    grid = default_grid(TWO_PI * 100.0)
    assert grid.size == 2001
    assert grid[0] == pytest.approx(-25.0 * TWO_PI * 100.0)


def test_wide_grid_strictly_increasing():
    grid = wide_grid(TWO_PI * 100.0)
    assert np.all(np.diff(grid) > 0)
    assert grid[-1] == pytest.approx(2000.0 * TWO_PI * 100.0, rel=1e-9)


def test_units_by_kind():
    assert make().units == "quanta/Hz"
    spec = Spectrum(np.linspace(0, 1, 3), np.zeros(3),
                    SpectrumKind.QUADRATURE_X1,
                    SpectrumReference.MECHANICAL_RESONANCE)
    assert spec.units == "m^2/Hz"
