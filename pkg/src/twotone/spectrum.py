"""Spectrum container shared by the closed-form, lattice and time-domain paths.

Convention: ``freq`` is an angular-frequency offset (rad/s) from the stated
reference; ``values`` are spectral densities normalised so that the variance
is the integral over ordinary frequency, i.e. ``trapz(values, freq) / 2pi``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi


class SpectrumKind(Enum):
    MECHANICAL_X = "mechanical_x"
    QUADRATURE_X1 = "quadrature_x1"
    QUADRATURE_X2 = "quadrature_x2"
    QUADRATURE_PHI = "quadrature_phi"
    CAVITY_OUTPUT_QUANTA = "cavity_output_quanta"
    VOLTAGE_NOISE = "voltage_noise"


class SpectrumReference(Enum):
    CAVITY_RESONANCE = "cavity_resonance"
    MECHANICAL_RESONANCE = "mechanical_resonance"
    SIDEBAND_CENTER = "sideband_center"


_UNITS = {
    SpectrumKind.MECHANICAL_X: "m^2/Hz",
    SpectrumKind.QUADRATURE_X1: "m^2/Hz",
    SpectrumKind.QUADRATURE_X2: "m^2/Hz",
    SpectrumKind.QUADRATURE_PHI: "m^2/Hz",
    SpectrumKind.CAVITY_OUTPUT_QUANTA: "quanta/Hz",
    SpectrumKind.VOLTAGE_NOISE: "W/Hz",
}


class GridError(ValueError):
    """Frequency grids are misaligned or not strictly increasing."""


@dataclass
class Spectrum:
    freq: np.ndarray  # rad/s offsets from `reference`
    values: np.ndarray
    kind: SpectrumKind
    reference: SpectrumReference
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.freq.ndim != 1 or self.freq.shape != self.values.shape:
            raise GridError("freq and values must be matching 1-d arrays")
        if np.any(np.diff(self.freq) <= 0):
            raise GridError("frequency grid must be strictly increasing")
        if np.any(self.values < -1e-12 * max(1.0, np.max(np.abs(self.values)))):
            raise ValueError("auto-spectrum values must be non-negative")

    @property
    def units(self) -> str:
        return _UNITS[self.kind]

    def area(self) -> float:
        """Variance estimate: integral of the density over ordinary frequency."""
        return float(np.trapezoid(self.values, self.freq)) / TWO_PI

    def interpolated(self, freq: np.ndarray) -> "Spectrum":
        freq = np.asarray(freq, dtype=float)
        if freq[0] < self.freq[0] or freq[-1] > self.freq[-1]:
            raise GridError("requested grid extends beyond the spectrum")
        vals = np.interp(freq, self.freq, self.values)
        return Spectrum(freq, vals, self.kind, self.reference, dict(self.meta))

    def to_csv(self, path_or_buf, header_meta: dict | None = None) -> None:
        """Write the module-standard CSV: offset_hz, psd_value, units."""
        meta = {"kind": self.kind.value, "reference": self.reference.value}
        meta.update(self.meta)
        if header_meta:
            meta.update(header_meta)
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        f = open(path_or_buf, "w") if own else path_or_buf
        try:
            for key, val in meta.items():
                f.write(f"# {key}={val}\n")
            f.write("offset_hz,psd_value,units\n")
            units = self.units
            for w, v in zip(self.freq, self.values):
                f.write(f"{w / TWO_PI:.12g},{v:.12g},{units}\n")
        finally:
            if own:
                f.close()

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        meta = {}
        rows = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        k, v = body.split("=", 1)
                        meta[k.strip()] = v.strip()
                    continue
                if line.startswith("offset_hz"):
                    continue
                rows.append(line.split(","))
        freq = np.array([float(r[0]) for r in rows]) * TWO_PI
        vals = np.array([float(r[1]) for r in rows])
        kind = SpectrumKind(meta.pop("kind"))
        ref = SpectrumReference(meta.pop("reference"))
        return cls(freq, vals, kind, ref, meta)


def default_grid(gamma_m: float, span_linewidths: float = 25.0,
                 n_points: int = 2001) -> np.ndarray:
    """Default evaluation grid: +-span_linewidths * gamma_m, n_points."""
    return np.linspace(-span_linewidths * gamma_m, span_linewidths * gamma_m,
                       n_points)


def wide_grid(gamma_m: float, core_span: float = 30.0,
              tail_span: float = 2000.0, n_core: int = 1501,
              n_tail: int = 400) -> np.ndarray:
    """Grid with a dense Lorentzian core and logarithmic tails.

    Captures all but ~2/(pi*tail_span) of a unit Lorentzian's area, which is
    what variance integrals of near-Lorentzian spectra need.
    """
    core = np.linspace(-core_span * gamma_m, core_span * gamma_m, n_core)
    tail = np.geomspace(core_span * gamma_m, tail_span * gamma_m, n_tail + 1)[1:]
    return np.unique(np.concatenate([-tail[::-1], core, tail]))
