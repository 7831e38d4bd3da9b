"""Fitting and extraction: masked Lorentzian fits, sideband averaging,
rotation fits and weighted linear regression."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .spectrum import GridError, Spectrum

TWO_PI = 2.0 * math.pi


class FitError(RuntimeError):
    """Fit did not converge; carries the last iterate in ``last_params``."""

    def __init__(self, message, last_params=None):
        super().__init__(message)
        self.last_params = last_params


@dataclass(frozen=True)
class MaskSpec:
    """Frequency intervals (rad/s, same reference as the spectrum) to
    exclude from fit residuals, e.g. a narrow generator spur."""

    intervals: tuple[tuple[float, float], ...] = ()

    @classmethod
    def centered(cls, width: float, center: float = 0.0) -> "MaskSpec":
        return cls(((center - width / 2.0, center + width / 2.0),))

    def keep(self, freq: np.ndarray) -> np.ndarray:
        keep = np.ones_like(freq, dtype=bool)
        for lo, hi in self.intervals:
            keep &= ~((freq >= lo) & (freq <= hi))
        return keep

    def validate(self, freq: np.ndarray) -> None:
        for lo, hi in self.intervals:
            if hi <= lo:
                raise ValueError("mask interval must have hi > lo")
            if hi < freq[0] or lo > freq[-1]:
                raise ValueError("mask interval outside the grid")
        frac = 1.0 - self.keep(freq).mean()
        if frac >= 0.2:
            raise ValueError(
                f"mask removes {frac:.0%} of the fit window (limit 20%)")


@dataclass
class LorentzianFit:
    """Result of a Lorentzian-plus-floor fit.

    ``area`` is the Lorentzian variance coefficient (integral over ordinary
    frequency); covariance rows/cols are ordered (center, fwhm, area, floor).
    """

    center: float
    fwhm: float
    area: float
    floor: float
    covariance: np.ndarray
    goodness: float
    low_signal: bool = False
    n_points: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def peak(self) -> float:
        """Peak height above the floor."""
        return 4.0 * self.area / self.fwhm

    def to_csv_row(self) -> str:
        cov = ",".join(f"{v:.8g}" for v in self.covariance.ravel())
        return (f"{self.center:.10g},{self.fwhm:.10g},{self.area:.10g},"
                f"{self.floor:.10g},{self.goodness:.6g},"
                f"{int(self.low_signal)},{cov}")


def _lorentz_model(p, w):
    center, fwhm, area, floor = p
    return floor + area * fwhm / ((w - center) ** 2 + (fwhm / 2.0) ** 2)


def _initial_guess(freq, vals, dip):
    floor0 = float(np.median(vals))
    sig = -(vals - floor0) if dip else (vals - floor0)
    i0 = int(np.argmax(sig))
    center0 = float(freq[i0])
    peak0 = max(float(sig[i0]), 1e-300)
    # second moment of the positive part around the peak for a width scale
    pos = np.clip(sig, 0.0, None)
    wsum = pos.sum()
    if wsum > 0:
        m2 = float(((freq - center0) ** 2 * pos).sum() / wsum)
        fwhm0 = max(2.0 * math.sqrt(m2) / 3.0, 2.0 * (freq[1] - freq[0]))
    else:
        fwhm0 = (freq[-1] - freq[0]) / 10.0
    area0 = peak0 * fwhm0 / 4.0
    if dip:
        area0 = -area0
    return np.array([center0, fwhm0, area0, floor0])


def fit_lorentzian(spectrum: Spectrum, mask: MaskSpec | None = None,
                   init: dict | None = None,
                   sigma: np.ndarray | None = None,
                   allow_dip: bool = False,
                   max_iterations: int = 200) -> LorentzianFit:
    """Damped nonlinear least squares for (center, fwhm, area, floor).

    Masked bins are excluded from the residuals.  ``sigma`` gives optional
    per-bin standard deviations; default is uniform weighting with the noise
    scale estimated from the reduced chi-square.  Peaks with area
    significance below 3 sigma are flagged, not rejected.
    """
    freq = spectrum.freq
    vals = spectrum.values
    if mask is not None:
        mask.validate(freq)
        keep = mask.keep(freq)
        freq, vals = freq[keep], vals[keep]
        if sigma is not None:
            sigma = np.asarray(sigma)[keep]
    if freq.size < 8:
        raise FitError("too few unmasked points for a 4-parameter fit")

    # fit in normalised units: values scaled by their peak magnitude so the
    # four parameters have comparable magnitudes regardless of input units
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    vals_n = vals / scale

    p0 = _initial_guess(freq, vals_n, allow_dip and
                        np.median(vals_n) > vals_n[np.argmax(np.abs(vals_n - np.median(vals_n)))])
    guess_dip = p0[2] < 0
    if init:
        names = ("center", "fwhm", "area", "floor")
        value_like = {"area": scale, "floor": scale}
        for i, n in enumerate(names):
            if n in init:
                p0[i] = init[n] / value_like.get(n, 1.0)

    w = np.ones_like(vals) if sigma is None \
        else scale / np.asarray(sigma, float)

    def resid(p):
        return (_lorentz_model(p, freq) - vals_n) * w

    lo_area = -np.inf if (allow_dip or guess_dip) else 0.0
    span = freq[-1] - freq[0]
    bounds = ([freq[0], 1e-6 * span, lo_area, -np.inf],
              [freq[-1], 10.0 * span, np.inf, np.inf])
    p0 = np.clip(p0, bounds[0], bounds[1])
    res = least_squares(resid, p0, bounds=bounds, x_scale="jac",
                        xtol=1e-12, ftol=1e-12,
                        gtol=1e-14, max_nfev=max_iterations * 10)
    if not res.success:
        raise FitError(f"Lorentzian fit failed: {res.message}",
                       last_params=res.x)
    center, fwhm, area, floor = res.x
    area *= scale
    floor *= scale

    dof = max(freq.size - 4, 1)
    col = np.array([1.0, 1.0, scale, scale])
    if sigma is None:
        # residuals were (model - data)/scale with unit weights
        chi2_red = 2.0 * res.cost / dof * scale ** 2
        jac = res.jac * scale / col[None, :]  # d model / d physical params
    else:
        # residuals were already (model - data)/sigma
        chi2_red = 2.0 * res.cost / dof
        jac = res.jac / col[None, :]
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    if sigma is None:
        cov = cov * chi2_red  # scale uniform weights by the residual variance
        goodness = 1.0
    else:
        goodness = chi2_red
    cov = 0.5 * (cov + cov.T)

    sigma_area = math.sqrt(max(cov[2, 2], 0.0))
    low_signal = bool(sigma_area > 0 and abs(area) / sigma_area < 3.0)
    return LorentzianFit(center=float(center), fwhm=float(fwhm),
                         area=float(area), floor=float(floor),
                         covariance=cov, goodness=float(goodness),
                         low_signal=low_signal, n_points=int(freq.size))


def average_sidebands(red: Spectrum, blue: Spectrum) -> Spectrum:
    """Pointwise mean of the two sideband spectra (already re-referenced to
    their own centres).  Cancels the cavity-noise asymmetry so the fitted
    weight is n_bar + 1/2."""
    if red.freq.shape != blue.freq.shape or \
            not np.allclose(red.freq, blue.freq, rtol=0, atol=1e-9 * max(
                1.0, float(np.max(np.abs(red.freq))))):
        raise GridError("sideband grids are misaligned")
    vals = 0.5 * (red.values + blue.values)
    meta = {"combined": "average(red,blue)"}
    return Spectrum(red.freq, vals, red.kind, red.reference, meta)


@dataclass(frozen=True)
class OccupancyEstimate:
    n_m: float
    variance_xzp2: float  # <x^2> in x_zp^2 units: 1 + 2 n_m
    sigma_n_m: float = 0.0


def extract_occupancy(fit: LorentzianFit, calibration_factor: float,
                      p_thru: float) -> OccupancyEstimate:
    """Occupancy from a sideband fit: n = factor * (sideband power / P_thru)."""
    if p_thru <= 0:
        raise ValueError("through power must be positive")
    n_m = calibration_factor * fit.area / p_thru
    sigma = calibration_factor * fit.sigma[2] / p_thru
    return OccupancyEstimate(n_m=n_m, variance_xzp2=1.0 + 2.0 * n_m,
                             sigma_n_m=sigma)


@dataclass(frozen=True)
class RotationFit:
    """Fit of quadrature variances to A sin^2(phi) + B."""

    A: float
    B: float
    covariance: np.ndarray

    @property
    def var_x1(self) -> float:
        return self.B

    @property
    def var_x2(self) -> float:
        return self.A + self.B


def fit_rotation(phis, variances, sigma=None) -> RotationFit:
    """Linear least squares of variance(phi) against sin^2(phi)."""
    phis = np.asarray(phis, float)
    variances = np.asarray(variances, float)
    if phis.size != variances.size:
        raise ValueError("phi and variance arrays must match")
    if phis.size < 2:
        raise ValueError("need at least 2 phase points")
    s2 = np.sin(phis) ** 2
    if np.ptp(s2) < 1e-12:
        raise ValueError("degenerate phi set: all angles equal modulo pi")
    if phis.size < 4 and np.unique(np.round(s2, 12)).size < 2:
        raise ValueError("degenerate phi set")
    w = np.ones_like(variances) if sigma is None else 1.0 / np.asarray(sigma)
    X = np.column_stack([s2, np.ones_like(s2)]) * w[:, None]
    y = variances * w
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(phis.size - 2, 1)
    s2_hat = float(resid @ resid) / dof if sigma is None else 1.0
    cov = s2_hat * np.linalg.inv(X.T @ X)
    return RotationFit(A=float(coef[0]), B=float(coef[1]), covariance=cov)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    covariance: np.ndarray  # (slope, intercept) ordering

    @property
    def sigma_slope(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def sigma_intercept(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))


def weighted_linear_fit(x, y, sigma_y, through_origin: bool = False) -> LinearFit:
    """Standard weighted least squares with parameter covariance."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sigma_y = np.asarray(sigma_y, float)
    if not (x.size == y.size == sigma_y.size):
        raise ValueError("x, y, sigma_y must have equal lengths")
    if x.size < (1 if through_origin else 2):
        raise ValueError("not enough points for a line fit")
    if np.any(sigma_y <= 0):
        raise ValueError("sigma_y must be positive")
    w = 1.0 / sigma_y
    if through_origin:
        X = (x * w)[:, None]
    else:
        X = np.column_stack([x, np.ones_like(x)]) * w[:, None]
    yw = y * w
    coef, *_ = np.linalg.lstsq(X, yw, rcond=None)
    cov_full = np.linalg.inv(X.T @ X)
    if through_origin:
        cov = np.zeros((2, 2))
        cov[0, 0] = cov_full[0, 0]
        return LinearFit(slope=float(coef[0]), intercept=0.0, covariance=cov)
    return LinearFit(slope=float(coef[0]), intercept=float(coef[1]),
                     covariance=cov_full)
