"""Semiclassical Langevin integrator and spectral estimator.

Second, independent route to the symmetrized spectra: the linearized
equations are integrated as classical complex SDEs whose white-noise drives
carry the symmetrized strength (n + 1/2) per input port.  Ensemble-averaged
periodograms then estimate the symmetrized quantum spectra of the same
linear system.

The integration runs in the rotating frames (cavity field at the cavity
resonance, mechanical envelope at omega_m) and keeps only the slow terms;
counter-rotating pieces at 2 omega_m are dropped.  That erases the +-1
sideband asymmetry by construction, so asymmetry queries on this backend
are an error and route to the lattice solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numba import njit
from scipy.signal import welch

from .model import EffectiveMechanics, ParameterError, SystemParams, gamma_opt
from .spectrum import Spectrum, SpectrumKind, SpectrumReference

TWO_PI = 2.0 * math.pi

_CHUNK_STEPS = 1 << 14


class IntegrationError(RuntimeError):
    pass


class AsymmetryUnavailableError(TypeError):
    """Raised when a sideband-asymmetry quantity is requested from the
    symmetrized classical backend."""


class Window(Enum):
    HANN = "hann"
    RECTANGULAR = "boxcar"


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int
    overlap: float = 0.5
    window: Window = Window.HANN

    def __post_init__(self):
        if not (0.0 <= self.overlap < 1.0):
            raise ValueError("overlap must be in [0, 1)")
        if self.segment_length < 8:
            raise ValueError("segment_length must be at least 8 samples")


@dataclass(frozen=True)
class SimConfig:
    duration: float = 2.0
    n_traj: int = 64
    dt: Optional[float] = None  # None -> stability/accuracy based default
    seed: int = 1234
    sample_rate: Optional[float] = None  # decimated output rate, None -> auto


@dataclass
class TrajectoryEnsemble:
    """Decimated rotating-frame records for every trajectory.

    ``channels`` maps channel names to complex arrays of shape
    (n_traj, n_samples).  Always present: ``b`` (mechanical envelope).
    Output-field channels are mixed down to the listed centre offsets.
    """

    dt: float
    duration: float
    n_traj: int
    seed: int
    sample_rate: float
    channels: dict
    centers: dict  # channel -> rad/s offset its record was mixed down to
    params: SystemParams = None
    eff: EffectiveMechanics = None
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return next(iter(self.channels.values())).shape[1]

    def variances(self, channel: str) -> np.ndarray:
        """Per-trajectory variances of a channel (complex second moment)."""
        z = self._series(channel)
        return np.mean(np.abs(z) ** 2, axis=1).real

    def _series(self, channel: str) -> np.ndarray:
        if channel in self.channels:
            return self.channels[channel]
        xzp = self.params.x_zp
        if channel == "x1":
            return 2.0 * xzp * self.channels["b"].real
        if channel == "x2":
            return -2.0 * xzp * self.channels["b"].imag
        raise KeyError(f"unknown channel {channel!r}; have "
                       f"{sorted(self.channels)} plus x1/x2")

    def summary_csv(self, path) -> None:
        """Per-trajectory variances of every channel."""
        names = sorted(self.channels) + ["x1", "x2"]
        with open(path, "w") as f:
            f.write(f"# seed={self.seed} dt={self.dt:.6g} "
                    f"duration={self.duration:.6g}\n")
            f.write("trajectory," + ",".join(f"var_{n}" for n in names) + "\n")
            cols = [self.variances(n) for n in names]
            for i in range(self.n_traj):
                row = ",".join(f"{c[i]:.10g}" for c in cols)
                f.write(f"{i},{row}\n")


@njit(cache=True)
def _step_chunk(d, b, Ed, phid, Eb, phib, g0,
                amps_red, amps_blue, ph_red, ph_blue,
                noise_d, noise_b, dW_R, sqrt_kR_in, sqrt_kR_out, inv_dt,
                mix, decim, acc_fill, acc, out_records, rec_start):
    """Advance one trajectory through a chunk of steps, accumulating
    decimated mixed-down records.  ``acc`` holds partial boxcar sums
    carried across chunk boundaries."""
    n_steps = ph_red.shape[0]
    n_red = amps_red.shape[0]
    n_blue = amps_blue.shape[0]
    n_ch = mix.shape[1]
    rec_idx = rec_start
    for n in range(n_steps):
        fd = 0.0 + 0.0j
        fb = 0.0 + 0.0j
        for k in range(n_red):
            ak = amps_red[k] * ph_red[n, k]
            fd += ak * b
            fb += np.conj(ak) * d
        for k in range(n_blue):
            ak = amps_blue[k] * ph_blue[n, k]
            fd += ak * np.conj(b)
            fb += ak * np.conj(d)
        fd *= -1j * g0
        fb *= -1j * g0
        d_new = Ed * d + phid * fd + noise_d[n] - sqrt_kR_in * dW_R[n]
        b_new = Eb * b + phib * fb + noise_b[n]
        d, b = d_new, b_new
        out = dW_R[n] * inv_dt + sqrt_kR_out * d
        acc[0] += b
        for c in range(n_ch):
            acc[1 + c] += out * mix[n, c]
        acc_fill += 1
        if acc_fill == decim:
            for c in range(n_ch + 1):
                out_records[c, rec_idx] = acc[c] / decim
                acc[c] = 0.0 + 0.0j
            acc_fill = 0
            rec_idx += 1
    return d, b, acc_fill, rec_idx


def _classify_tones(params: SystemParams, scheme) -> tuple[list, list]:
    """Split measurement tones into red/blue with their slow offsets."""
    red, blue = [], []
    wm = params.omega_m
    for t in scheme.tones(params):
        if t.photon_number == 0:
            continue
        if t.detuning_from_cavity < 0:
            red.append((t.amplitude, t.detuning_from_cavity + wm))
        else:
            blue.append((t.amplitude, t.detuning_from_cavity - wm))
    return red, blue


def _output_centers(red, blue) -> dict:
    """Sideband centre offsets worth recording, one channel each."""
    offsets = sorted({round(eps, 6) for _, eps in red + blue})
    if len(offsets) == 1:
        return {"out0": offsets[0]}
    centers = {}
    for i, eps in enumerate(offsets):
        centers[f"out{i}"] = eps
    return centers


def integrate(params: SystemParams, eff: EffectiveMechanics, scheme,
              cfg: SimConfig) -> TrajectoryEnsemble:
    """Integrate the rotating-frame Langevin equations for an ensemble.

    Exponential Euler: the diagonal damping and the Ornstein-Uhlenbeck
    noise variances are treated exactly; tone phases are evaluated at the
    step midpoint.  Unstable schemes (net anti-damping) are rejected.
    """
    red, blue = _classify_tones(params, scheme)
    g_red = sum(gamma_opt(params, abs(a) ** 2) for a, _ in red)
    g_blue = sum(gamma_opt(params, abs(a) ** 2) for a, _ in blue)
    if eff.gamma_m + g_red - g_blue <= 0:
        raise IntegrationError(
            "net mechanical anti-damping: blue-tone heating exceeds total "
            f"damping (gamma_m={eff.gamma_m:.3g}, red={g_red:.3g}, "
            f"blue={g_blue:.3g} rad/s)")

    eps_all = [abs(e) for _, e in red + blue]
    eps_max = max(eps_all) if eps_all else 0.0
    dt_max = 0.1 / eps_max if eps_max > 0 else math.inf
    dt = cfg.dt if cfg.dt is not None else min(0.4 / params.kappa, dt_max)
    if dt * max(eps_max, params.kappa / 4.0) >= 0.1 + 1e-12:
        raise IntegrationError(
            f"dt={dt:.3g} s too coarse for the fastest retained frequency")

    n_steps = int(round(cfg.duration / dt))
    centers = _output_centers(red, blue) if (red or blue) else {}
    band = max(5e4, 8.0 * eps_max / TWO_PI, 400.0 * eff.gamma_m / TWO_PI)
    decim = max(1, int((1.0 / dt) / band))
    n_samples = n_steps // decim
    n_steps = n_samples * decim
    if n_samples < 64:
        raise IntegrationError("duration too short for the decimated record")

    kap2 = params.kappa / 2.0
    gm2 = eff.gamma_m / 2.0
    Ed = math.exp(-kap2 * dt)
    Eb = math.exp(-gm2 * dt)
    phid = (1.0 - Ed) / kap2
    phib = (1.0 - Eb) / gm2
    # lumped non-recorded cavity inputs (L + int ports), exact OU variance
    s_other = (params.kappa_L * (params.n_c_bath["L"] + 0.5)
               + params.kappa_int * (params.n_c_bath["int"] + 0.5))
    var_d = s_other * (1.0 - Ed ** 2) / params.kappa
    var_b = (eff.n_m_T + 0.5) * (1.0 - Eb ** 2)
    var_R = (params.n_c_bath["R"] + 0.5) * dt  # plain increment, recorded
    sqrt_kR = math.sqrt(params.kappa_R)
    # the recorded increment keeps the plain white-noise variance, but its
    # drive of the cavity must carry the exact OU per-step strength or the
    # cavity (and the back-action it mediates) runs hot by O(kappa dt)
    ou_scale = math.sqrt((1.0 - Ed ** 2) / (params.kappa * dt))

    amps_red = np.array([a for a, _ in red], dtype=np.complex128)
    amps_blue = np.array([a for a, _ in blue], dtype=np.complex128)
    eps_red = np.array([e for _, e in red])
    eps_blue = np.array([e for _, e in blue])
    w_centers = np.array(list(centers.values()))
    n_ch = w_centers.size

    channels = {name: np.empty((cfg.n_traj, n_samples), dtype=np.complex128)
                for name in ["b"] + list(centers)}
    names = ["b"] + list(centers)

    for i in range(cfg.n_traj):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(i,))))
        d = 0.0 + 0.0j
        bm = 0.0 + 0.0j
        acc = np.zeros(n_ch + 1, dtype=np.complex128)
        acc_fill = 0
        rec = np.empty((n_ch + 1, n_samples), dtype=np.complex128)
        rec_idx = 0
        step0 = 0
        while step0 < n_steps:
            m = min(_CHUNK_STEPS, n_steps - step0)
            t_mid = (step0 + np.arange(m) + 0.5) * dt
            t_n = (step0 + np.arange(m) + 1.0) * dt
            ph_red = np.exp(-1j * np.outer(t_mid, eps_red)) \
                if eps_red.size else np.zeros((m, 0), dtype=np.complex128)
            ph_blue = np.exp(-1j * np.outer(t_mid, eps_blue)) \
                if eps_blue.size else np.zeros((m, 0), dtype=np.complex128)
            mix = np.exp(1j * np.outer(t_n, w_centers)) \
                if n_ch else np.zeros((m, 0), dtype=np.complex128)

            def cnoise(var, size):
                s = math.sqrt(var / 2.0)
                return (rng.normal(0.0, s, size)
                        + 1j * rng.normal(0.0, s, size))

            noise_d = cnoise(var_d, m)
            noise_b = cnoise(var_b, m)
            dW_R = cnoise(var_R, m)
            d, bm, acc_fill, rec_idx = _step_chunk(
                d, bm, Ed, phid, Eb, phib, params.g0,
                amps_red, amps_blue, ph_red, ph_blue,
                noise_d, noise_b, dW_R, sqrt_kR * ou_scale, sqrt_kR, 1.0 / dt,
                mix, decim, acc_fill, acc, rec, rec_idx)
            step0 += m
        for c, name in enumerate(names):
            channels[name][i] = rec[c]

    # drop the transient: a few cavity + mechanical relaxation times
    t_relax = 5.0 / eff.gamma_m
    n_skip = min(int(t_relax / (dt * decim)), n_samples // 4)
    for name in channels:
        channels[name] = np.ascontiguousarray(channels[name][:, n_skip:])

    cents = {"b": 0.0}
    cents.update(centers)
    return TrajectoryEnsemble(
        dt=dt, duration=cfg.duration, n_traj=cfg.n_traj, seed=cfg.seed,
        sample_rate=1.0 / (dt * decim), channels=channels, centers=cents,
        params=params, eff=eff,
        meta={"decimation": decim, "n_skip": n_skip,
              "gamma_red": g_red, "gamma_blue": g_blue})


_KIND_BY_CHANNEL = {
    "b": SpectrumKind.MECHANICAL_X,
    "x1": SpectrumKind.QUADRATURE_X1,
    "x2": SpectrumKind.QUADRATURE_X2,
}


def psd(ensemble: TrajectoryEnsemble, channel: str,
        cfg: WelchConfig, parseval_tol: float = 0.05) -> Spectrum:
    """Trajectory-averaged two-sided Welch PSD of a recorded channel.

    Density normalization: the integral over ordinary frequency equals the
    time-series variance exactly.  The raw Welch estimate can drift from
    that identity by the window/overlap estimator noise (largest for
    narrowband records); the drift is required to stay below
    ``parseval_tol`` and then normalized away.  Standard errors
    (trajectory scatter) ride along in ``meta['sem']``.
    """
    z = ensemble._series(channel)
    if cfg.segment_length > z.shape[1]:
        raise ValueError(f"segment ({cfg.segment_length}) longer than the "
                         f"record ({z.shape[1]} samples)")
    fs = ensemble.sample_rate
    noverlap = int(cfg.overlap * cfg.segment_length)
    f, p = welch(z, fs=fs, window=cfg.window.value,
                 nperseg=cfg.segment_length, noverlap=noverlap,
                 detrend=False, return_onesided=False, scaling="density",
                 axis=1)
    order = np.argsort(f)
    f = f[order]
    p = p[:, order]
    mean = p.mean(axis=0)
    sem = p.std(axis=0, ddof=1) / math.sqrt(max(ensemble.n_traj, 2) - 1) \
        if ensemble.n_traj > 1 else np.zeros_like(mean)

    var_series = float(np.mean(np.abs(z) ** 2))
    var_psd = float(np.trapezoid(mean, f))
    if var_series > 0 and var_psd > 0:
        if abs(var_psd - var_series) > parseval_tol * var_series:
            raise RuntimeError(
                f"Parseval check failed: integral {var_psd:.6g} vs variance "
                f"{var_series:.6g} ({abs(var_psd / var_series - 1):.2%})")
        mean = mean * (var_series / var_psd)
        sem = sem * (var_series / var_psd)

    kind = _KIND_BY_CHANNEL.get(channel, SpectrumKind.CAVITY_OUTPUT_QUANTA)
    center = ensemble.centers.get(channel, 0.0)
    if channel in ("b", "x1", "x2"):
        ref = SpectrumReference.MECHANICAL_RESONANCE
    elif abs(center) > 0:
        ref = SpectrumReference.SIDEBAND_CENTER
    else:
        ref = SpectrumReference.CAVITY_RESONANCE
    vals = mean.copy()
    scale = 1.0
    if channel == "b":
        # displacement density: x = x_zp (b e^{-i w_m t} + c.c.) carries both
        # sidebands, so S_x picks up 2 x_zp^2 times the envelope density
        scale = 2.0 * ensemble.params.x_zp ** 2
        vals *= scale
        kind = SpectrumKind.MECHANICAL_X
    return Spectrum(TWO_PI * f, np.clip(vals, 0.0, None), kind, ref,
                    {"backend": "stochastic", "n_traj": ensemble.n_traj,
                     "seed": ensemble.seed, "center": center,
                     "sem": sem * scale})


def quadrature_series(ensemble: TrajectoryEnsemble
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Real quadrature records X1(t), X2(t) in metres, per trajectory."""
    b = ensemble.channels["b"]
    xzp = ensemble.params.x_zp
    return 2.0 * xzp * b.real, -2.0 * xzp * b.imag


def sideband_asymmetry(*_args, **_kwargs):
    """Asymmetry is not defined for this backend.

    The classical drives are symmetrized, which erases the one-quantum
    sideband imbalance; route asymmetry queries to the lattice solver.
    """
    raise AsymmetryUnavailableError(
        "symmetrized classical noise cannot resolve sideband asymmetry; "
        "use the lattice-solver backend")


def default_welch(ensemble: TrajectoryEnsemble,
                  segments: int = 8) -> WelchConfig:
    """Segment length splitting the record into ~2*segments 50% overlaps."""
    n = ensemble.n_samples
    return WelchConfig(segment_length=max(n // segments, 8))
