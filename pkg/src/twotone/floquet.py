"""Numerical multi-tone input-output solver.

Solves the linearized cavity/mechanics equations exactly (no rotating-wave
approximation) by frequency-domain inversion over a truncated lattice of
sideband frequencies.  Each drive tone at offset nu from the cavity
resonance couples the cavity field at frequency w to the mechanical
envelopes at w - (nu + omega_m) and w - (nu - omega_m); iterating those
shifts generates the lattice.

The block matrix is frequency-independent apart from -i w on the diagonal,
so one eigendecomposition per scheme gives every frequency point in O(n^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg

from .model import EffectiveMechanics, SystemParams, Tone
from .spectrum import GridError, Spectrum, SpectrumKind, SpectrumReference

TWO_PI = 2.0 * math.pi

_OPS = ("d", "d_dag", "b", "b_dag")
_PORTS = ("L", "R", "int", "mech")
# channel layout per lattice site: annihilation inputs then creation inputs
_CHANNELS = [(p, False) for p in _PORTS] + [(p, True) for p in _PORTS]


class SingularSystemError(RuntimeError):
    """The driven linear system has an undamped/unstable mode."""


class ConvergenceWarning(UserWarning):
    pass


class Ordering(Enum):
    SYMMETRIZED = "symmetrized"
    NORMAL = "normal"
    ANTI_NORMAL = "anti_normal"


@dataclass(frozen=True)
class CorrelatorSpec:
    """Input-noise occupancies per port and the requested operator ordering."""

    occupancies: dict  # port -> occupancy, ports L, R, int, mech
    ordering: Ordering = Ordering.SYMMETRIZED

    def __post_init__(self):
        for port in _PORTS:
            if port not in self.occupancies:
                raise ValueError(f"missing occupancy for port {port!r}")
            if self.occupancies[port] < 0:
                raise ValueError("occupancies must be >= 0")

    @classmethod
    def from_system(cls, params: SystemParams, eff: EffectiveMechanics,
                    ordering: Ordering = Ordering.SYMMETRIZED
                    ) -> "CorrelatorSpec":
        occ = {p: params.n_c_bath[p] for p in ("L", "R", "int")}
        occ["mech"] = eff.n_m_T
        return cls(occupancies=occ, ordering=ordering)

    def channel_weights(self) -> np.ndarray:
        """Weight per channel in the PSD sum, by ordering."""
        w = np.empty(len(_CHANNELS))
        for i, (port, is_creation) in enumerate(_CHANNELS):
            n = self.occupancies[port]
            if self.ordering is Ordering.SYMMETRIZED:
                w[i] = n + 0.5
            elif self.ordering is Ordering.NORMAL:
                w[i] = n + 1.0 if is_creation else n
            else:
                w[i] = n if is_creation else n + 1.0
        return w


@dataclass
class SidebandLattice:
    """Truncated set of envelope frequencies reached by tone scattering."""

    order: int
    frequencies: np.ndarray  # sorted, rad/s, includes 0
    index: dict = field(repr=False, default_factory=dict)

    @property
    def n_sites(self) -> int:
        return self.frequencies.size

    def site_of(self, freq: float) -> int | None:
        key = self.index.get(self._key(freq))
        return key

    def _key(self, freq: float) -> int:
        return int(round(freq / self.tol)) if self.tol else 0

    @classmethod
    def build(cls, shifts: Sequence[float], order: int,
              scale: float) -> "SidebandLattice":
        tol = 1e-7 * scale
        lattice = cls(order=order, frequencies=np.zeros(0))
        lattice.tol = tol
        seen = {0: 0.0}
        frontier = [0.0]
        for _ in range(order):
            new = []
            for f in frontier:
                for s in shifts:
                    for g in (f + s, f - s):
                        key = int(round(g / tol))
                        if key not in seen:
                            seen[key] = g
                            new.append(g)
            frontier = new
            if not frontier:
                break
        freqs = np.array(sorted(seen.values()))
        lattice.frequencies = freqs
        lattice.index = {int(round(f / tol)): i for i, f in enumerate(freqs)}
        return lattice


@dataclass
class FloquetSolution:
    """Eigendecomposed transfer system for one drive configuration."""

    params: SystemParams
    eff: EffectiveMechanics
    lattice: SidebandLattice
    eigvals: np.ndarray
    V: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)  # V^-1 @ B, maps channels to modes
    omega_grid: np.ndarray | None = None
    truncation: int = 0

    def _row_index(self, op: str, site: int) -> int:
        return 4 * site + _OPS.index(op)

    def _channel_index(self, port: str, is_creation: bool, site: int) -> int:
        return len(_CHANNELS) * site + _CHANNELS.index((port, is_creation))

    def _observable(self, name: str, phi: float = 0.0):
        """(mode-space row vector, direct channel vector) for an observable."""
        n = self.eigvals.size
        m = self.Q.shape[1]
        site0 = self.lattice.site_of(0.0)
        xzp = self.params.x_zp
        rows: list[tuple[int, complex]] = []
        direct = np.zeros(m, dtype=complex)
        sqkR = math.sqrt(self.params.kappa_R)
        if name == "output":
            rows = [(self._row_index("d", site0), sqkR)]
            direct[self._channel_index("R", False, site0)] = 1.0
        elif name == "output_dag":
            rows = [(self._row_index("d_dag", site0), sqkR)]
            direct[self._channel_index("R", True, site0)] = 1.0
        elif name == "x1":
            rows = [(self._row_index("b", site0), xzp),
                    (self._row_index("b_dag", site0), xzp)]
        elif name == "x2":
            rows = [(self._row_index("b", site0), -1j * xzp),
                    (self._row_index("b_dag", site0), 1j * xzp)]
        elif name == "xphi":
            # x_zp (b e^{i phi} + b^dag e^{-i phi})
            rows = [(self._row_index("b", site0), xzp * np.exp(1j * phi)),
                    (self._row_index("b_dag", site0), xzp * np.exp(-1j * phi))]
        else:
            raise ValueError(f"unknown observable {name!r}")
        p_eff = np.zeros(n, dtype=complex)
        for r, coef in rows:
            p_eff += coef * self.V[r, :]
        return p_eff, direct

    def psd(self, observable: str, omega_grid: np.ndarray | None = None,
            correlators: CorrelatorSpec | None = None,
            phi: float = 0.0, chunk: int = 1024) -> np.ndarray:
        """PSD of the observable on the grid (density per ordinary Hz)."""
        if omega_grid is None:
            omega_grid = self.omega_grid
        if omega_grid is None:
            raise GridError("no frequency grid supplied")
        omega_grid = np.asarray(omega_grid, float)
        if self.omega_grid is not None and omega_grid is not self.omega_grid \
                and (omega_grid.shape != self.omega_grid.shape
                     or not np.array_equal(omega_grid, self.omega_grid)):
            raise GridError("grid does not match the grid the response was "
                            "solved on")
        if correlators is None:
            correlators = CorrelatorSpec.from_system(self.params, self.eff)
        w_site = correlators.channel_weights()
        n_sites = self.lattice.n_sites
        w = np.tile(w_site, n_sites)

        p_eff, direct = self._observable(observable, phi)
        Qw = self.Q * w[None, :]
        H = np.einsum("km,lm->kl", Qw, self.Q.conj())
        H = (p_eff[:, None] * p_eff.conj()[None, :]) * H
        u = Qw @ direct.conj() * p_eff
        c0 = float(np.real(w @ (np.abs(direct) ** 2)))

        out = np.empty(omega_grid.size)
        lam = self.eigvals
        for i0 in range(0, omega_grid.size, chunk):
            wgrid = omega_grid[i0:i0 + chunk]
            g = 1.0 / (lam[None, :] - 1j * wgrid[:, None])
            A = g @ H
            s = np.einsum("wk,wk->w", A, g.conj()).real
            s += 2.0 * np.real(g @ u)
            out[i0:i0 + chunk] = s + c0
        return out

    def spectrum(self, observable: str, omega_grid: np.ndarray,
                 correlators: CorrelatorSpec | None = None,
                 phi: float = 0.0) -> Spectrum:
        vals = self.psd(observable, omega_grid, correlators, phi)
        kind = {
            "output": SpectrumKind.CAVITY_OUTPUT_QUANTA,
            "x1": SpectrumKind.QUADRATURE_X1,
            "x2": SpectrumKind.QUADRATURE_X2,
            "xphi": SpectrumKind.QUADRATURE_PHI,
        }.get(observable, SpectrumKind.CAVITY_OUTPUT_QUANTA)
        ref = (SpectrumReference.CAVITY_RESONANCE if observable.startswith("out")
               else SpectrumReference.MECHANICAL_RESONANCE)
        return Spectrum(omega_grid, np.clip(vals, 0.0, None), kind, ref,
                        {"backend": "floquet", "truncation": self.truncation})


def solve_response(params: SystemParams, eff: EffectiveMechanics,
                   tones: Sequence[Tone], truncation: int = 8,
                   omega_grid: np.ndarray | None = None) -> FloquetSolution:
    """Build and eigendecompose the sideband-lattice response.

    ``tones`` are the measurement tones (cooling is normally folded into
    ``eff``).  ``truncation`` is the scattering depth of the lattice.
    """
    tones = [t for t in tones if t.photon_number > 0]
    wm = params.omega_m
    shifts = []
    for t in tones:
        nu = t.detuning_from_cavity
        shifts.extend([nu + wm, nu - wm])
    scale = max([abs(s) for s in shifts] + [wm])
    lattice = SidebandLattice.build(shifts, truncation, scale)

    L = lattice.n_sites
    n = 4 * L
    freqs = lattice.frequencies
    kap2 = params.kappa / 2.0
    gm2 = eff.gamma_m / 2.0
    g0 = params.g0

    M = np.zeros((n, n), dtype=complex)
    for s in range(L):
        mu = freqs[s]
        M[4 * s + 0, 4 * s + 0] = -1j * mu + kap2
        M[4 * s + 1, 4 * s + 1] = -1j * mu + kap2
        M[4 * s + 2, 4 * s + 2] = -1j * mu + gm2
        M[4 * s + 3, 4 * s + 3] = -1j * mu + gm2

    def add(row_op, row_site, col_op, target_freq, value):
        col_site = lattice.site_of(target_freq)
        if col_site is None:
            return
        M[4 * row_site + _OPS.index(row_op),
          4 * col_site + _OPS.index(col_op)] += value

    for t in tones:
        A = t.amplitude
        nu = t.detuning_from_cavity
        sp, sm = nu + wm, nu - wm
        for s in range(L):
            mu = freqs[s]
            add("d", s, "b", mu - sp, 1j * g0 * A)
            add("d", s, "b_dag", mu - sm, 1j * g0 * A)
            add("d_dag", s, "b_dag", mu + sp, -1j * g0 * A.conjugate())
            add("d_dag", s, "b", mu + sm, -1j * g0 * A.conjugate())
            add("b", s, "d", mu + sp, 1j * g0 * A.conjugate())
            add("b", s, "d_dag", mu - sm, 1j * g0 * A)
            add("b_dag", s, "d_dag", mu - sp, -1j * g0 * A)
            add("b_dag", s, "d", mu + sm, -1j * g0 * A.conjugate())

    # noise input matrix: equations carry -sqrt(rate) per port channel
    m = len(_CHANNELS) * L
    B = np.zeros((n, m), dtype=complex)
    rates = {"L": params.kappa_L, "R": params.kappa_R, "int": params.kappa_int,
             "mech": eff.gamma_m}
    for s in range(L):
        base = len(_CHANNELS) * s
        for j, port in enumerate(("L", "R", "int")):
            B[4 * s + 0, base + _CHANNELS.index((port, False))] = \
                -math.sqrt(rates[port])
            B[4 * s + 1, base + _CHANNELS.index((port, True))] = \
                -math.sqrt(rates[port])
        B[4 * s + 2, base + _CHANNELS.index(("mech", False))] = \
            -math.sqrt(rates["mech"])
        B[4 * s + 3, base + _CHANNELS.index(("mech", True))] = \
            -math.sqrt(rates["mech"])

    lam, V = scipy.linalg.eig(M)
    min_damp = float(np.min(lam.real))
    if min_damp <= 1e-10 * params.kappa:
        raise SingularSystemError(
            f"undamped or anti-damped mode (min damping {min_damp:.3g} 1/s); "
            "the driven system is singular on the real-frequency axis")
    Q = np.linalg.solve(V, B)
    return FloquetSolution(params=params, eff=eff, lattice=lattice,
                           eigvals=lam, V=V, Q=Q, omega_grid=omega_grid,
                           truncation=truncation)


def output_spectrum(solution: FloquetSolution, correlators: CorrelatorSpec,
                    omega_grid: np.ndarray,
                    observable: str = "output", phi: float = 0.0) -> Spectrum:
    """Assemble the requested PSD from the solved transfer system."""
    return solution.spectrum(observable, omega_grid, correlators, phi)


@dataclass(frozen=True)
class ConvergenceReport:
    truncation: int
    truncation_refined: int
    max_rel_change: float
    converged: bool

    def __str__(self):
        status = "converged" if self.converged else "NOT converged"
        return (f"truncation N={self.truncation} -> N={self.truncation_refined}: "
                f"max relative PSD change {self.max_rel_change:.3e} ({status})")


def convergence_report(params: SystemParams, eff: EffectiveMechanics,
                       tones: Sequence[Tone], omega_grid: np.ndarray,
                       truncation: int = 8, observable: str = "output",
                       correlators: CorrelatorSpec | None = None,
                       rel_tol: float = 1e-3) -> ConvergenceReport:
    """Compare PSDs at N and N+2 lattice depth; warn if they still move."""
    s1 = solve_response(params, eff, tones, truncation)
    s2 = solve_response(params, eff, tones, truncation + 2)
    p1 = s1.psd(observable, omega_grid, correlators)
    p2 = s2.psd(observable, omega_grid, correlators)
    scale = float(np.max(np.abs(p2)))
    rel = float(np.max(np.abs(p1 - p2))) / scale if scale else 0.0
    converged = rel < rel_tol
    if not converged:
        warnings.warn(f"sideband lattice not converged at N={truncation}: "
                      f"PSD still changes by {rel:.2%}", ConvergenceWarning,
                      stacklevel=2)
    return ConvergenceReport(truncation, truncation + 2, rel, converged)


def incoherent_sum(spectra: Sequence[Spectrum],
                   vacuum_floor: float = 0.5) -> Spectrum:
    """Combine spectra of independently solved tone groups.

    Each solve carries its own vacuum/thermal floor; the incoherent
    combination keeps a single floor and adds the above-floor parts.
    Valid when the groups' beat notes are far outside the band of interest.
    """
    if not spectra:
        raise ValueError("need at least one spectrum")
    base = spectra[0]
    vals = base.values.copy()
    for sp in spectra[1:]:
        if sp.freq.shape != base.freq.shape or \
                not np.allclose(sp.freq, base.freq):
            raise GridError("incoherent sum needs identical grids")
        vals += sp.values - vacuum_floor
    return Spectrum(base.freq, vals, base.kind, base.reference,
                    {"combined": "incoherent_sum"})
