"""Motional sideband asymmetry under a detuned two-tone drive.

With tones detuned by +-(omega_m + Delta), the up- and down-converted
sidebands appear at separate output frequencies.  The down-converted
(blue) sideband carries one extra quantum of weight -- the mechanical
zero-point motion -- so its area exceeds the other by 1/(n_bar + ...).
The asymmetry also encodes the cavity and output-line occupancies.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from twotone import analysis, spectra
from twotone.config import default_config
from twotone.model import DetunedTwoTone
from twotone.spectrum import default_grid

TWO_PI = 2.0 * math.pi
OUT_DIR = pathlib.Path(__file__).parent / "output"
OUT_DIR.mkdir(exist_ok=True)

cfg = default_config()
eff = cfg.effective_mechanics()
# warm the cavity to make the occupancy terms visible
params = cfg.params.with_cavity_occupancy(0.6)

scheme = DetunedTwoTone(Delta=TWO_PI * 5e3, n_p_per_tone=2.3e6)
n_bar = eff.n_m_T + spectra.dtt_backaction_occupancy(params, eff, scheme)
print(f"driven mechanical occupancy n_bar = {n_bar:.1f} "
      f"(thermal {eff.n_m_T:.0f} + measurement heating)")

grid = default_grid(eff.gamma_m, span_linewidths=25.0, n_points=1001)
red = spectra.sideband_out(grid, params, eff, scheme, "red")
blue = spectra.sideband_out(grid, params, eff, scheme, "blue")

fit_r = analysis.fit_lorentzian(red)
fit_b = analysis.fit_lorentzian(blue)
ratio = fit_b.area / fit_r.area
w_red, w_blue = spectra.sideband_weights(params, eff, scheme)
print(f"sideband weights: red {w_red:.2f}, blue {w_blue:.2f} quanta")
print(f"blue/red area ratio {ratio:.4f} "
      f"(one-quantum asymmetry at n_bar ~ {n_bar:.0f})")

# averaging the two sidebands cancels the occupancy terms exactly
from twotone.model import gamma_opt

avg = analysis.average_sidebands(red, blue)
fit_avg = analysis.fit_lorentzian(avg)
scale = (params.kappa_R / params.kappa) * gamma_opt(params,
                                                    scheme.n_p_per_tone)
print(f"averaged weight {fit_avg.area / scale:.2f} quanta = n_bar + 1/2 "
      f"= {n_bar + 0.5:.2f}")

fig, ax = plt.subplots(figsize=(5.5, 3.4))
ax.plot(grid / TWO_PI, red.values, label="up-converted (red pump)")
ax.plot(grid / TWO_PI, blue.values, label="down-converted (blue pump)")
ax.plot(grid / TWO_PI, avg.values, "k--", lw=1.0, label="average")
ax.set_xlabel("offset from sideband centre (Hz)")
ax.set_ylabel("output noise (quanta/Hz)")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(OUT_DIR / "02_sideband_asymmetry.svg")
print(f"figure written to {OUT_DIR / '02_sideband_asymmetry.svg'}")
