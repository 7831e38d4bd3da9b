"""Command-line front end: config loading, protocol dispatch, CSV emission.

Subcommands: spectrum, reproduce, calibrate, validate.  Exit codes:
0 success, 1 validation failure, 2 configuration/usage error.  Every output
file starts with a comment header carrying the config digest and seed, and
identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import analysis, floquet, protocols, spectra, stochastic
from .config import ConfigError, RunConfig, default_config, load_config
from .model import (
    BAE,
    BAEWithProbe,
    DetunedTwoTone,
    SingleRed,
    gamma_opt,
    n_p_for_gamma_opt,
    temperature_from_occupancy,
)
from .spectrum import Spectrum, default_grid

TWO_PI = 2.0 * math.pi

DEFAULT_SEED = 1234
FIGURE_IDS = ("1c", "1d", "2a", "2b", "3b", "3c", "3d", "3e")


class ValidationFailure(RuntimeError):
    pass


def _load(args) -> RunConfig:
    if args.config:
        return load_config(args.config)
    return default_config()


def _header(cfg: RunConfig, seed: int) -> dict:
    return {"config_digest": cfg.digest, "seed": seed}


def _write_spectrum(path, spec: Spectrum, cfg: RunConfig, seed: int) -> None:
    spec.meta.pop("sem", None)  # arrays do not belong in CSV headers
    spec.to_csv(path, header_meta=_header(cfg, seed))


def _maybe_plot(path_csv, spec: Spectrum, enabled: bool) -> None:
    if not enabled:
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(spec.freq / TWO_PI, spec.values, lw=0.9)
    ax.set_xlabel("offset (Hz)")
    ax.set_ylabel(spec.units)
    fig.tight_layout()
    fig.savefig(os.path.splitext(path_csv)[0] + ".svg")
    plt.close(fig)


# ---------------------------------------------------------------------------
# spectrum


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    if cfg.scheme is None:
        raise ConfigError("config has no 'drive' section to build a scheme")
    params, eff = cfg.params, cfg.effective_mechanics()
    scheme = cfg.scheme
    seed = args.seed
    grid = default_grid(eff.gamma_m, cfg.analysis.grid_span_linewidths,
                        cfg.analysis.grid_points)
    os.makedirs(args.out, exist_ok=True)
    outputs = {}

    if args.backend == "closed_form":
        if isinstance(scheme, DetunedTwoTone):
            outputs["sideband_red"] = spectra.sideband_out(
                grid, params, eff, scheme, "red")
            outputs["sideband_blue"] = spectra.sideband_out(
                grid, params, eff, scheme, "blue")
        elif isinstance(scheme, (BAE, BAEWithProbe)):
            qs = spectra.s_quadratures_bae(grid, params, eff, scheme)
            outputs["s_x1"] = qs.s_x1
            outputs["s_x2"] = qs.s_x2
        else:
            outputs["output_noise"] = spectra.cavity_output_noise(grid, params)
    elif args.backend == "floquet":
        sol = floquet.solve_response(params, eff, scheme.tones(params),
                                     truncation=args.truncation)
        corr = floquet.CorrelatorSpec.from_system(params, eff)
        outputs["s_x1"] = sol.spectrum("x1", grid, corr)
        outputs["s_x2"] = sol.spectrum("x2", grid, corr)
        outputs["output"] = sol.spectrum("output", grid, corr)
    elif args.backend == "stochastic":
        ens = stochastic.integrate(params, eff, scheme,
                                   stochastic.SimConfig(seed=seed,
                                                        duration=0.5,
                                                        n_traj=16))
        w = stochastic.default_welch(ens)
        outputs["s_x1"] = stochastic.psd(ens, "x1", w)
        outputs["s_x2"] = stochastic.psd(ens, "x2", w)
    else:
        raise ConfigError(f"unknown backend '{args.backend}'")

    for name, spec in outputs.items():
        path = os.path.join(args.out, f"spectrum_{name}.csv")
        _write_spectrum(path, spec, cfg, seed)
        _maybe_plot(path, spec, args.plot)
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# reproduce


def _check(label, value, target, tol) -> tuple[str, bool]:
    ok = abs(value - target) <= tol
    word = "PASS" if ok else "FAIL"
    return (f"[{word}] {label}: {value:.4g} (target {target:.4g} "
            f"± {tol:.2g})", ok)


def cmd_reproduce(args) -> int:
    if args.figure not in FIGURE_IDS:
        print(f"unknown figure id '{args.figure}' (choose from "
              f"{', '.join(FIGURE_IDS)})", file=sys.stderr)
        return 2
    cfg = _load(args)
    params, eff = cfg.params, cfg.effective_mechanics()
    seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    checks = []
    manifest = [f"config_digest={cfg.digest}", f"seed={seed}",
                f"figure={args.figure}"]

    def write_report(name, report):
        path = os.path.join(args.out, f"{name}.csv")
        report.config_digest = cfg.digest
        report.to_csv(path)
        manifest.append(f"{name}.csv backend={report.backend}")
        print(f"wrote {path}")

    fig = args.figure
    if fig == "1c":
        temps = np.linspace(0.02, 0.2, 7)
        rows = [(t, protocols.expected_thermal_ratio(params, t))
                for t in temps]
        cal, g0_est = protocols.thermal_calibration(rows, params)
        rep = protocols.ExperimentReport(
            scheme="single_red", sweep_variable="T_m", sweep_values=list(temps),
            rows=[{"T_m_K": t, "power_ratio": r} for t, r in rows],
            seed=seed, config_digest=cfg.digest,
            summary={"slope": cal.value, "g0_estimate_hz": g0_est / TWO_PI})
        write_report("fig1c", rep)
        checks.append(_check("thermal slope", cal.value, 9.709e8, 0.02e9))
    elif fig == "1d":
        beta_true = 2.25e11
        n_ps = np.geomspace(2e5, 5e6, 6)
        pts = [(n_p / beta_true, gamma_opt(params, n_p)) for n_p in n_ps]
        cal = protocols.photon_calibration(pts, params)
        rep = protocols.ExperimentReport(
            scheme="single_red", sweep_variable="P_thru",
            sweep_values=[p[0] for p in pts],
            rows=[{"P_thru_W": p, "gamma_opt_hz": g / TWO_PI}
                  for p, g in pts],
            seed=seed, config_digest=cfg.digest,
            summary={"beta_per_W": cal.value})
        write_report("fig1d", rep)
        checks.append(_check("photon-number calibration", cal.value,
                             beta_true, 0.01 * beta_true))
    elif fig == "2a":
        grid = default_grid(eff.gamma_m)
        dtt = DetunedTwoTone(Delta=TWO_PI * 5e3, n_p_per_tone=2.3e6)
        red, blue = protocols.sideband_spectra(params, eff, dtt, "closed_form",
                                               grid)
        avg = analysis.average_sidebands(red, blue)
        path = os.path.join(args.out, "fig2a_dtt.csv")
        _write_spectrum(path, avg, cfg, seed)
        qs = spectra.s_quadratures_bae(grid, params, eff, BAE(n_p_total=4.6e6))
        path2 = os.path.join(args.out, "fig2a_bae.csv")
        _write_spectrum(path2, qs.s_x1, cfg, seed)
        manifest += ["fig2a_dtt.csv backend=closed_form",
                     "fig2a_bae.csv backend=closed_form"]
        print(f"wrote {path}\nwrote {path2}")
    elif fig == "2b":
        n_ps = np.geomspace(2e5, 5e6, 8)
        rep_d = protocols.run_dtt_sweep(n_ps, params, eff, cfg.amplifier,
                                        backend=args.backend
                                        if args.backend != "stochastic"
                                        else "closed_form", seed=seed)
        rep_b = protocols.run_bae_sweep(n_ps, params, eff, cfg.amplifier,
                                        seed=seed)
        write_report("fig2b_dtt", rep_d)
        write_report("fig2b_bae", rep_b)
        imp_47 = np.interp(4.7e6, n_ps, rep_b.column("imprecision_xzp2"))
        checks.append(_check("imprecision at n_p=4.7e6 (x_zp^2)",
                             float(imp_47), 0.6, 0.18))
    elif fig in ("3b", "3c"):
        scheme = BAEWithProbe(n_p_pump=1.1e6, n_p_probe=1.1e4,
                              delta=TWO_PI * 2e3)
        phis = list(np.linspace(0.0, math.pi, 13))
        rep = protocols.quadrature_tomography(phis, params, eff, scheme,
                                              backend="closed_form", seed=seed)
        write_report(f"fig{fig}", rep)
        budget = spectra.bae_backaction_budget(params, eff,
                                               BAE(n_p_total=1.1e6))
        x2 = 1.0 + 2.0 * (budget.n_m_T + budget.n_ba_BAE)
        checks.append(_check("tomography <X2^2> (x_zp^2)",
                             rep.summary["var_x2_fit"], x2, 0.05 * x2))
    elif fig in ("3d", "3e"):
        d_etas = [5.7, 9.2, 13.0, 21.0]
        rep = protocols.noise_injection_sweep(
            d_etas, params, eff, cfg.amplifier,
            n_p_total=1.1e6, seed=seed)
        write_report(f"fig{fig}", rep)
        checks.append(_check("injection-sweep slope (2 alpha)",
                             rep.summary["slope"], 0.44, 0.02))
        checks.append(_check("injection-sweep intercept",
                             rep.summary["intercept"], 1.21, 0.05))

    with open(os.path.join(args.out, f"manifest_fig{fig}.txt"), "w") as f:
        f.write("\n".join(manifest) + "\n")
    ok = True
    for line, passed in checks:
        print(line)
        ok &= passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    params = cfg.params
    seed = args.seed
    os.makedirs(args.out, exist_ok=True)

    temps = np.linspace(0.02, 0.2, 7)
    thermal_pts = [(t, protocols.expected_thermal_ratio(params, t))
                   for t in temps]
    cal_thermal, g0_est = protocols.thermal_calibration(thermal_pts, params)

    beta_true = 2.25e11
    n_ps = np.geomspace(2e5, 5e6, 6)
    photon_pts = [(n_p / beta_true, gamma_opt(params, n_p)) for n_p in n_ps]
    cal_photon = protocols.photon_calibration(photon_pts, params)

    grid = np.linspace(-3.0, 3.0, 601) * params.kappa
    cal_ncr = protocols.estimate_ncR(
        spectra.cavity_output_noise(grid, params), params)

    path = os.path.join(args.out, "calibrations.csv")
    with open(path, "w") as f:
        f.write(f"# config_digest={cfg.digest} seed={seed}\n")
        f.write("kind,value,uncertainty,inputs_digest\n")
        for cal in (cal_thermal, cal_photon, cal_ncr):
            f.write(f"{cal.kind.value},{cal.value:.10g},"
                    f"{cal.uncertainty:.10g},{cal.inputs_digest}\n")
    print(f"wrote {path}")
    print(f"thermal slope {cal_thermal.value:.4g} "
          f"(g0 estimate {g0_est / TWO_PI:.3f} Hz)")
    print(f"photon-number beta {cal_photon.value:.4g} /W")
    print(f"output-port occupancy {cal_ncr.value:.3f} "
          f"± {cal_ncr.uncertainty:.3f}")
    return 0


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    cfg = _load(args)
    params, eff = cfg.params, cfg.effective_mechanics()
    seed = args.seed
    trunc = args.truncation
    results = []

    def check(name, fn):
        try:
            fn()
            results.append((name, True, ""))
        except Exception as exc:  # report, do not abort the suite
            results.append((name, False, str(exc).splitlines()[0][:100]))

    grid = default_grid(eff.gamma_m, 25.0, 801)

    def bae_oracle():
        scheme = BAE(n_p_total=1.0e6)
        qs = spectra.s_quadratures_bae(grid, params, eff, scheme)
        sol = floquet.solve_response(params, eff, scheme.tones(params),
                                     truncation=trunc)
        rep = floquet.convergence_report(params, eff, scheme.tones(params),
                                         grid, truncation=trunc,
                                         observable="x2")
        if not rep.converged:
            raise ValidationFailure(str(rep))
        fit_c = analysis.fit_lorentzian(qs.s_x2)
        fit_f = analysis.fit_lorentzian(sol.spectrum("x2", grid))
        rel = abs(fit_f.area / fit_c.area - 1.0)
        if rel > 0.05:
            raise ValidationFailure(f"area mismatch {rel:.2%}")

    def dtt_oracle():
        scheme = DetunedTwoTone(Delta=TWO_PI * 5e3, n_p_per_tone=1.0e6)
        red_c, blue_c = protocols.sideband_spectra(params, eff, scheme,
                                                   "closed_form", grid)
        red_f, blue_f = protocols.sideband_spectra(
            params, eff, scheme, "floquet", grid, truncation=trunc)
        for c, fq in ((red_c, red_f), (blue_c, blue_f)):
            rel = abs(analysis.fit_lorentzian(fq).area
                      / analysis.fit_lorentzian(c).area - 1.0)
            if rel > 0.05:
                raise ValidationFailure(f"sideband area mismatch {rel:.2%}")

    def stochastic_oracle():
        scheme = DetunedTwoTone(Delta=TWO_PI * 5e3, n_p_per_tone=1.0e6)
        ens = stochastic.integrate(params, eff, scheme,
                                   stochastic.SimConfig(duration=0.4,
                                                        n_traj=12,
                                                        seed=seed))
        w = stochastic.default_welch(ens)
        spec = stochastic.psd(ens, "b", w)
        # fit only a window around the line: the full decimated band is
        # orders of magnitude wider than the mechanical linewidth
        window = np.abs(spec.freq) < 20.0 * eff.gamma_m
        fit = analysis.fit_lorentzian(spec.interpolated(spec.freq[window]))
        n_bar = spectra.dtt_backaction_occupancy(params, eff, scheme) \
            + eff.n_m_T
        expect = params.x_zp ** 2 * (1.0 + 2.0 * n_bar)
        sem_area = float(np.trapezoid(spec.meta["sem"][window],
                                      spec.freq[window])) / TWO_PI
        tol = max(3.0 * sem_area, 0.1 * expect)
        if abs(fit.area - expect) > tol:
            raise ValidationFailure(
                f"area {fit.area:.3g} vs closed form {expect:.3g}")

    def ratio_invariant():
        budget = spectra.bae_backaction_budget(params, eff,
                                               BAE(n_p_total=1e6))
        expect = (1.0 / 32.0) * (params.kappa / params.omega_m) ** 2
        if abs(budget.n_bad / budget.n_ba_BAE - expect) > 1e-12:
            raise ValidationFailure("n_bad ratio broken")

    check("lattice-vs-closed-form (single quadrature)", bae_oracle)
    check("lattice-vs-closed-form (two-tone sidebands)", dtt_oracle)
    check("stochastic-vs-closed-form (two-tone)", stochastic_oracle)
    check("leakage-ratio identity", ratio_invariant)

    width = max(len(n) for n, _, _ in results)
    ok = True
    for name, passed, msg in results:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({msg})" if msg else ""
        print(f"[{status}] {name:<{width}}{suffix}")
        ok &= passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twotone",
        description="Multi-tone cavity electromechanics spectra, "
                    "calibrations and figure pipelines")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config path "
                                         "(default: in-repo device config)")
        sp.add_argument("--backend", default="closed_form",
                        choices=list(protocols.BACKENDS))
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--truncation", type=int, default=8,
                        help="sideband-lattice depth for the lattice solver")
        sp.add_argument("--plot", action="store_true",
                        help="also emit SVG plots")

    sp = sub.add_parser("spectrum", help="emit spectra for the configured "
                                         "drive scheme")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("reproduce", help="run a figure pipeline")
    sp.add_argument("figure", help=f"figure id: {', '.join(FIGURE_IDS)}")
    common(sp)
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("calibrate", help="run the calibration protocols")
    common(sp)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("validate", help="cross-backend equivalence checks")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
