"""
Command-line front end.

    hybrid-node preset fig5b --out results/
    hybrid-node fwm-sweep --config my.yaml
    hybrid-node modes --wy 500 --wz 640

Exit status: 0 on success, 2 for usage or configuration errors, 3 when a
numerical routine fails.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.constants import c, pi

from . import fwm, geometry, materials, modesolver, purcell
from .config import PRESETS, ConfigError, ExperimentConfig, validate_config
from .resonator import BAND_946, BAND_1550, idler_detuning

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (
    fwm.SolverError,
    modesolver.ModeSolverError,
    modesolver.StencilError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return f"{v:.10g}"


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _linspace(spec):
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))


def _geomspace(spec):
    lo, hi, n = spec
    return np.geomspace(float(lo), float(hi), int(n))


class Run:
    """Output directory, summary lines and optional plotting for one invocation."""

    def __init__(self, cfg: ExperimentConfig, out: Path, plot: bool):
        self.cfg = cfg
        self.out = out
        self.plot = plot
        self.summary: List[str] = []
        self.files: List[Path] = []

    def csv(self, name, header, rows):
        self.out.mkdir(parents=True, exist_ok=True)
        self.files.append(write_csv(self.out / name, header, rows))

    def say(self, line: str):
        self.summary.append(line)

    def figure(self, name, series, xlabel, ylabel, xlog=False):
        if not self.plot:
            return
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            warnings.warn("matplotlib is not installed; skipping plots")
            return
        plt.rcParams["svg.hashsalt"] = "hybrid-node"
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, x, y in series:
            ax.plot(x, y, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if xlog:
            ax.set_xscale("log")
        if len(series) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
        path = self.out / name
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        self.files.append(path)

    def finish(self, stream=sys.stdout):
        self.out.mkdir(parents=True, exist_ok=True)
        text = "\n".join(self.summary) + "\n"
        (self.out / "summary.txt").write_text(text)
        stream.write(text)


# -- presets -------------------------------------------------------------------


def _fig4c(run: Run):
    m = run.cfg.modesolver
    lam = _linspace(m["wavelengths_nm"])
    rows, series = [], []
    for wy, wz in m["fig4c_cross_sections_nm"]:
        xs = modesolver.CrossSection(float(wy), float(wz), m["core"], m["substrate"], grid_spacing=m["grid_nm"])
        ng = []
        for wl in lam:
            try:
                md = modesolver.mode_dispersion(xs, float(wl))
                n, g = md.mode.n_eff, md.n_g
            except modesolver.StencilError:
                n, g = float("nan"), float("nan")
            rows.append((wy, wz, wl, n, g))
            ng.append(g)
        series.append((f"{wz:g} x {wy:g} nm", lam, ng))
        ok = np.isfinite(ng)
        if ok.any():
            run.say(f"fig4c  w_z={wz:g} w_y={wy:g}: n_g from {np.nanmin(ng):.3f} to {np.nanmax(ng):.3f}")
    run.csv("fig4c.csv", ["w_y_nm", "w_z_nm", "lambda_nm", "n_eff", "n_g"], rows)
    run.figure("fig4c.svg", series, "wavelength (nm)", "group index")


def _fig4d(run: Run):
    m = run.cfg.modesolver
    scan = modesolver.group_index_matching_scan(
        m["thickness_list_nm"], m["width_list_nm"], core=m["core"], substrate=m["substrate"],
        grid_spacing=m["grid_nm"])
    run.csv("fig4d.csv", modesolver.MATCHING_HEADER, scan.rows)
    arr = scan.row_array()
    series = []
    for wz in m["thickness_list_nm"]:
        sel = arr[:, 1] == wz
        series.append((f"w_z = {wz:g} nm", arr[sel, 0], arr[sel, 6]))
        zc = scan.crossings.get(float(wz), [])
        txt = ", ".join(f"{x:.1f}" for x in zc) if zc else "none"
        finite = arr[sel, 6][np.isfinite(arr[sel, 6])]
        closest = f"; min |dn_g| = {np.min(np.abs(finite)):.4f}" if finite.size else ""
        run.say(f"fig4d  w_z={wz:g} nm: dn_g zero crossing at w_y = {txt} nm{closest}")
    run.say("fig4d  target: crossing near w_y = 500 nm for w_z = 640 nm")
    run.figure("fig4d.svg", series, "w_y (nm)", "n_g(946) - n_g(1550)")


def _fig4e(run: Run):
    m = run.cfg.modesolver
    xs = modesolver.CrossSection(m["w_y_nm"], m["w_z_nm"], m["core"], m["substrate"], grid_spacing=m["grid_nm"])
    scan = modesolver.dispersion_scan(xs, _linspace(m["wavelengths_nm"]))
    run.csv("fig4e.csv", modesolver.DISPERSION_HEADER, scan.rows())
    zc = scan.zero_crossings()
    run.say("fig4e  D = 0 at " + (", ".join(f"{x:.1f}" for x in zc) or "none") + " nm  (target 1155, 1536 nm)")
    run.figure("fig4e.svg", [("D", scan.wavelengths, scan.D)], "wavelength (nm)", "D (ps/(nm km))")


def _fig5b(run: Run):
    f = run.cfg.fwm
    powers = np.asarray(f["powers_mW"], dtype=float)
    grid = np.linspace(f["detuning_start"], f["detuning_stop"], f["detuning_points"])
    sw = fwm.sweep_signal_detuning(run.cfg.resonator, powers * 1e-3, f["mu"], grid, f["split_fraction"])
    run.csv("fig5b.csv", ["power_mW", "detuning_norm", "eta_iplus_dB"],
            ((p * 1e3, x, fwm.to_db(e)) for p, x, e in sw.rows()))
    for P, x, e in zip(powers, sw.peak_detuning, sw.peak_eta):
        run.say(f"fig5b  {P:g} mW: peak eta_i+ = {fwm.to_db(e):.3f} dB at {x:.3f} linewidths")
    run.say("fig5b  target: -0.21 dB at 0.95 linewidths for 50 mW")
    run.figure("fig5b.svg", [(f"{P:g} mW", grid, fwm.to_db(sw.eta[i])) for i, P in enumerate(powers)],
               "signal detuning / FWHM", "eta_i+ (dB)")


def _fig5c(run: Run):
    f = run.cfg.fwm
    mus = range(1, f["mu_max"] + 1)
    sw = fwm.sweep_mu(run.cfg.resonator, f["mu_power_mW"] * 1e-3, mus, f["split_fraction"])
    run.csv("fig5c.csv", ["mu", "lambda_out_nm", "eta_iplus_dB", "eta_iminus_dB"],
            zip(sw.mu, sw.lambda_iplus, fwm.to_db(sw.eta_iplus), fwm.to_db(sw.eta_iminus)))
    run.say(f"fig5c  mu=1: eta_i+ = {fwm.to_db(sw.eta_iplus[0]):.3f} dB, eta_i- = {fwm.to_db(sw.eta_iminus[0]):.3f} dB")
    run.say(f"fig5c  mu={sw.mu[-1]}: eta_i+ = {fwm.to_db(sw.eta_iplus[-1]):.3f} dB, "
            f"eta_i- = {fwm.to_db(sw.eta_iminus[-1]):.3f} dB")
    run.figure("fig5c.svg", [("i+", sw.mu, fwm.to_db(sw.eta_iplus)), ("i-", sw.mu, fwm.to_db(sw.eta_iminus))],
               "mu", "eta (dB)")


def _fig5d(run: Run):
    f = run.cfg.fwm
    powers = _linspace(f["map_powers_mW"])
    qs = _geomspace(f["map_Q_L"])
    qmap = fwm.sweep_q_power(run.cfg.resonator, powers * 1e-3, qs)
    rows = ((P, q, qmap.eta[i, j]) for i, P in enumerate(powers) for j, q in enumerate(qs))
    run.csv("fig5d.csv", ["power_mW", "Q_L", "eta_iplus"], rows)
    for target_P, target_Q in ((30.0, 4.9e4), (10.0, 8.6e4)):
        ql = fwm.sweep_q_power(run.cfg.resonator, [target_P * 1e-3], qs).unity_Q_L[0]
        run.say(f"fig5d  {target_P:g} mW: eta_i+ reaches 1 at Q_L = {ql:.4g}  (target {target_Q:.2g})")
    run.figure("fig5d.svg", [(f"Q_L = {q:.3g}", powers, qmap.eta[:, j]) for j, q in
                             enumerate(qs[:: max(1, len(qs) // 6)])], "pump power (mW)", "eta_i+")


def _table1(run: Run):
    cfg = run.cfg.resonator
    m1, m2 = cfg.band946.dispersion, cfg.band1550.dispersion
    t_r = cfg.round_trip_time
    rows = [
        ("t_R", t_r * 1e12, "ps", 1.883),
        ("L", cfg.length * 1e6, "um", 157.08),
        ("gamma_p1", cfg.gamma(BAND_946), "1/(W m)", 288.0),
        ("gamma_p2", cfg.gamma(BAND_1550), "1/(W m)", 153.0),
        ("Q_C_946", cfg.band946.Q_C, "", 7.64e4),
        ("Q_C_1550", cfg.band1550.Q_C, "", 7.69e4),
        ("Q_L_946", cfg.band946.Q_L, "", 3.78e4),
        ("Q_L_1550", cfg.band1550.Q_L, "", 3.80e4),
        ("alpha_946", cfg.alpha(BAND_946), "", 0.0496),
        ("alpha_1550", cfg.alpha(BAND_1550), "", float("nan")),
        ("theta_946", cfg.theta(BAND_946), "", 0.0490),
        ("theta_1550", cfg.theta(BAND_1550), "", 0.0296),
        ("linewidth_946", cfg.band946.omega / cfg.band946.Q_L / (2 * pi) * 1e-9, "GHz", 8.4),
        ("idler_detuning_iplus", idler_detuning(m1, m2, 1, "i+") / (2 * pi) * 1e-6, "MHz", 41.24),
        ("idler_detuning_iminus", idler_detuning(m1, m2, 1, "i-") / (2 * pi) * 1e-6, "MHz", -85.44),
    ]
    rng = np.random.default_rng(run.cfg.seed)
    worst = 0.0
    for _ in range(5):
        c_, p_, s_ = fwm.random_case(rng, cfg)
        a = fwm.steady_state_linear(c_, p_, s_)
        b = fwm.steady_state_timestep(c_, p_, s_)
        worst = max(worst, float(np.max(np.abs(a.fields - b.fields)) / np.max(np.abs(a.fields))))
    rows.append(("linear_vs_rk4_max_rel", worst, "", 1e-9))
    run.csv("table1_check.csv", ["quantity", "value", "unit", "target"], rows)
    for name, v, unit, target in rows:
        tgt = "" if math.isnan(target) else f"  (target {target:g})"
        run.say(f"table1  {name} = {v:.5g} {unit}{tgt}")


def _purcell_tradeoff(run: Run):
    p = run.cfg.purcell
    em = purcell.EmitterModel(2 * pi * p["gamma0_MHz"] * 1e6, p["wavelength_nm"], p["host_index"], p["beta"])
    lw = purcell.ring_linewidth(p["ring_wavelength_nm"], p["Q_L"])
    P = np.linspace(0.0, p["purcell_max"], p["purcell_points"])
    t = purcell.collection_bandwidth_tradeoff(em, P, lw)
    run.csv("purcell_tradeoff.csv", ["purcell", "collection_efficiency", "linewidth_MHz", "within_bandwidth"],
            ((a, b, l * 1e-6, w) for a, b, l, w in t.rows()))
    run.say(f"purcell  dipole moment |mu| = {purcell.extract_dipole(em):.4e} C m  (target 6.027e-29)")
    run.say(f"purcell  converter linewidth {lw * 1e-9:.3f} GHz -> threshold P* = {t.threshold:.2f}  (target ~100)")
    run.say(f"purcell  collection at P*: {t.threshold / (t.threshold + 1):.4f}")
    run.figure("purcell_tradeoff.svg", [("P/(P+1)", P, t.collection)], "Purcell factor", "collection efficiency")


PRESET_RUNNERS: Dict[str, Callable[[Run], None]] = {
    "fig4c": _fig4c,
    "fig4d": _fig4d,
    "fig4e": _fig4e,
    "fig5b": _fig5b,
    "fig5c": _fig5c,
    "fig5d": _fig5d,
    "table1-check": _table1,
    "purcell-tradeoff": _purcell_tradeoff,
}
assert tuple(PRESET_RUNNERS) == PRESETS


def run_preset(name: str, cfg: Optional[ExperimentConfig] = None, out: Optional[Path] = None,
               plot: bool = False, stream=sys.stdout) -> Run:
    if name not in PRESET_RUNNERS:
        raise UsageError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    cfg = cfg or validate_config(None)
    run = Run(cfg, Path(out or cfg.out_dir or "."), plot or cfg.plot)
    PRESET_RUNNERS[name](run)
    run.finish(stream)
    return run


# -- subcommands ---------------------------------------------------------------


def _cmd_modes(args, run: Run):
    m = run.cfg.modesolver
    wy = args.wy if args.wy is not None else m["w_y_nm"]
    wz = args.wz if args.wz is not None else m["w_z_nm"]
    xs = modesolver.CrossSection(wy, wz, m["core"], m["substrate"], grid_spacing=m["grid_nm"])
    rows = []
    for lam in args.wavelength or [946.0, 1550.0]:
        for pol in ("TE", "TM"):
            sol = modesolver.solve_mode(xs, lam, pol)
            a = modesolver.effective_area(sol) if sol.is_guided else float("nan")
            rows.append((wy, wz, lam, pol, sol.n_eff, int(sol.is_guided), sol.dominant_fraction, a))
            run.say(f"modes  {wz:g} x {wy:g} nm @ {lam:g} nm {pol}: n_eff = {sol.n_eff:.5f}"
                    f"{'' if sol.is_guided else ' (cut off)'}")
    run.csv("modes.csv", ["w_y_nm", "w_z_nm", "lambda_nm", "polarization", "n_eff", "is_guided",
                          "dominant_fraction", "A_eff_um2"], rows)


def _cmd_dispersion(args, run: Run):
    _fig4e(run)


def _cmd_fwm(args, run: Run):
    {"detuning": _fig5b, "mu": _fig5c, "q-power": _fig5d}[args.kind](run)


def _cmd_purcell(args, run: Run):
    if args.field_map:
        p = run.cfg.purcell
        em = purcell.EmitterModel(2 * pi * p["gamma0_MHz"] * 1e6, p["wavelength_nm"], p["host_index"], p["beta"])
        fm = purcell.read_field_map(args.field_map)
        pos = [float(v) for v in args.position.split(",")] if args.position else [
            o + 0.5 * (n - 1) * d for o, n, d in zip(fm.origin, fm.shape, fm.spacing)]
        if len(pos) != 3:
            raise UsageError("--position takes x,y,z in nm")
        P = purcell.purcell_factor(fm, em, pos)
        run.csv("purcell.csv", ["x_nm", "y_nm", "z_nm", "purcell"], [(*pos, P)])
        run.say(f"purcell  P = {P:.6g} at ({pos[0]:g}, {pos[1]:g}, {pos[2]:g}) nm")
    else:
        _purcell_tradeoff(run)


def _cmd_geometry(args, run: Run):
    g = run.cfg.geometry
    d = g["design"]
    base = {"GaP": geometry.GAP_DESIGN, "GaAs": geometry.GAAS_DESIGN}.get(d) if isinstance(d, str) else None
    if base is None:
        base = geometry.NanobeamDesign(d["w_y_nm"], d["w_z_nm"], d["h_x_nm"], d["h_y_nm"], d["a_cav_nm"], d["a_mirr_nm"])
    design = replace(base, n_cavity_holes=g["n_cavity_holes"], n_mirror_pairs=g["n_mirror_pairs"],
                     taper_exponent=g["taper_exponent"])
    holes = geometry.generate_taper(design)
    run.out.mkdir(parents=True, exist_ok=True)
    run.files.append(geometry.write_hole_csv(holes, run.out / "holes.csv"))
    R = run.cfg.resonator.radius
    layout = geometry.generate_ring_layout(R, (run.cfg.modesolver["w_y_nm"], run.cfg.modesolver["w_z_nm"]),
                                           geometry.DEFAULT_COUPLERS)
    path = run.out / "ring_layout.json"
    path.write_text(geometry.layout_to_json(layout))
    run.files.append(path)
    run.say(f"geometry  {len(holes)} holes, span {holes.length:.1f} nm; ring R = {R:g} um with "
            f"{len(layout.couplers)} couplers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment configuration")
    common.add_argument("--out", type=Path, help="output directory (default: config out_dir or .)")
    common.add_argument("--materials", type=Path, help="alternate Sellmeier coefficient table")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", type=int, help="seed for randomised checks")

    ap = argparse.ArgumentParser(prog="hybrid-node", description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("modes", parents=[common], help="solve waveguide modes")
    p.add_argument("--wy", type=float)
    p.add_argument("--wz", type=float)
    p.add_argument("--wavelength", type=float, action="append")
    sub.add_parser("dispersion", parents=[common], help="n_eff, n_g, D and A_eff over wavelength")
    p = sub.add_parser("fwm-sweep", parents=[common], help="conversion-efficiency sweeps")
    p.add_argument("--kind", choices=("detuning", "mu", "q-power"), default="detuning")
    p = sub.add_parser("purcell", parents=[common], help="Purcell factor or collection tradeoff")
    p.add_argument("--field-map", type=Path)
    p.add_argument("--position", help="x,y,z in nm")
    sub.add_parser("geometry", parents=[common], help="nanobeam hole list and ring layout")
    p = sub.add_parser("preset", parents=[common], help="reproduce a figure panel")
    p.add_argument("name", help="one of: " + ", ".join(PRESETS))
    return ap


COMMANDS = {
    "modes": _cmd_modes,
    "dispersion": _cmd_dispersion,
    "fwm-sweep": _cmd_fwm,
    "purcell": _cmd_purcell,
    "geometry": _cmd_geometry,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.materials:
            try:
                materials.set_material_table(args.materials)
            except (OSError, ValueError) as exc:
                raise UsageError(f"--materials: {exc}") from None
        cfg = validate_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "preset":
            run_preset(args.name, cfg, args.out, args.plot)
        else:
            run = Run(cfg, Path(args.out or cfg.out_dir or "."), args.plot or cfg.plot)
            COMMANDS[args.command](args, run)
            run.finish()
    except NUMERIC_ERRORS as exc:
        print(f"hybrid-node: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigError, ValueError, KeyError) as exc:
        # argument errors raised by the modules (bad wavelength, geometry, position)
        print(f"hybrid-node: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
