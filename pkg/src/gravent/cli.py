"""Command-line interface: ``gravent {simulate,feasibility,sweep,geometry,analytic}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 target infeasible (``feasibility --enforce`` only).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from gravent import __version__, analytics, config, dynamics, environment, geometry
from gravent.dynamics import Setup
from gravent.errors import ConfigError, GraventError, RegimeWarning

SCHEMA_VERSION = 1
CSV_COLUMNS = ("t", "E", "nu_tilde_min", "dx_A", "dx_B", "mean_xA", "mean_xB")
SWEEP_COLUMNS = (
    "eta", "peak_E", "t_peak", "t_target", "tau_photon", "tau_gas", "r_cg", "feasible",
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4


# --- formatting ---------------------------------------------------------------


def fmt(x) -> str:
    """17 significant digits, fixed layout; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return format(float(x), ".16e")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dump_json(obj, path: Path | None = None) -> str:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is not None:
        path.write_text(text)
    return text


def write_series_csv(path: Path, series: dynamics.EntanglementSeries) -> None:
    cols = series.columns()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(series)):
            writer.writerow(fmt(cols[c][i]) for c in CSV_COLUMNS)


def _threshold_key(x: float) -> str:
    return repr(float(x))


# --- summaries ----------------------------------------------------------------


def scenario_record(sc: dynamics.Scenario) -> dict:
    return {
        "setup": sc.setup.value,
        "m": sc.m,
        "omega": sc.omega,
        "L": sc.L,
        "gamma": sc.gamma,
        "Q": sc.quality_factor,
        "density": sc.density,
        "radius": sc.radius if sc.density is not None else None,
        "nbar": sc.initial.nbar,
        "s_A": sc.initial.s_A,
        "s_B": sc.initial.s_B,
        "eta": sc.eta,
        "nu": sc.nu,
    }


def validity_flags(sc: dynamics.Scenario, t_stop: float) -> dict:
    if sc.setup is Setup.RELEASED:
        reg = analytics.released_regime(t_stop, sc.m, sc.omega, sc.L)
        return {
            "eta_small": reg.eta_small,
            "growth_small": reg.growth_small,
            "closed_form_valid": reg.valid,
        }
    flags = {"eta_small": sc.eta < analytics.ETA_REGIME_MAX}
    s = (sc.initial.s_A, sc.initial.s_B)
    if any(s):
        flags["squeezing_much_larger_than_eta"] = (
            min(abs(x) for x in s) >= analytics.SQUEEZING_TO_ETA_MIN * sc.eta
        )
    if sc.gamma > 0:
        flags["high_Q"] = sc.quality_factor > 1.0
    return flags


def crossing_times(sc, series, thresholds, method) -> dict[str, float | None]:
    return {
        _threshold_key(th): environment.refine_crossing(sc, series, th, method)
        for th in thresholds
    }


def summarize(name, sc, series, thresholds, method) -> dict:
    peak_E, t_peak = series.peak()
    return {
        "name": name,
        "scenario": scenario_record(sc),
        "samples": len(series),
        "failed_samples": len(series.errors),
        "first_error": series.errors[min(series.errors)] if series.errors else None,
        "peak": {"E": peak_E, "t": t_peak},
        "crossings": crossing_times(sc, series, thresholds, method),
        "validity": validity_flags(sc, float(series.t[-1])),
    }


# --- subcommands --------------------------------------------------------------


def _require_times(cfg: config.RunConfig) -> np.ndarray:
    if cfg.times is None:
        raise ConfigError("a [time] section with stop/samples or times is required")
    return cfg.times


def _out_dir(cfg: config.RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_simulate(cfg: config.RunConfig) -> tuple[int, list[Path]]:
    """Write one CSV per variant plus a JSON summary."""
    times = _require_times(cfg)
    out = _out_dir(cfg)
    runs = cfg.variants or {None: cfg.scenario}
    written, summaries, failed = [], [], False
    for name, sc in runs.items():
        series = dynamics.entanglement_trace(sc, times, method=cfg.method, rtol=cfg.rtol)
        stem = cfg.prefix if name is None else f"{cfg.prefix}_{name}"
        path = out / f"{stem}.csv"
        write_series_csv(path, series)
        written.append(path)
        summaries.append(summarize(name or cfg.prefix, sc, series, cfg.thresholds, cfg.method))
        failed |= bool(series.errors)
    summary_path = out / f"{cfg.prefix}_summary.json"
    dump_json(
        {"schema_version": SCHEMA_VERSION, "method": cfg.method, "rtol": cfg.rtol, "runs": summaries},
        summary_path,
    )
    written.append(summary_path)
    return (EXIT_NUMERIC if failed else EXIT_OK), written


def _feasibility_report(cfg: config.RunConfig, sc, target_E, times=None):
    opts = cfg.feasibility
    return environment.feasibility(
        sc,
        cfg.environment,
        target_E,
        dx=opts.dx,
        horizon=opts.horizon,
        times=times,
        method=cfg.method,
        rtol=cfg.rtol,
    )


def run_feasibility(cfg: config.RunConfig, target_E: float | None = None, enforce: bool = False):
    target_E = cfg.feasibility.target_E if target_E is None else target_E
    if target_E is None:
        raise ConfigError("no target entanglement: set feasibility.target_E or pass --target-E")
    report = _feasibility_report(cfg, cfg.scenario, target_E)
    out = _out_dir(cfg)
    path = out / f"{cfg.prefix}_feasibility.json"
    dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "scenario": scenario_record(cfg.scenario),
            "environment": {
                "T": cfg.environment.T,
                "gas_density": cfg.environment.gas_density,
                "m_air": cfg.environment.m_air,
                "f0": cfg.environment.f0,
            },
            "report": report.to_dict(),
        },
        path,
    )
    code = EXIT_INFEASIBLE if enforce and not report.feasible else EXIT_OK
    return code, [path], report


def sweep_point(cfg: config.RunConfig) -> dict:
    """Peak entanglement and feasibility for one grid point."""
    times = _require_times(cfg)
    sc = cfg.scenario
    series = dynamics.entanglement_trace(sc, times, method=cfg.method, rtol=cfg.rtol)
    peak_E, t_peak = series.peak()
    row = {"eta": sc.eta, "peak_E": peak_E, "t_peak": t_peak, "error": None}
    if series.errors:
        row["error"] = series.errors[min(series.errors)]
    target = cfg.feasibility.target_E
    if target is not None and not series.errors:
        rep = _feasibility_report(cfg, sc, target, times=times)
        row.update(
            t_target=rep.t_target,
            tau_photon=rep.tau_photon,
            tau_gas=rep.tau_gas,
            r_cg=rep.r_cg,
            feasible=rep.feasible,
        )
    else:
        row["r_cg"] = environment.casimir_gravity_ratio(sc.m, sc.density, sc.L, cfg.environment.f0)
    return row


def sweep_configs(cfg: config.RunConfig) -> list[tuple[tuple[str, ...], config.RunConfig]]:
    spec = cfg.sweep
    if spec is None or not spec.axes:
        raise ConfigError("no [sweep] axes defined")
    if spec.size > spec.max_points:
        raise ConfigError(
            f"sweep grid has {spec.size} points, above the cap of {spec.max_points} "
            "(raise sweep.max_points to allow it)"
        )
    points = []
    for values in spec.points():
        doc = cfg.raw.copy()
        doc.sections.pop("sweep", None)
        for axis, value in zip(spec.axes, values):
            if axis.section == "scenario" and axis.key in ("Q", "gamma"):
                doc.sections["scenario"].pop("Q", None)
                doc.sections["scenario"].pop("gamma", None)
            doc.set(axis.section, axis.key, value)
        sub = config.build(doc)
        sub.method, sub.rtol = cfg.method, cfg.rtol
        points.append((values, sub))
    return points


def run_sweep(cfg: config.RunConfig) -> tuple[int, list[Path]]:
    points = sweep_configs(cfg)
    configs = [sub for _, sub in points]
    if cfg.sweep.workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            rows = list(pool.map(sweep_point, configs))
    else:
        rows = [sweep_point(c) for c in configs]
    axis_names = [a.name for a in cfg.sweep.axes]
    out = _out_dir(cfg)
    path = out / f"{cfg.prefix}_sweep.csv"
    failed = False
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*axis_names, *SWEEP_COLUMNS, "error"])
        for (values, sub), row in zip(points, rows):
            axis_values = [fmt(sub.resolved[name]) for name in axis_names]
            writer.writerow([*axis_values, *(fmt(row.get(c)) for c in SWEEP_COLUMNS), row["error"] or ""])
            failed |= row["error"] is not None
    meta = out / f"{cfg.prefix}_sweep.json"
    dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "axes": {a.name: list(a.values) for a in cfg.sweep.axes},
            "points": len(rows),
            "target_E": cfg.feasibility.target_E,
            "columns": [*axis_names, *SWEEP_COLUMNS, "error"],
        },
        meta,
    )
    return (EXIT_NUMERIC if failed else EXIT_OK), [path, meta]


def geometry_report(omega: float, density: float | None, alphas, varsigmas) -> dict:
    s_opt, f_max = geometry.rod_sphere_optimum()
    rod_coeff = geometry.rod_sphere_coefficient(density)
    sphere_coeff = geometry.sphere_rate_coefficient(density)
    return {
        "schema_version": SCHEMA_VERSION,
        "omega_A": omega,
        "equal_spheres": {"coefficient": sphere_coeff, "rate": sphere_coeff / omega},
        "unequal_spheres": [
            {
                "alpha": a,
                "factor": float(geometry.unequal_sphere_factor(a)),
                "rate": float(geometry.rate_unequal_spheres(a, omega, density)),
            }
            for a in alphas
        ],
        "rod_sphere": {
            "coefficient": rod_coeff,
            "optimum": {"varsigma": s_opt, "f_max": f_max, "d_over_L": 2.0 / s_opt},
            "max_rate": rod_coeff * f_max / omega,
            "points": [
                {
                    "varsigma": s,
                    "factor": float(geometry.rod_sphere_factor(s)),
                    "rate": float(geometry.rate_rod_sphere(s, omega, density)),
                }
                for s in varsigmas
            ],
        },
        "plane_point": geometry.plane_point_coupling(),
    }


def write_trajectory(cfg: config.RunConfig) -> tuple[Path, float]:
    sc = cfg.scenario
    times = _require_times(cfg)
    radius = sc.radius if sc.density is not None else 0.0
    t_contact = geometry.contact_time(sc.m, sc.L, radius)
    path = _out_dir(cfg) / f"{cfg.prefix}_trajectory.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t", "x_t", "relative"))
        for t in times:
            x = geometry.classical_trajectory(sc.m, sc.L, float(t), radius=radius)
            writer.writerow((fmt(t), fmt(x), fmt(2 * x)))
    return path, t_contact


def analytic_report(cfg: config.RunConfig) -> dict:
    sc = cfg.scenario
    report = {"schema_version": SCHEMA_VERSION, "scenario": scenario_record(sc)}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeWarning)
        if sc.setup is Setup.OSCILLATORS:
            n = sc.initial.nbar
            thermal = analytics.oscillator_peak_thermal(sc.eta, sc.omega, n)
            report["thermal_peak"] = thermal._asdict()
            report["period"] = np.pi / ((1 - sc.eta) * sc.omega)
            if sc.initial.s_A or sc.initial.s_B:
                sq = analytics.oscillator_peak_squeezed(
                    sc.initial.s_A, sc.initial.s_B, sc.eta, sc.omega, n
                )
                report["squeezed_peak"] = sq._asdict()
        else:
            n = sc.initial.nbar
            report["crossings"] = {
                _threshold_key(th): analytics.released_crossing_time(th, sc.m, sc.omega, sc.L, n)
                for th in cfg.thresholds
            }
            if cfg.times is not None:
                t_stop = float(cfg.times[-1])
                report["at_stop"] = {
                    "t": t_stop,
                    "sigma": float(analytics.sigma_merit(t_stop, sc.m, sc.omega, sc.L)),
                    "E": analytics.released_entanglement(t_stop, sc.m, sc.omega, sc.L, n),
                    "width": analytics.released_width(t_stop, sc.m, sc.omega),
                }
            if sc.initial.s_A == sc.initial.s_B and sc.initial.s_A != 0:
                report["remapped_omega"] = analytics.squeezed_release_remap(sc.omega, sc.initial.s_A)
    report["warnings"] = sorted({str(w.message) for w in caught})
    return report


# --- entry point --------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gravent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("config", nargs=None if required else "?", help="scenario document")
        p.add_argument(
            "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="override a document entry (repeatable)",
        )
        p.add_argument("--method", choices=dynamics.METHODS, help="propagation route")
        p.add_argument("--rtol", type=float, help="relative tolerance of the rk route")
        p.add_argument("--out-dir", help="output directory")
        return p

    with_config(sub.add_parser("simulate", help="entanglement time series"))
    feas = with_config(sub.add_parser("feasibility", help="decoherence and Casimir budget"))
    feas.add_argument("--target-E", type=float, help="target log-negativity")
    feas.add_argument("--dx", type=float, help="superposition size [m]; default: averaged width")
    feas.add_argument("--enforce", action="store_true", help="exit 4 when infeasible")
    with_config(sub.add_parser("sweep", help="parameter grid"))
    geo = with_config(sub.add_parser("geometry", help="shape factors and classical trajectory"), False)
    geo.add_argument("--omega", type=float, default=1.0, help="omega_A [1/s]")
    geo.add_argument("--density", type=float, help="material density [kg/m^3]")
    geo.add_argument("--alpha", type=float, nargs="*", default=[0.5, 1.0, 2.0])
    geo.add_argument("--varsigma", type=float, nargs="*", default=[0.5, 1.0, 2.0])
    with_config(sub.add_parser("analytic", help="closed-form predictions"))
    return parser


def _load(args) -> config.RunConfig:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    overrides = list(args.set)
    if args.method:
        overrides.append(f"solver.method={args.method}")
    if args.rtol is not None:
        overrides.append(f"solver.rtol={args.rtol!r}")
    if args.out_dir:
        overrides.append(f"output.directory={args.out_dir}")
    return config.load(text, overrides)


def _dispatch(args) -> int:
    if args.command == "geometry":
        report = geometry_report(args.omega, args.density, args.alpha, args.varsigma)
        if args.config:
            cfg = _load(args)
            path, t_contact = write_trajectory(cfg)
            report["trajectory"] = {"file": path.name, "contact_time": t_contact}
        sys.stdout.write(dump_json(report))
        return EXIT_OK

    cfg = _load(args)
    if args.command == "simulate":
        code, paths = run_simulate(cfg)
    elif args.command == "feasibility":
        if args.dx is not None:
            cfg.feasibility = config.FeasibilityOptions(
                cfg.feasibility.target_E, args.dx, cfg.feasibility.horizon
            )
        code, paths, report = run_feasibility(cfg, args.target_E, args.enforce)
        verdict = "feasible" if report.feasible else f"infeasible ({report.limiting})"
        print(verdict, file=sys.stderr)
    elif args.command == "sweep":
        code, paths = run_sweep(cfg)
    else:
        sys.stdout.write(dump_json(analytic_report(cfg)))
        return EXIT_OK
    for path in paths:
        print(path)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraventError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
