"""Command-line entry point ``tdlpt``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 a verify command breached its tolerance.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .hierarchy import dynamic_shift
from .hydrogen import (NumericalFailure, dipole_moment, hydrogen_shift_pipeline, polarizability,
                       propagate_phi11, window)
from .io import (TABLE1_REFERENCE, TABLE1_TAG, ConfigError, ResultRecord, RunConfig, emit_record,
                 fmt, write_csv)
from .numerics import SingularSystemError, build_grid
from .oracles import NormDriftError, dyson_first_order, full_tdse_dipole
from .oscillator import (ho_ac_shift, ho_corrections, ho_exact_solution, ho_sum_over_states,
                         ho_tdlpt_state, ho_truncation_check)
from .pulses import PulseProfile

log = logging.getLogger("tdlpt")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BREACH = 0, 1, 2, 3

TABLE1_COLUMNS = ["N", "E2_cycle", "alpha", "E2_pulse", "Im_E2_cycle", "Im_E2_pulse",
                  "ref_E2_cycle", "ref_alpha", "ref_E2_pulse", "max_rel_dev", "status"]
FIG1_COLUMNS = ["t", "g", "Re_E2", "Im_E2"]
FIG2_COLUMNS = ["t", "lam_g", "d_tdlpt", "d_tdse"]


# -- commands ----------------------------------------------------------------

def cmd_ho_verify(cfg: RunConfig, omega=0.5, n_cycles=4, tol=1e-6, x_max=6.0, n_times=9):
    """Closed-form oscillator state vs the coherent-state solution.

    Returns (report dict, passed).
    """
    pulse = PulseProfile.sin2(omega, n_cycles, cfg.amplitude)
    xg = build_grid(-x_max, x_max, 0.01, cartesian=True)
    times = np.linspace(0.0, pulse.duration, n_times)
    corr = ho_corrections(pulse, pulse.duration, cfg.dt)
    worst = 0.0
    for t in times:
        k = int(np.argmin(np.abs(corr.times - t)))
        tk = corr.times[k]
        approx = ho_tdlpt_state(xg.points, tk, corr.c1[k], corr.c2[k], pulse.lam)
        exact = ho_exact_solution(pulse, pulse.lam, xg, tk, cfg.dt).values
        worst = max(worst, float(np.max(np.abs(approx - exact))))
    q3 = ho_truncation_check(pulse, times, xg, cfg.dt)
    report = {"omega": omega, "n_cycles": n_cycles, "lam": pulse.lam, "dt": cfg.dt,
              "max_state_deviation": worst, "max_abs_Q3": q3, "tolerance": tol}
    return report, worst <= tol and q3 <= 1e-12


def cmd_ho_shift(omega: float):
    return {"omega": omega, "E2_bar": ho_ac_shift(omega),
            "closed_form": 1.0 / (4.0 * (omega**2 - 1.0)),
            "sum_over_states": ho_sum_over_states(omega)}


def _first_order_run(cfg: RunConfig, n_cycles: int):
    pulse = cfg.pulse(n_cycles)
    phi11 = propagate_phi11(cfg.grid(), pulse, cfg.dt, store_stride=cfg.store_stride)
    return pulse, phi11


def run_hydrogen(cfg: RunConfig, n_cycles: int | None = None) -> ResultRecord:
    n = n_cycles or cfg.n_cycles
    pulse, phi11 = _first_order_run(cfg, n)
    series = hydrogen_shift_pipeline(phi11)
    cyc = window(pulse, "cycle")
    e_cyc = dynamic_shift(series, *cyc)
    e_pul = dynamic_shift(series, *window(pulse, "pulse"))
    summary = {"E2_cycle": complex(e_cyc), "E2_pulse": complex(e_pul),
               "alpha": polarizability(e_cyc, pulse, cyc)}
    if cfg.window == "custom":
        win = window(pulse, "custom", cfg.window_t0, cfg.window_T)
        e_c = dynamic_shift(series, *win)
        summary["E2_custom"] = complex(e_c)
        summary["alpha_custom"] = polarizability(e_c, pulse, win, mean="window")
    if cfg.oracle_dyson:
        dy = dyson_first_order(phi11.grid, pulse, cfg.dt, store_stride=cfg.store_stride)
        diff = phi11.values - dy.as_phase_channel()
        summary["dyson_rel_l2"] = float(np.sqrt(np.sum(np.abs(diff) ** 2)
                                                / np.sum(np.abs(phi11.values) ** 2)))
    td, d = dipole_moment(phi11, pulse)
    return ResultRecord(cfg.with_(n_cycles=n), series, td, d, summary)


def _table1_job(args):
    cfg, n = args
    try:
        rec = run_hydrogen(cfg, n)
        return n, rec.summary, None
    except (NumericalFailure, SingularSystemError, FloatingPointError, ValueError) as exc:
        return n, None, f"{type(exc).__name__}: {exc}"


def cmd_table1(cfg: RunConfig, cycles=None):
    """Sweep over N; rows come back in N order whatever the completion order."""
    cycles = sorted(set(cycles or cfg.cycles))
    jobs = [(cfg, n) for n in cycles]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_table1_job, jobs))
    else:
        results = [_table1_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    rows = []
    failures = 0
    for n, summ, err in results:
        ref = TABLE1_REFERENCE.get(n)
        refs = [fmt(v) for v in ref] if ref else ["", "", ""]
        if summ is None:
            failures += 1
            rows.append([str(n)] + ["nan"] * 5 + refs + ["nan", err.replace(",", ";")])
            continue
        ec, ep, a = summ["E2_cycle"], summ["E2_pulse"], summ["alpha"]
        dev = (max(abs(ec.real / ref[0] - 1), abs(a / ref[1] - 1), abs(ep.real / ref[2] - 1))
               if ref else float("nan"))
        rows.append([str(n), ec.real, a, ep.real, ec.imag, ep.imag] + refs + [dev, "ok"])
    header = {"kind": "table1", "reference": TABLE1_TAG, "omega": fmt(cfg.omega),
              "lam": fmt(cfg.amplitude), "dr": fmt(cfg.dr), "dt": fmt(cfg.dt),
              "r_min": fmt(cfg.r_min), "r_max": fmt(cfg.r_max)}
    return header, rows, failures


def cmd_figure_data(cfg: RunConfig, which: str):
    """List of (file name, header, columns, rows)."""
    if which == "fig1":
        out = []
        for n in cfg.cycles:
            pulse, phi11 = _first_order_run(cfg, n)
            s = hydrogen_shift_pipeline(phi11)
            rows = zip(s.times, pulse.g(s.times), s.values.real, s.values.imag)
            header = {"kind": "fig1", "N": n, "omega": fmt(cfg.omega), "lam": fmt(pulse.lam)}
            out.append((f"fig1_N{n}.csv", header, FIG1_COLUMNS, list(rows)))
        return out
    if which == "fig2":
        if not cfg.oracle_tdse:
            raise ConfigError("fig2 needs the TDSE column: set oracle_tdse = true")
        n = cfg.n_cycles
        pulse, phi11 = _first_order_run(cfg, n)
        td, d = dipole_moment(phi11, pulse)
        stride = max(1, int(round((td[1] - td[0]) / cfg.tdse_dt))) if td.size > 1 else 1
        tt, dd, _ = full_tdse_dipole(cfg.grid(), pulse, L_max=cfg.L_max, dt=cfg.tdse_dt,
                                     store_stride=stride)
        d_tdse = np.interp(td, tt, dd)
        rows = list(zip(td, pulse.field(td), d, d_tdse))
        header = {"kind": "fig2", "N": n, "omega": fmt(cfg.omega), "lam": fmt(pulse.lam),
                  "L_max": cfg.L_max, "tdse_dt": fmt(cfg.tdse_dt)}
        return [(f"fig2_N{n}.csv", header, FIG2_COLUMNS, rows)]
    raise ConfigError(f"unknown figure {which!r}")


def cmd_oracle_dipole(cfg: RunConfig):
    """Peak dipole from first-order TDLPT and from the partial-wave TDSE."""
    pulse, phi11 = _first_order_run(cfg, cfg.n_cycles)
    td, d = dipole_moment(phi11, pulse)
    tt, dd, norm = full_tdse_dipole(cfg.grid(), pulse, L_max=cfg.L_max, dt=cfg.tdse_dt)
    tp = pulse.peak_time
    a = float(np.interp(tp, td, d))
    b = float(np.interp(tp, tt, dd))
    return {"N": cfg.n_cycles, "t_peak": tp, "d_tdlpt": a, "d_tdse": b,
            "rel_dev_peak": abs(a - b) / abs(b) if b else float("nan"),
            "norm_drift": float(np.max(np.abs(norm - norm[0])))}


# -- plumbing ----------------------------------------------------------------

def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    text = cfg.to_text()
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        text += item + "\n"
    if args.set:
        # later lines win: rebuild from a de-duplicated key list
        merged = {}
        for line in text.splitlines():
            k, _, v = line.partition("=")
            merged[k.strip()] = v.strip()
        text = "\n".join(f"{k} = {v}" for k, v in merged.items())
        cfg = RunConfig.from_text(text)
    if getattr(args, "output_dir", None):
        cfg = cfg.with_(output_dir=args.output_dir)
    return cfg


def _print_report(report: dict):
    for k, v in report.items():
        print(f"{k} = {fmt(v) if isinstance(v, float) else v}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdlpt", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--output-dir")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("ho-verify", help="oscillator exactness and truncation check")
    q.add_argument("--omega", type=float, default=0.5)
    q.add_argument("--cycles", type=int, default=4)
    q.add_argument("--tol", type=float, default=1e-6)

    q = sub.add_parser("ho-shift", help="oscillator AC shift for cos(wt) driving")
    q.add_argument("--omega", type=float, required=True)

    sub.add_parser("hydrogen-first-order", help="phi11 run: E2 series, dipole and summary")

    q = sub.add_parser("table1", help="sweep of shifts and polarizability over N")
    q.add_argument("--cycles", help="comma-separated N list")

    q = sub.add_parser("figure-data", help="CSV data behind the shift and dipole figures")
    q.add_argument("--which", choices=("fig1", "fig2"), required=True)

    q = sub.add_parser("oracle-dipole", help="TDLPT vs partial-wave TDSE at the pulse peak")
    q.add_argument("--tol", type=float, default=0.015)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        out = Path(cfg.output_dir)
        t0 = time.perf_counter()
        if args.command == "ho-verify":
            report, ok = cmd_ho_verify(cfg, args.omega, args.cycles, args.tol)
            _print_report(report)
            print("PASS" if ok else "FAIL")
            return EXIT_OK if ok else EXIT_BREACH
        if args.command == "ho-shift":
            _print_report(cmd_ho_shift(args.omega))
            return EXIT_OK
        if args.command == "hydrogen-first-order":
            rec = run_hydrogen(cfg)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"hydrogen_N{cfg.n_cycles}.csv"
            path.write_text(emit_record(rec), encoding="utf-8")
            _print_report({k: v for k, v in rec.summary.items()})
            print(f"wrote {path}")
        elif args.command == "table1":
            cycles = None
            if args.cycles:
                try:
                    cycles = [int(v) for v in args.cycles.split(",") if v.strip()]
                except ValueError as exc:
                    raise ConfigError(f"bad --cycles {args.cycles!r}") from exc
            header, rows, failures = cmd_table1(cfg, cycles)
            out.mkdir(parents=True, exist_ok=True)
            text = write_csv(out / "table1.csv", header, TABLE1_COLUMNS, rows)
            sys.stdout.write(text)
            if failures:
                return EXIT_NUMERIC
        elif args.command == "figure-data":
            files = cmd_figure_data(cfg, args.which)
            out.mkdir(parents=True, exist_ok=True)
            for name, header, cols, rows in files:
                write_csv(out / name, header, cols, rows)
                print(f"wrote {out / name}")
        elif args.command == "oracle-dipole":
            report = cmd_oracle_dipole(cfg)
            _print_report(report)
            ok = report["rel_dev_peak"] <= args.tol
            print("PASS" if ok else "FAIL")
            return EXIT_OK if ok else EXIT_BREACH
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, NormDriftError, SingularSystemError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
