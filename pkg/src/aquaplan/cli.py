"""Command-line front end.

Subcommands: ``run`` (one controller), ``compare`` (MPC vs reactive on the
same scenario and seed), ``fit`` (emissions regression on a mix CSV) and
``plotdata`` (narrow CSV export from a trace).  All failures exit nonzero
with a single greppable ``AQUAPLAN_*`` code on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from .config import dump_effective, load_scenario
from .errors import AquaplanError, ConfigError, TraceError
from .exogenous import (SOURCES, fit_emissions_coefficients,
                        intensity_series, load_mix_csv)
from .sim import MPC, REACTIVE, compare, metrics, read_trace_csv, run

PLOT_SERIES = ("yD", "tanks", "flows", "emissions", "chlorine")


def _write_metrics(m, path):
    with open(path, "w") as fh:
        json.dump(m.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_one(scenario, out_dir, label):
    trace = run(scenario)
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, f"trace_{label}.csv")
    metrics_path = os.path.join(out_dir, f"metrics_{label}.json")
    trace.write_csv(trace_path)
    m = metrics(trace)
    _write_metrics(m, metrics_path)
    return trace, m, trace_path


def cmd_run(args) -> int:
    overrides = {}
    if args.controller:
        overrides["simulation.controller"] = args.controller
    if args.seed is not None:
        overrides["simulation.seed"] = args.seed
    scenario, effective = load_scenario(args.config, overrides)
    if args.dump_effective_config:
        print(dump_effective(effective))
        return 0
    _, m, trace_path = _run_one(scenario, args.out, scenario.controller)
    print(f"wrote {trace_path}")
    print(json.dumps(m.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["simulation.seed"] = args.seed
    results = {}
    for label in (REACTIVE, MPC):
        overrides["simulation.controller"] = label
        scenario, _ = load_scenario(args.config, dict(overrides))
        results[label] = _run_one(scenario, args.out, label)
    report = compare(results[REACTIVE][1], results[MPC][1])
    report_path = os.path.join(args.out, "comparison.json")
    payload = report.to_dict()
    payload["chlorine_min_mg_per_gal"] = {
        "reactive": report.yc_min_baseline,
        "mpc": report.yc_min_candidate,
    }
    with open(report_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(report.pretty())
    print(f"wrote {report_path}")
    return 0


def cmd_fit(args) -> int:
    records = load_mix_csv(args.mix_csv)
    fit = fit_emissions_coefficients(records)
    for source in SOURCES:
        print(f"{source:<10}{fit.coefficients[source]:>12.4f} kg CO2/MWh")
    print(f"{'residual':<10}{fit.residual_rms:>12.4f} kg CO2 (RMS)")
    if args.emit_phi:
        series = intensity_series(fit, records, len(records))
        series.write_csv(args.emit_phi)
        print(f"wrote {args.emit_phi}")
    return 0


def cmd_plotdata(args) -> int:
    if args.series not in PLOT_SERIES:
        raise TraceError(
            f"unknown series {args.series!r}; valid: "
            + ", ".join(PLOT_SERIES))
    cols = read_trace_csv(args.trace)
    t = cols["t_min"]

    def narrow(pairs, wide=False):
        out = sys.stdout if args.out is None else open(args.out, "w",
                                                       newline="")
        try:
            writer = csv.writer(out)
            writer.writerow(["t_min", "value", "series"] if wide
                            else ["t_min", "value"])
            for name, values in pairs:
                for tk, v in zip(t, values):
                    row = [repr(float(tk)), repr(float(v))]
                    if wide:
                        row.append(name)
                    writer.writerow(row)
        finally:
            if args.out is not None:
                out.close()

    if args.series == "yD":
        narrow([("y_d", cols["y_d"])])
    elif args.series == "chlorine":
        narrow([("y_c", cols["y_c"])])
    elif args.series == "emissions":
        narrow([("y_e_kg_per_h", cols["y_e_kg_per_h"])])
    elif args.series == "tanks":
        tanks = sorted(k for k in cols if k.startswith("x")
                       and k[1:].isdigit())
        narrow([(k, cols[k]) for k in tanks], wide=True)
    else:  # flows
        names = ["f_d", "f_treat"] + sorted(
            k for k in cols if k.startswith("f_tank"))
        narrow([(k, cols[k]) for k in names], wide=True)
    if args.out is not None:
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquaplan",
        description="Water treatment plant simulator with emissions-aware "
                    "MPC and a reactive baseline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one controller")
    p.add_argument("config")
    p.add_argument("--controller", choices=(MPC, REACTIVE))
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-effective-config", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare",
                       help="run both controllers on the same scenario")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="least-squares emissions coefficients")
    p.add_argument("mix_csv")
    p.add_argument("--emit-phi", metavar="OUT_CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plotdata", help="narrow CSV export from a trace")
    p.add_argument("trace")
    p.add_argument("--series", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("AQUAPLAN_LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except AquaplanError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
