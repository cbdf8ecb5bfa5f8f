"""Scenario-driven command line.

  dhtwin validate-demand <scenario>
  dhtwin run <scenario> --variant v1|v2|v3|v4 --month jan|apr|aug
  dhtwin compare <scenario> --variants v1,v2,v3,v4
  dhtwin report <dir> --format table|structured

Exit codes: 0 ok, 2 usage/schema error, 3 demand validation failed,
4 master non-convergence abort, 5 non-finite simulation state. The output
root is --out, else $DHTWIN_OUT, else ./runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


from .core import NonFiniteState
from .cosim import NonConvergence, RunArchive
from .kpi import EmissionFactors, emissions, render_kpi_json, render_kpi_table
from .loads import annual_heat_demand, specific_demand
from .scenario import SchemaError, VARIANTS, load_scenario
from .simulate import compare_variants, run_month, write_month_artifacts

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_VALIDATION = 3
EXIT_NONCONVERGENCE = 4
EXIT_NONFINITE = 5


def out_root(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("DHTWIN_OUT")
    return Path(env) if env else Path("runs")


def cmd_validate_demand(args) -> int:
    scenario = load_scenario(args.scenario)
    lo, hi = scenario.demand_band
    total_kwh = 0.0
    total_area = 0.0
    all_ok = True
    for rec in scenario.buildings:
        arch = scenario.archetypes[rec.archetype]
        q = annual_heat_demand(rec.q_h_w_per_m2, rec.a_c_m2,
                               float(arch["g"]), float(arch["f_h_per_a"]))
        spec = specific_demand(q, rec.a_c_m2)
        ok = lo <= spec <= hi
        all_ok = all_ok and ok
        flag = "" if ok else "  OUT OF BAND"
        print(f"{rec.id} {q:.1f} kWh/a {spec:.1f} kWh/m2a{flag}")
        total_kwh += q
        total_area += rec.a_c_m2
    print(f"total {total_kwh:.1f} kWh/a over {total_area:.1f} m2 "
          f"({total_kwh / total_area:.1f} kWh/m2a), band [{lo}, {hi}]")
    return EXIT_OK if all_ok else EXIT_VALIDATION


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    mr = run_month(scenario, args.variant, args.month)
    out = out_root(args) / scenario.name / f"{args.variant}_{args.month}"
    write_month_artifacts(out, scenario, mr)
    led = mr.ledger
    co2 = None
    if scenario.factors_path and scenario.factors_path.exists():
        co2 = emissions(led, EmissionFactors.load(scenario.factors_path))
    summary = (f"{args.variant} {args.month}: heat {led.heat_produced / 1000:.2f} MWh, "
               f"elec gen {led.elec_gen / 1000:.2f} / cons {led.elec_cons / 1000:.2f} MWh")
    if co2 is not None:
        summary += f", emissions {co2:.2f} t"
    print(summary)
    print(f"artifacts: {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise SchemaError(f"unknown variant {v!r}")
    if len(variants) < 2:
        raise SchemaError("compare needs at least two variants")
    out = out_root(args) / scenario.name
    report = compare_variants(scenario, variants, out_dir=out,
                              progress=lambda msg: print(msg, file=sys.stderr))
    out.mkdir(parents=True, exist_ok=True)
    (out / "kpi.json").write_text(render_kpi_json(report))
    table = render_kpi_table(report)
    (out / "kpi.txt").write_text(table)
    print(table, end="")
    print(f"artifacts: {out}")
    return EXIT_OK


def _write_plot_series(run_dir: Path, out_dir: Path):
    archive = RunArchive.read(run_dir / "archive.csv")
    cols = [("center", "q_chp_w"), ("center", "q_boiler_w"), ("center", "q_hp_w")]
    per_hour = max(1, int(round(3600.0 / archive.dt)))
    n_hours = archive.n_steps // per_hour
    series = []
    for blk, port in cols:
        vals = archive.column(blk, port)[: n_hours * per_hour]
        series.append(vals.reshape(n_hours, per_hour).mean(axis=1) / 1000.0)
    lines = ["hour,chp_kw,boiler_kw,hp_kw"]
    for h in range(n_hours):
        lines.append(f"{h},{series[0][h]:.3f},{series[1][h]:.3f},{series[2][h]:.3f}")
    (out_dir / f"plot_{run_dir.name}.csv").write_text("\n".join(lines) + "\n")


def cmd_report(args) -> int:
    src = Path(args.dir)
    kpi_path = src / "kpi.json"
    if not kpi_path.exists():
        print(f"no kpi.json under {src}", file=sys.stderr)
        return EXIT_SCHEMA
    report = json.loads(kpi_path.read_text())
    if args.format == "structured":
        out = render_kpi_json(report)
        sys.stdout.write(out)
        (src / "kpi_rendered.json").write_text(out)
    else:
        out = render_kpi_table(report)
        sys.stdout.write(out)
        (src / "kpi_rendered.txt").write_text(out)

    bars = ["variant,month,heat_chp_mwh,heat_boiler_mwh,heat_hp_mwh"]
    for variant in sorted(report["variants"]):
        for month in report["months"]:
            led = report["variants"][variant]["monthly"][month]["ledger_kwh"]
            bars.append(f"{variant},{month},{led['heat_chp'] / 1000:.3f},"
                        f"{led['heat_boiler'] / 1000:.3f},{led['heat_hp'] / 1000:.3f}")
            run_dir = src / f"{variant}_{month}"
            if (run_dir / "archive.csv").exists():
                _write_plot_series(run_dir, src)
    (src / "monthly_bars.csv").write_text("\n".join(bars) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dhtwin",
        description="district heating digital twin: run and compare heating-center variants")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-demand", help="check design demand figures per building")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate_demand)

    p = sub.add_parser("run", help="co-simulate one variant for one month")
    p.add_argument("scenario")
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--month", required=True, choices=["jan", "apr", "aug"])
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run variants over all months and rank them")
    p.add_argument("scenario")
    p.add_argument("--variants", default="v1,v2,v3,v4")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="re-render KPI tables and plot series")
    p.add_argument("dir")
    p.add_argument("--format", default="table", choices=["table", "structured"])
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NonConvergence as exc:
        print(f"master failed to converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except NonFiniteState as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONFINITE


if __name__ == "__main__":
    sys.exit(main())
