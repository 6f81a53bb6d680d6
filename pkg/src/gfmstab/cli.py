"""Command-line interface: ``gfmstab <command> [options]``.

Exit status is 0 on success, 1 for bad input and 2 when the numerics fail
(a trajectory diverges).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analytics as A
from . import doa
from .hybrid_sim import Mode
from .io import (
    ConfigError, RunConfig, canonical_json, config_document, digest_bytes, parse_config,
    write_csv, write_json, write_manifest,
)
from .params import ParameterError, reference_converter, reference_grid
from .scenario import CASES, InfeasibleOperatingPoint, OutcomeKind, builtin_case, run

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _a4(x):
    return None if x is None else round(float(x), 4)


def _set_json(s: A.AngleSet) -> list:
    return [[_a4(lo), _a4(hi)] for lo, hi in s.spans()]


def _load(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = parse_config(args.config)
    else:
        grid, conv = reference_grid(), reference_converter()
        doc = config_document(grid, conv)
        cfg = RunConfig(grid, conv, digest=digest_bytes(canonical_json(doc)))
    return cfg.with_beta(getattr(args, "beta", None))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _command_line(argv) -> str:
    return " ".join(["gfmstab", *argv])


def analysis(grid, conv) -> dict:
    eq = A.equilibria(grid, conv)
    return {
        "beta": _a4(conv.beta),
        "delta_sat": _a4(A.saturation_threshold(grid, conv)),
        "delta_d_p": _a4(A.delta_d_p(conv.beta, grid, conv)),
        "delta_q_p": _a4(A.delta_q_p(conv.beta, grid, conv)),
        "entering_set": _set_json(A.entering_set(grid, conv)),
        "returning_set": {
            m: _set_json(A.returning_set(conv.beta, grid, conv, m))
            for m in A.RETURNING_METHODS
        },
        "equilibria": eq.as_dict(4),
        "c1": A.c1_holds(grid, conv),
        "c2_static": A.c2_static_holds(grid, conv),
    }


def cmd_analyze(args, argv) -> int:
    cfg = _load(args)
    doc = analysis(cfg.grid, cfg.conv)
    if args.out:
        out = _out_dir(args)
        write_json(out / "analysis.json", doc)
        write_manifest(out, _command_line(argv), cfg.digest, ["analysis.json"])
    else:
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_sets(args, argv) -> int:
    cfg = _load(args)
    if args.steps < 2:
        raise InputError("--steps must be at least 2")
    rows = []
    for beta in np.linspace(args.beta_from, args.beta_to, args.steps):
        beta = float(beta)
        try:
            r = A.returning_set(beta, cfg.grid, cfg.conv, args.method)
        except ParameterError as err:
            raise InputError(str(err)) from None
        spans = r.spans()
        rows.append([
            f"{beta:.4f}",
            f"{A.saturation_threshold(cfg.grid, cfg.conv):.4f}",
            f"{A.delta_d_p(beta, cfg.grid, cfg.conv):.4f}",
            f"{A.delta_q_p(beta, cfg.grid, cfg.conv):.4f}",
            ";".join(f"{lo:.4f}" for lo, _ in spans),
            ";".join(f"{hi:.4f}" for _, hi in spans),
        ])
    header = ["beta_deg", "delta_sat_deg", "delta_d_p_deg", "delta_q_p_deg",
              "r_lo_deg", "r_hi_deg"]
    if args.out:
        out = _out_dir(args)
        write_csv(out / "sets.csv", header, rows)
        write_manifest(out, _command_line(argv), cfg.digest, ["sets.csv"])
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


def summary_document(scenario, outcome) -> dict:
    doc = {}
    if scenario.case_id is not None:
        doc["case_id"] = scenario.case_id
    doc["outcome"] = outcome.kind.value
    if outcome.cause is not None:
        doc["cause"] = outcome.cause.value
    if outcome.kind is OutcomeKind.POLE_SLIP:
        doc["slip_count"] = outcome.slip_count
    doc["delta_af_deg"] = _a4(outcome.metrics["delta_af"])
    doc["final_delta_deg"] = _a4(outcome.final_delta)
    doc["mode_events"] = [
        {"t_s": round(e.t, 6), "from": Mode(e.mode_from).name.capitalize(),
         "to": Mode(e.mode_to).name.capitalize(), "delta_deg": _a4(e.delta)}
        for e in outcome.mode_events
    ]
    neg = outcome.metrics["negative_power_interval"]
    if neg is not None:
        doc["negative_power_interval_s"] = [round(neg[0], 6), round(neg[1], 6)]
    if outcome.diverged:
        doc["diverged"] = True
    return doc


def _run_scenario(scenario, out: Path, argv, digest) -> int:
    traj, outcome = run(scenario)
    traj.to_csv(out / "trajectory.csv")
    write_json(out / "summary.json", summary_document(scenario, outcome))
    write_manifest(out, _command_line(argv), digest, ["trajectory.csv", "summary.json"])
    if outcome.diverged:
        print("integration diverged; outputs are truncated", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    cfg = _load(args)
    return _run_scenario(cfg.scenario(), _out_dir(args), argv, cfg.digest)


def cmd_case(args, argv) -> int:
    case_id = args.id.upper()
    if case_id not in CASES:
        raise InputError(f"unknown case {args.id!r}; expected one of {', '.join(CASES)}")
    scenario = builtin_case(case_id)
    if args.beta is not None:
        try:
            scenario = dataclasses.replace(scenario, conv=scenario.conv.with_beta(args.beta))
        except ParameterError as err:
            raise InputError(str(err)) from None
    doc = config_document(scenario.pre_fault_grid, scenario.conv, scenario.sim,
                          scenario.events, scenario.current_limit)
    return _run_scenario(scenario, _out_dir(args), argv, digest_bytes(canonical_json(doc)))


def _doa_spec(args, cfg: RunConfig) -> doa.DoaSpec:
    lo, hi, _ = doa.DoaSpec().resolved_omega(cfg.conv, cfg.sim.freq_limit)
    omega = (lo if args.omega_min is None else args.omega_min,
             hi if args.omega_max is None else args.omega_max,
             args.omega_count)
    try:
        return doa.DoaSpec((args.delta_min, args.delta_max, args.delta_count), omega,
                           args.init_mode, not args.unsaturated)
    except ValueError as err:
        raise InputError(str(err)) from None


def _doa_outputs(args, cfg, spec, out):
    grid_result = doa.sweep(cfg.grid, cfg.conv, spec, cfg.sim, criteria=cfg.criteria,
                            workers=args.workers)
    d, w = np.meshgrid(grid_result.deltas, grid_result.omegas)
    rows = [
        [f"{dd:.4f}", f"{ww:.8f}", OutcomeKind.from_code(lab).value, doa.CAUSE_NAMES[int(c)]]
        for dd, ww, lab, c in zip(d.ravel(), w.ravel(), grid_result.labels.ravel(),
                                  grid_result.causes.ravel())
    ]
    write_csv(out / "doa.csv", ["delta_deg", "omega_dev_pu", "label", "cause"], rows)
    lines = doa.boundary(grid_result)
    b_rows = [[sid, f"{x:.4f}", f"{y:.8f}"]
              for sid, line in enumerate(lines) for x, y in line]
    write_csv(out / "boundary.csv", ["segment_id", "delta_deg", "omega_dev_pu"], b_rows)
    return ["doa.csv", "boundary.csv"], grid_result


def cmd_doa(args, argv) -> int:
    cfg = _load(args)
    spec = _doa_spec(args, cfg)
    out = _out_dir(args)
    files, result = _doa_outputs(args, cfg, spec, out)
    write_manifest(out, _command_line(argv), cfg.digest, files)
    return EXIT_NUMERIC if result.diverged.any() else EXIT_OK


def cmd_portrait(args, argv) -> int:
    cfg = _load(args)
    spec = _doa_spec(args, cfg)
    out = _out_dir(args)
    files, result = _doa_outputs(args, cfg, spec, out)
    field = doa.vector_field(cfg.grid, cfg.conv, spec, cfg.sim)
    rows = [[f"{a:.4f}", f"{b:.8f}", f"{c:.6f}", f"{e:.8f}", int(m)]
            for a, b, c, e, m in zip(field["delta_deg"], field["omega_dev_pu"],
                                     field["ddelta_dt"], field["domega_dt"], field["mode"])]
    write_csv(out / "vector_field.csv",
              ["delta_deg", "omega_dev_pu", "ddelta_dt", "domega_dt", "mode"], rows)
    files.append("vector_field.csv")
    write_manifest(out, _command_line(argv), cfg.digest, files)
    return EXIT_NUMERIC if result.diverged.any() else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gfmstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_required=False):
        p.add_argument("--config", help="JSON configuration (default: reference parameters)")
        p.add_argument("--beta", type=float, help="override the saturated current angle (deg)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="accepted for compatibility; unused")

    p = sub.add_parser("analyze", help="closed-form sets and equilibria as JSON")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sets", help="threshold and returning-set endpoints over a beta range")
    common(p)
    p.add_argument("--beta-from", type=float, default=-90.0)
    p.add_argument("--beta-to", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=91)
    p.add_argument("--method", choices=A.RETURNING_METHODS, default="closed_form")
    p.set_defaults(func=cmd_sets)

    p = sub.add_parser("simulate", help="run the scenario described by a config file")
    common(p, out_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("case", help="run one of the built-in fault cases")
    p.add_argument("--id", required=True, help=f"one of {', '.join(CASES)}")
    p.add_argument("--beta", type=float, help="override the saturated current angle (deg)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="accepted for compatibility; unused")
    p.set_defaults(func=cmd_case)

    for name, func, text in (("doa", cmd_doa, "domain-of-attraction sweep"),
                             ("portrait", cmd_portrait, "sweep plus vector field")):
        p = sub.add_parser(name, help=text)
        common(p, out_required=True)
        p.add_argument("--delta-min", type=float, default=-180.0)
        p.add_argument("--delta-max", type=float, default=360.0)
        p.add_argument("--delta-count", type=int, default=200)
        p.add_argument("--omega-min", type=float)
        p.add_argument("--omega-max", type=float)
        p.add_argument("--omega-count", type=int, default=100)
        p.add_argument("--init-mode", choices=doa.INIT_MODE_RULES, default="by_region")
        p.add_argument("--unsaturated", action="store_true",
                       help="disable the current limit (normal mode throughout)")
        p.add_argument("--workers", type=int, help="thread count (capped by GFM_STAB_THREADS)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except (ConfigError, ParameterError, InfeasibleOperatingPoint, InputError) as err:
        print(f"gfmstab: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (FloatingPointError, OverflowError) as err:
        print(f"gfmstab: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
