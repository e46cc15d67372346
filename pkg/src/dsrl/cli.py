"""Command-line entry point: ``dsrl {simulate,sweep,validate,presets}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import centralized_l1_subgradient, centralized_l2_descent
from .checks import run_all
from .core import Schedule, TRACE_COLUMNS, dsrl_run, write_trace_rows
from .errors import ConfigInvalid, DSRLError
from .harness import (
    SOLVERS,
    SweepConfig,
    draw_instance,
    fixed_network,
    load_config,
    presets,
    provenance,
    run_sweep,
    validate_config,
    write_sweep,
)

log = logging.getLogger("dsrl")


def _add_common(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="experiment config (JSON)")
    src.add_argument("--preset", choices=sorted(presets()), help="start from a built-in preset")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed")
    p.add_argument("--iters", type=int, metavar="K", help="iterations per run")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--solvers", metavar="LIST", help=f"comma-separated subset of {','.join(SOLVERS)}")
    p.add_argument("--fixed-network", action="store_true", help="reuse one network for every trial")
    p.add_argument("--strict-schedule", action="store_true",
                   help="reject schedules outside the convergence conditions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsrl", description="Distributed robust source localization simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one instance and write its full trace")
    _add_common(sim)
    sim.add_argument("--value", type=float, help="scenario parameter (default: first sweep value)")
    sim.add_argument("--trial", type=int, default=0, help="trial index selecting the random instance")
    sim.add_argument("--wide", action="store_true", help="add per-node estimate columns at snapshot iterations")
    sim.add_argument("--cadence", type=int, help="snapshot cadence for --wide (must divide K)")

    sw = sub.add_parser("sweep", help="run a Monte Carlo parameter sweep")
    _add_common(sw)
    sw.add_argument("--trials", type=int, metavar="N", help="trials per sweep value")

    val = sub.add_parser("validate", help="run the numerical invariant checks")
    val.add_argument("--seed", type=int, default=0)

    pre = sub.add_parser("presets", help="list or write the built-in scenario configs")
    pre.add_argument("--out", metavar="DIR", help="write one JSON file per preset into DIR")
    return parser


def _resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = presets()[args.preset or "fig4_convergence"]
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.iters is not None:
        changes["iterations"] = args.iters
    if args.out:
        changes["out"] = args.out
    if args.solvers:
        changes["solvers"] = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    if args.fixed_network:
        changes["fixed_network"] = True
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if args.strict_schedule:
        try:
            changes["schedule"] = dataclasses.replace(cfg.schedule, strict=True)
        except ValueError as exc:
            raise ConfigInvalid("schedule", str(exc)) from None
    cfg = dataclasses.replace(cfg, **changes)
    validate_config(cfg)
    return cfg


def _provenance_line(doc) -> str:
    return "# " + json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    if args.value is not None:
        cfg = dataclasses.replace(cfg, scenario=dataclasses.replace(cfg.scenario, sweep=SweepConfig(values=(args.value,))))
        validate_config(cfg)
    K = cfg.K
    network = fixed_network(cfg) if cfg.fixed_network else None
    net, x_true, m, X0 = draw_instance(cfg, 0, args.trial, network)
    value = cfg.grid()[0]
    cadence = args.cadence or (K if K else 1)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance(cfg, trial=args.trial, sweep_value=value)
    summary = {}
    with open(out / "trace.csv", "w", newline="") as fh:
        fh.write(_provenance_line(prov))
        header = True
        for solver in cfg.solvers:
            if solver == "dsrl":
                trace = dsrl_run(net, m, cfg.schedule, K, X0, x_true, trace_cadence=cadence)
                write_trace_rows(fh, trace, solver, wide=args.wide, header=header)
                summary[solver] = float(trace.rmse[-1])
                for w in trace.warnings:
                    log.warning("schedule: %s", w)
            else:
                if solver == "l1":
                    res = centralized_l1_subgradient(net, m, cfg.schedule, K, X0.mean(axis=0), x_true)
                else:
                    res = centralized_l2_descent(net, m, cfg.l2_step0, K, X0.mean(axis=0), x_true)
                w = csv.writer(fh, lineterminator="\n")
                if header:
                    w.writerow(TRACE_COLUMNS)
                for t in range(K + 1):
                    w.writerow([t + 1, solver, repr(float(res.objective_trace[t])),
                                repr(float(res.error_trace[t])), repr(0.0)])
                summary[solver] = float(np.linalg.norm(res.estimate - x_true))
            header = False

    instance = dict(prov, network=net.to_dict(), measurements=m.to_dict(),
                    x_true=x_true.tolist(), init=X0.tolist(), final_rmse=summary)
    (out / "instance.json").write_text(json.dumps(instance, indent=2, sort_keys=True) + "\n")
    for solver, err in summary.items():
        print(f"{solver}: final RMSE {err:.6g}")
    print(f"wrote {out / 'trace.csv'} and {out / 'instance.json'}")
    return 0


def cmd_sweep(args) -> int:
    if not args.config and not args.preset:
        print("dsrl sweep: one of --config or --preset is required", file=sys.stderr)
        return 2
    cfg = _resolve_config(args)
    result = run_sweep(cfg)
    paths = write_sweep(result, cfg.out)
    param = cfg.scenario.sweep_param
    for r in result.rows:
        print(f"{param}={r.sweep_value:g} {r.solver}: mean RMSE {r.mean_rmse:.4g} "
              f"(se {r.stderr_rmse:.2g}, ok {r.trials_ok}, failed {r.trials_failed})")
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_validate(args) -> int:
    results = run_all(seed=args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_presets(args) -> int:
    for name, cfg in presets().items():
        s: Schedule = cfg.schedule
        print(f"{name}: scenario={cfg.scenario.kind} {cfg.scenario.sweep_param} in "
              f"{cfg.grid()[0]:g}..{cfg.grid()[-1]:g} ({len(cfg.grid())} values), "
              f"L={cfg.network.L}, radius={cfg.network.connect_radius:g}, "
              f"alpha={s.a:g}/k^{s.tau_alpha:g}, beta={s.b:g}/k^{s.tau_beta:g}, "
              f"trials={cfg.trials}, K={cfg.K}")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{name}.json").write_text(cfg.to_json())
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate, "presets": cmd_presets}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"dsrl {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DSRLError, ValueError) as exc:
        print(f"dsrl {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
