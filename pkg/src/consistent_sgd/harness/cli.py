"""Command line entry point: generate, run, bounds, check-rate, plot, verify."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from consistent_sgd.bounds import BoundConstants, TheoremId, bound_curve, bound_value
from consistent_sgd.datagen import dump_instance, standard_instance
from consistent_sgd.harness.config import (PRESETS, SCHEMA_DOC, ExperimentConfig, apply_overrides,
                                           format_config, load_config, load_preset)
from consistent_sgd.harness.io import read_bound_csv, read_trace_csv, write_bound_csv
from consistent_sgd.harness.plot import FIGURE_METRICS, emit_plot
from consistent_sgd.harness.rates import check_rate


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", choices=PRESETS, help="canonical config for a figure panel")
    g = p.add_argument_group("config fields (override the file/preset)")
    for f in fields(ExperimentConfig):
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="VALUE",
                       help=SCHEMA_DOC[f.name])


def _config_from_args(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ValueError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        cfg = ExperimentConfig()
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in fields(ExperimentConfig)
                 if getattr(args, f"cfg_{f.name}") is not None}
    return apply_overrides(cfg, overrides).validate()


def cmd_generate(args) -> int:
    A, X, truth = standard_instance(args.kind, n=args.n, p=args.p, d=args.d, d2=args.d2, seed=args.seed)
    names = dump_instance(args.out, A, X, truth)
    print(f"wrote {', '.join(names)} to {args.out}")
    return 0


def cmd_run(args) -> int:
    from consistent_sgd.harness.experiment import run_experiment

    cfg = _config_from_args(args)
    if args.print_config:
        print(format_config(cfg), end="")
        return 0
    result = run_experiment(cfg)
    s = result.summary
    print(f"{cfg.kind} / {cfg.estimator} / {cfg.rule}: {len(cfg.seeds)} seed(s), T={cfg.T} -> {cfg.output_dir}")
    if result.rate is not None:
        print(result.rate.line())
    for name, b in s["bounds"].items():
        print(f"{'PASS' if b['passed'] else 'FAIL'} bound {name} on {b['metric']}: "
              f"max observed/bound {b['max_ratio']:.4g} at k={b['worst_k']}")
    if any(s["projection_activated"].values()):
        print("note: projection onto the feasible ball activated in seeds "
              + ", ".join(k for k, v in s["projection_activated"].items() if v))
    return 0 if result.passed else 1


def cmd_bounds(args) -> int:
    consts = {}
    if args.summary:
        consts.update(json.loads(Path(args.summary).read_text())["bound_constants"])
    for name in ("G", "l", "L", "D", "c", "D_f", "rho", "delta", "T"):
        v = getattr(args, name)
        if v is not None:
            consts[name] = v
    bc = BoundConstants(**consts)
    if args.k is not None:
        print(format(bound_value(args.theorem, bc, args.k), ".17g"))
        return 0
    curve = bound_curve(args.theorem, bc)
    if args.out:
        write_bound_csv(args.out, curve)
        print(f"wrote {len(curve.k)} rows to {args.out}")
    else:
        sys.stdout.write("k,value,theorem\n")
        for r in curve.rows():
            sys.stdout.write(f"{r['k']},{format(r['value'], '.17g')},{r['theorem']}\n")
    return 0


def cmd_check_rate(args) -> int:
    report = check_rate(read_trace_csv(args.trace), args.metric, args.target, tuple(args.window))
    print(report.line())
    return 0 if report.passed else 1


def cmd_plot(args) -> int:
    traces = [read_trace_csv(p) for p in args.traces]
    bounds = [read_bound_csv(p) for p in args.bound or []]
    ref = tuple(args.reference) if args.reference else None
    out = emit_plot(traces, bounds, args.out, metrics=tuple(args.metrics), reference=ref)
    print(f"wrote {out}")
    return 0


def cmd_verify(args) -> int:
    from consistent_sgd.harness.verify import verify_suite

    results = verify_suite(args.seed, quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consistent-sgd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write A, X, w*, y of a synthetic instance as CSV")
    p.add_argument("--kind", choices=("convex", "nonconvex"), default="convex")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--d2", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="instance")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run an experiment and write traces, bounds and summary")
    _add_config_flags(p)
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bounds", help="evaluate a theoretical bound")
    p.add_argument("theorem", choices=[t.value for t in TheoremId])
    p.add_argument("--summary", help="take constants from a run's summary.json")
    for name, typ in (("G", float), ("l", float), ("L", float), ("D", float), ("c", float),
                      ("D_f", float), ("rho", float), ("delta", float), ("T", int)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--k", type=int, help="single iteration (or horizon) instead of a curve")
    p.add_argument("--out", help="CSV path for the curve (default stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check-rate", help="fit a log-log slope to a trace column")
    p.add_argument("trace")
    p.add_argument("--metric", default="dist_sq")
    p.add_argument("--target", type=float, default=-0.8)
    p.add_argument("--window", type=int, nargs=2, default=(100, 3000), metavar=("LO", "HI"))
    p.set_defaults(func=cmd_check_rate)

    p = sub.add_parser("plot", help="render traces and bound curves to SVG")
    p.add_argument("traces", nargs="+")
    p.add_argument("--bound", action="append", help="bound CSV (repeatable)")
    p.add_argument("--metrics", nargs="+", default=list(FIGURE_METRICS))
    p.add_argument("--reference", type=float, nargs=2, metavar=("C0", "SLOPE"))
    p.add_argument("--out", default="figure.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="run the property-check suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="10x fewer samples per check")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
