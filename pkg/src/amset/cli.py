"""Command line entry point: ``amset <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .estimate import FitOptions, FittedModel, fit_model
from .model import GaussianMixture, TwoGroupsModel
from .procedures import FirstRejection
from .svg import METRICS, emit_svg


def _list(args) -> int:
    for name, sc in harness.builtin_scenarios().items():
        sweep = f"{sc.sweep_param}={sc.sweep_values[0]:g}..{sc.sweep_values[-1]:g}" if sc.sweep_param else "-"
        print(f"{name:14s} m={sc.m:<5d} reps={sc.reps:<4d} stages={sc.stages:<3d} "
              f"p={sc.truth_p:<5g} alt={sc.alt.kind:8s} sweep={sweep}")
    return 0


def _simulate(args) -> int:
    sc = harness.resolve_scenario(args.scenario, desk=args.desk)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.reps is not None:
        changes["reps"] = args.reps
    if args.m is not None:
        changes["m"] = args.m
    if args.methods:
        changes["methods"] = tuple(args.methods.split(","))
    if changes:
        sc = replace(sc, **changes)
    rows = harness.run_scenario(sc, threads=args.threads)
    text = harness.rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    out = sys.stderr if not args.out else sys.stdout
    print(f"{sc.name}: {len(rows)} rows, m={sc.m}, reps={sc.reps}, seed={sc.seed}", file=out)
    bad = [r for r in rows if r.status != "ok"]
    for r in bad:
        print(f"  {r.method} at {r.sweep_param}={r.sweep_value}: {r.status}", file=out)
    return 0


def _model_from_args(args):
    if args.model:
        return FittedModel.load(args.model)
    if args.p is None or (args.mu is None and args.components is None):
        raise SystemExit("run needs --model FILE or oracle parameters --p with --mu/--components")
    if args.components:
        comps = json.loads(args.components)
        alt = GaussianMixture.from_components([tuple(c) for c in comps])
    else:
        alt = GaussianMixture.point(args.mu)
    return TwoGroupsModel(args.p, alt)


def _run(args) -> int:
    model = _model_from_args(args)
    stopping = FirstRejection() if args.stop_first else None
    _, summary = harness.run_on_data(args.data, model, args.method, args.alpha, stopping)
    print(json.dumps(summary, indent=2))
    return 0


def _estimate(args) -> int:
    z = harness.read_z_column(args.data)
    fm = fit_model(z, FitOptions(recovery=args.method))
    text = json.dumps(fm.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _plot(args) -> int:
    rows = harness.read_csv(args.input)
    x_axis = args.x_axis or ("stage" if all(r.stage != "final" for r in rows) else "sweep")
    svg = emit_svg(rows, args.metric, x_axis, alpha=args.alpha, title=args.title)
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amset", description="Sequential empirical Bayes multiple testing")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("list-scenarios", help="show the built-in scenarios")
    s.set_defaults(func=_list)

    s = sub.add_parser("simulate", help="run a scenario and write result rows as CSV")
    s.add_argument("scenario", help="built-in name or path to a TOML config")
    s.add_argument("--desk", action="store_true", help="reduced m and reps")
    s.add_argument("--seed", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--methods", help="comma separated method labels")
    s.add_argument("--threads", type=int, help=f"worker threads (default ${harness.THREADS_ENV} or all cores)")
    s.add_argument("--out")
    s.set_defaults(func=_simulate)

    s = sub.add_parser("run", help="apply a procedure to an m x T z-score CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--method", default="AMSET", help="AMSET, MSET or AMSET_SIMPLE")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--model", help="fitted model JSON from 'estimate'")
    s.add_argument("--p", type=float, help="oracle non-null proportion")
    s.add_argument("--mu", type=float, help="oracle alternative mean")
    s.add_argument("--components", help='oracle alternative as JSON [[mu, w], ...]')
    s.add_argument("--stop-first", action="store_true", help="stop at the first stage with a rejection")
    s.set_defaults(func=_run)

    s = sub.add_parser("estimate", help="fit p_hat and f1_hat from a column of historical z-scores")
    s.add_argument("--data", required=True)
    s.add_argument("--method", default="data_driven", help="data_driven or hard:c")
    s.add_argument("--out")
    s.set_defaults(func=_estimate)

    s = sub.add_parser("plot", help="SVG line chart from a result CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--metric", required=True, choices=METRICS)
    s.add_argument("--out", required=True)
    s.add_argument("--x-axis", choices=("sweep", "stage"))
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--title")
    s.set_defaults(func=_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
