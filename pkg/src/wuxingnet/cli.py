"""Command line harness: train, eval, inspect-fixed-point, gen-config.

Exit codes: 0 success, 2 configuration problems, 3 numeric divergence.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment, figures
from .core import DivergenceError, FixedPointDivergenceError
from .experiment import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wuxingnet",
        description="Five-element coupled-ODE network: train and inspect.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", required=True, help="JSON config path")
    p_train.add_argument("--seed", type=int, help="override config seed")
    p_train.add_argument("--out", help="override output directory")
    p_train.add_argument("--case", choices=experiment.case_names(),
                         help="override case selector")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", required=True, help="JSON config path")
    p_eval.add_argument("--split", choices=("train", "test"), default="test")
    p_eval.add_argument("--seed", type=int, help="override config seed")
    p_eval.add_argument("--out", help="write report files here")

    p_fp = sub.add_parser("inspect-fixed-point",
                          help="report analytic vs numeric fixed points")
    p_fp.add_argument("--checkpoint", help="inspect all checkpoint neurons")
    p_fp.add_argument("--k1", type=float, help="uniform k1 (with --k2/--k3)")
    p_fp.add_argument("--k2", type=float)
    p_fp.add_argument("--k3", type=float)
    p_fp.add_argument("--direction", choices=("forward", "inverse"),
                      default="forward")

    p_gen = sub.add_parser("gen-config", help="write a starter config")
    p_gen.add_argument("--template", choices=("toy", "desk"), default="toy")
    p_gen.add_argument("--out", help="file path (default: stdout)")
    return parser


def _apply_overrides(spec, args):
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "case", None):
        updates["case"] = args.case
    return dataclasses.replace(spec, **updates) if updates else spec


def _cmd_train(args) -> int:
    spec = _apply_overrides(experiment.load_spec(args.config), args)
    try:
        result = experiment.run_train(spec)
    except (DivergenceError, FixedPointDivergenceError) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for row in result.rows:
        print(f"epoch {row[0]}: train_acc={float(row[1]):.4f} "
              f"test_acc={float(row[2]):.4f} mean_abs_error={float(row[3]):.4f} "
              f"updated={row[4]} clamps={row[5]}")
    figure_path = result.out_dir / "accuracy.png"
    figures.save_accuracy_curves(result.rows, figure_path)
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"figure: {figure_path}")
    if result.diverged:
        print("training diverged; partial metrics retained", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_eval(args) -> int:
    spec = _apply_overrides(experiment.load_spec(args.config), args)
    try:
        checkpoint_text = Path(args.checkpoint).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint: {exc}") from None
    try:
        report = experiment.run_eval(checkpoint_text, spec, split=args.split)
    except (DivergenceError, FixedPointDivergenceError) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"samples: {report.n_samples}")
    print(f"accuracy: {report.accuracy:.4f}")
    print(f"mean_abs_error: {report.mean_abs_error:.4f}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        np.savetxt(out_dir / "confusion.csv", report.confusion,
                   fmt="%d", delimiter=",")
        figures.save_confusion(report.confusion, out_dir / "confusion.png")
        print(f"report: {out_dir / 'report.json'}")
    return EXIT_OK


def _print_fp_rows(rows, direction):
    print(f"direction: {direction}")
    bad = [r for r in rows if not r.converged]
    for row in rows[:20]:
        mark = "" if row.converged else "  UNRESOLVED"
        print(f"  neuron {row.neuron}: analytic={np.array2string(row.analytic, precision=6)} "
              f"numeric={np.array2string(row.numeric, precision=6)} "
              f"residual={row.residual:.3e}{mark}")
    if len(rows) > 20:
        worst = max(r.residual for r in rows)
        print(f"  ... {len(rows)} neurons total, max residual {worst:.3e}, "
              f"{len(bad)} unresolved")
    return bad


def _cmd_inspect(args) -> int:
    triple = (args.k1, args.k2, args.k3)
    if args.checkpoint and any(v is not None for v in triple):
        raise ConfigError("give either --checkpoint or --k1/--k2/--k3")
    if args.checkpoint:
        try:
            text = Path(args.checkpoint).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read checkpoint: {exc}") from None
        try:
            reports = experiment.inspect_checkpoint_fixed_points(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        bad = []
        for direction, rows in reports.items():
            bad += _print_fp_rows(rows, direction)
        if bad:
            print(f"{len(bad)} neuron fixed points unresolved",
                  file=sys.stderr)
            return EXIT_DIVERGED
        return EXIT_OK
    if any(v is None for v in triple):
        raise ConfigError("need all of --k1, --k2, --k3 (or --checkpoint)")
    if min(triple) <= 0:
        raise ConfigError("parameters must be positive")
    k1, k2, k3 = (np.full(5, v, dtype=float) for v in triple)
    rows = experiment.inspect_fixed_point(k1, k2, k3,
                                          direction=args.direction)
    bad = _print_fp_rows(rows, args.direction)
    return EXIT_DIVERGED if bad else EXIT_OK


def _cmd_gen_config(args) -> int:
    doc = experiment.default_config(args.template)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "inspect-fixed-point": _cmd_inspect,
        "gen-config": _cmd_gen_config,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
