"""Command-line entry point.

Three subcommands:

* ``msnevo bench``   — benchmark-function experiments (repeated seeded
  trials of one optimizer, CSV/JSON results)
* ``msnevo train``   — train a dense classifier on synthetic digits or an
  MNIST-style IDX file pair
* ``msnevo compare`` — several optimizers on one function, speedup table

Optimizer hyperparameters can be overridden with ``--config FILE`` where
FILE is JSON or TOML containing per-optimizer sections, e.g.::

    {"msn": {"lr": 0.3, "lambda": 8.0}, "simulated_annealing": {"proposal_std": 0.2}}

Exit status: 0 on success, 1 if any trial failed with an error, 2 on
bad arguments.
"""

from __future__ import annotations

import argparse
import json
import sys

from .backend import active_backend
from .baselines import BASELINE_KINDS, BaselineConfig
from .harness import (ClassificationSpec, ExperimentConfig, Task1Spec,
                      compare, emit_results, run_experiment)
from .msn import MsnConfig
from .objectives import TerminationRule, list_functions

OPTIMIZER_KINDS = ("msn",) + BASELINE_KINDS


def load_config_file(path) -> dict:
    """Read a JSON or TOML config file of per-optimizer sections."""
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        try:
            import tomllib  # Python >= 3.11
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(text.decode())
    return json.loads(text.decode())


def make_optimizer(kind: str, overrides: dict):
    if kind == "msn":
        return MsnConfig.from_dict(overrides) if overrides else MsnConfig()
    merged = {"kind": kind, **overrides}
    return BaselineConfig.from_dict(merged)


def _optimizer_overrides(args, kind: str) -> dict:
    if not args.config:
        return {}
    sections = load_config_file(args.config)
    unknown = set(sections) - set(OPTIMIZER_KINDS)
    if unknown:
        raise ValueError(f"{args.config}: unknown optimizer sections {sorted(unknown)}")
    return dict(sections.get(kind, {}))


def _print_record(record, stream=None) -> None:
    stream = stream if stream is not None else sys.stdout
    print(f"objective: {record.objective_name}   optimizer: {record.optimizer_kind}"
          f"   backend: {active_backend()}", file=stream)
    for t in record.trials:
        line = (f"  trial {t.trial} (seed {t.seed}): {t.cause} after {t.steps} steps, "
                f"best reward {t.final_reward:.6g}, {t.wall_time_s:.2f}s")
        if t.recheck_ok is False:
            line += "  [recheck FAILED]"
        print(line, file=stream)
    agg = record.aggregate()
    mean = agg["mean_steps_converged"]
    median = agg["median_steps_converged"]
    print(f"  converged {agg['success_count']}/{agg['repetitions']}"
          + (f", mean steps {mean:.1f}, median {median:.1f}" if mean is not None else ""),
          file=stream)


def _emit(args, record) -> None:
    if args.out:
        emit_results(record, args.format, args.out)
        print(f"wrote {args.format} results to {args.out}")


def _add_common(parser: argparse.ArgumentParser, default_max_steps: int) -> None:
    parser.add_argument("--reps", type=int, default=5,
                        help="independent seeded trials (default 5)")
    parser.add_argument("--max-steps", type=int, default=default_max_steps,
                        help=f"generation cap per trial (default {default_max_steps})")
    parser.add_argument("--seed", type=int, default=0,
                        help="base seed; trial i uses seed+i (default 0)")
    parser.add_argument("--config", help="JSON/TOML optimizer config file")
    parser.add_argument("--out", help="write results to this path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="result file format (default csv)")


def cmd_bench(args) -> int:
    optimizer = make_optimizer(args.optimizer, _optimizer_overrides(args, args.optimizer))
    config = ExperimentConfig(
        optimizer=optimizer,
        objective=Task1Spec(args.function, hidden=args.hidden),
        termination=TerminationRule(args.max_steps, args.tolerance),
        repetitions=args.reps,
        base_seed=args.seed,
    )
    record = run_experiment(config)
    _print_record(record)
    _emit(args, record)
    return 1 if record.failed_count() else 0


def cmd_train(args) -> int:
    if args.train_images or args.train_labels:
        if not (args.train_images and args.train_labels):
            raise ValueError("--train-images and --train-labels go together")
        objective_spec = ClassificationSpec(
            source="idx", train_images=args.train_images,
            train_labels=args.train_labels, subset_size=args.subset_size,
            hidden=args.hidden, data_seed=args.data_seed)
    else:
        objective_spec = ClassificationSpec(
            source="synthetic", n_samples=args.synthetic,
            image_size=args.image_size, num_classes=args.num_classes,
            noise=args.noise, hidden=args.hidden, data_seed=args.data_seed)

    optimizer = make_optimizer(args.optimizer, _optimizer_overrides(args, args.optimizer))
    config = ExperimentConfig(
        optimizer=optimizer,
        objective=objective_spec,
        termination=TerminationRule(args.max_steps, args.target_loss),
        repetitions=args.reps,
        base_seed=args.seed,
    )

    accuracies = {}

    def on_trial(trial, result, objective):
        acc = objective.metadata["accuracy"](result.elite)
        accuracies[trial.trial] = acc
        print(f"  trial {trial.trial}: loss {-trial.final_reward:.4f}, "
              f"training accuracy {acc:.1%}, {trial.steps} steps ({trial.cause})")

    print(f"training objective: {objective_spec.source}, optimizer {args.optimizer}, "
          f"target loss {args.target_loss}, backend {active_backend()}")
    record = run_experiment(config, on_trial=on_trial)
    _emit(args, record)
    return 1 if record.failed_count() else 0


def cmd_compare(args) -> int:
    if len(args.optimizer) < 2:
        raise ValueError("compare needs at least two --optimizer values")
    configs = []
    for kind in args.optimizer:
        optimizer = make_optimizer(kind, _optimizer_overrides(args, kind))
        configs.append(ExperimentConfig(
            optimizer=optimizer,
            objective=Task1Spec(args.function, hidden=args.hidden),
            termination=TerminationRule(args.max_steps, args.tolerance),
            repetitions=args.reps,
            base_seed=args.seed,
        ))
    table = compare(configs)
    print(table.to_text())
    failed = sum(rec.failed_count() for rec in table.records)
    if args.out:
        for rec in table.records:
            suffix = f".{rec.label}.{args.format}"
            path = str(args.out) + suffix
            emit_results(rec, args.format, path)
            print(f"wrote {path}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msnevo",
        description="Derivative-free neural-network training and benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="benchmark-function experiment")
    bench.add_argument("--function", required=True, choices=list_functions())
    bench.add_argument("--optimizer", default="msn", choices=OPTIMIZER_KINDS)
    bench.add_argument("--tolerance", type=float, default=0.06,
                       help="success when |best - optimum| <= tolerance (default 0.06)")
    bench.add_argument("--hidden", type=int, default=128,
                       help="hidden layer width of the search network (default 128)")
    _add_common(bench, default_max_steps=5000)
    bench.set_defaults(func=cmd_bench)

    train = sub.add_parser("train", help="train a classifier")
    train.add_argument("--train-images", help="IDX image file (MNIST format)")
    train.add_argument("--train-labels", help="IDX label file")
    train.add_argument("--subset-size", type=int,
                       help="subsample the IDX training set to this many items")
    train.add_argument("--synthetic", type=int, default=500, metavar="N",
                       help="use N synthetic digit images (default; N=500)")
    train.add_argument("--image-size", type=int, default=10)
    train.add_argument("--num-classes", type=int, default=10)
    train.add_argument("--noise", type=float, default=0.05,
                       help="synthetic pixel noise sigma (default 0.05)")
    train.add_argument("--hidden", type=int, default=16,
                       help="hidden layer width of the classifier (default 16)")
    train.add_argument("--data-seed", type=int, default=0,
                       help="seed for dataset generation/subsampling (default 0)")
    train.add_argument("--optimizer", default="msn", choices=OPTIMIZER_KINDS)
    train.add_argument("--target-loss", type=float, default=0.15,
                       help="stop when training cross-entropy reaches this (default 0.15)")
    _add_common(train, default_max_steps=3000)
    train.set_defaults(func=cmd_train, reps=1)

    comp = sub.add_parser("compare", help="compare optimizers on one function")
    comp.add_argument("--function", required=True, choices=list_functions())
    comp.add_argument("--optimizer", action="append", default=None,
                      choices=OPTIMIZER_KINDS,
                      help="repeat for each optimizer; first is the speedup reference")
    comp.add_argument("--tolerance", type=float, default=0.06)
    comp.add_argument("--hidden", type=int, default=128)
    _add_common(comp, default_max_steps=5000)
    comp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compare" and not args.optimizer:
        args.optimizer = ["msn", "random_search"]
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
