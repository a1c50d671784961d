"""Experiment runner: repeated seeded trials of one optimizer on one
objective, aggregation, comparison tables, and CSV/JSON result files.

Protocol defaults mirror the bundled benchmark setting: 5 repetitions,
generation cap 5000, success when the best reward is within 0.06 of the
known optimum. Trial i runs with seed base_seed + i, so any single trial
can be reproduced in isolation.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import msn
from .baselines import BaselineConfig, run_baseline
from .data import Dataset, load_mnist, subsample, synthetic_digits
from .msn import MsnConfig
from .network import build, mlp_spec, task1_net_spec
from .objectives import (Objective, TerminationRule, get_function,
                         make_classification_objective, make_task1_objective,
                         target_reached)

__all__ = [
    "Task1Spec", "ClassificationSpec", "ExperimentConfig", "TrialRecord",
    "ExperimentRecord", "ComparisonRow", "ComparisonTable",
    "run_experiment", "compare", "emit_results", "load_record",
    "RESULT_SCHEMA_VERSION",
]

RESULT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Task1Spec:
    """Objective description: a named benchmark function searched through
    the 2-in/2-out coordinate network. The per-trial origin is drawn from
    the trial seed, so paired comparisons across optimizers see identical
    origins."""

    function: str
    hidden: int = 128


@dataclass(frozen=True)
class ClassificationSpec:
    """Objective description for the classification task. ``source`` is
    either "synthetic" (procedural digits) or "idx" (user-supplied MNIST
    file paths). The dataset is built once per experiment from data_seed
    and shared by all trials."""

    source: str = "synthetic"
    n_samples: int = 500
    image_size: int = 10
    num_classes: int = 10
    noise: float = 0.05
    hidden: int = 16
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    subset_size: Optional[int] = None
    data_seed: int = 0

    def __post_init__(self):
        if self.source not in ("synthetic", "idx"):
            raise ValueError(f"source must be 'synthetic' or 'idx', got {self.source!r}")
        if self.source == "idx" and not (self.train_images and self.train_labels):
            raise ValueError("idx source requires train_images and train_labels paths")


@dataclass(frozen=True)
class ExperimentConfig:
    optimizer: Union[MsnConfig, BaselineConfig]
    objective: Union[Task1Spec, ClassificationSpec]
    termination: TerminationRule
    repetitions: int = 5
    base_seed: int = 0
    name: Optional[str] = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")

    @property
    def optimizer_kind(self) -> str:
        if isinstance(self.optimizer, MsnConfig):
            return "msn"
        return self.optimizer.kind

    @property
    def label(self) -> str:
        return self.name or self.optimizer_kind


def _build_dataset(spec: ClassificationSpec) -> Dataset:
    if spec.source == "synthetic":
        return synthetic_digits(spec.n_samples, spec.image_size,
                                spec.num_classes, spec.data_seed, spec.noise)
    dataset = load_mnist(spec.train_images, spec.train_labels)
    if spec.subset_size is not None:
        dataset = subsample(dataset, spec.subset_size, spec.data_seed)
    return dataset


def build_objective(spec, trial_seed: int,
                    dataset: Optional[Dataset] = None) -> Objective:
    """Materialize an objective description for one trial."""
    if isinstance(spec, Task1Spec):
        net = build(task1_net_spec(spec.hidden))
        return make_task1_objective(get_function(spec.function), net, trial_seed)
    if isinstance(spec, ClassificationSpec):
        if dataset is None:
            dataset = _build_dataset(spec)
        flat = int(np.prod(dataset.inputs.shape[1:]))
        net = build(mlp_spec(flat, spec.hidden, dataset.num_classes))
        return make_classification_objective(net, dataset)
    raise TypeError(f"unknown objective spec {type(spec).__name__}")


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    steps: int
    cause: str  # target_reached | max_steps | failed
    final_reward: float
    wall_time_s: float
    #: for target_reached trials: did re-evaluating the returned best vector
    #: confirm the tolerance? None when not applicable
    recheck_ok: Optional[bool] = None

    def to_dict(self) -> dict:
        return {"trial": self.trial, "seed": self.seed, "steps": self.steps,
                "cause": self.cause, "final_reward": self.final_reward,
                "wall_time_s": self.wall_time_s, "recheck_ok": self.recheck_ok}

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(**d)


@dataclass(frozen=True)
class ExperimentRecord:
    """All trials of one experiment. Aggregates are always recomputed from
    the trial rows, never stored."""

    label: str
    optimizer_kind: str
    objective_name: str
    trials: tuple
    metadata: dict = field(default_factory=dict)

    def success_count(self) -> int:
        return sum(1 for t in self.trials if t.cause == "target_reached")

    def converged_steps(self) -> list:
        return [t.steps for t in self.trials if t.cause == "target_reached"]

    def mean_steps(self) -> Optional[float]:
        """Mean steps over converged trials only; None if none converged."""
        steps = self.converged_steps()
        return statistics.fmean(steps) if steps else None

    def median_steps(self) -> Optional[float]:
        steps = self.converged_steps()
        return float(statistics.median(steps)) if steps else None

    def failed_count(self) -> int:
        return sum(1 for t in self.trials if t.cause == "failed")

    def aggregate(self) -> dict:
        return {
            "repetitions": len(self.trials),
            "success_count": self.success_count(),
            "failed_count": self.failed_count(),
            "mean_steps_converged": self.mean_steps(),
            "median_steps_converged": self.median_steps(),
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": RESULT_SCHEMA_VERSION,
            "label": self.label,
            "optimizer_kind": self.optimizer_kind,
            "objective_name": self.objective_name,
            "metadata": self.metadata,
            "trials": [t.to_dict() for t in self.trials],
            "aggregate": self.aggregate(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        version = d.get("schema_version")
        if version != RESULT_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported result schema version {version!r} "
                f"(this build reads version {RESULT_SCHEMA_VERSION})")
        return cls(
            label=d["label"],
            optimizer_kind=d["optimizer_kind"],
            objective_name=d["objective_name"],
            trials=tuple(TrialRecord.from_dict(t) for t in d["trials"]),
            metadata=d.get("metadata", {}),
        )


def _run_one(optimizer, objective, termination, seed,
             evaluator=None) -> msn.RunResult:
    if isinstance(optimizer, MsnConfig):
        return msn.run(objective, optimizer, termination, seed, evaluator=evaluator)
    return run_baseline(optimizer, objective, termination, seed)


def run_experiment(config: ExperimentConfig, on_trial=None) -> ExperimentRecord:
    """Run ``repetitions`` independent seeded trials.

    A trial whose objective raises is recorded with cause "failed" and does
    not abort the experiment. Trials that report target_reached are
    re-checked post hoc by re-evaluating the returned best vector against
    the target. ``on_trial(trial_record, run_result, objective)`` is called
    after each completed (non-failed) trial.
    """
    shared_dataset = None
    if isinstance(config.objective, ClassificationSpec):
        shared_dataset = _build_dataset(config.objective)

    trials = []
    objective_name = None
    for i in range(config.repetitions):
        seed = config.base_seed + i
        started = time.perf_counter()
        try:
            objective = build_objective(config.objective, seed, shared_dataset)
            objective_name = objective.name
            result = _run_one(config.optimizer, objective, config.termination, seed)
        except Exception as exc:  # a failing trial must not sink the experiment
            failed = TrialRecord(
                trial=i, seed=seed, steps=0, cause="failed",
                final_reward=math.nan,
                wall_time_s=time.perf_counter() - started)
            trials.append(failed)
            _note_failure(failed, exc)
            continue
        wall = time.perf_counter() - started
        recheck = None
        if result.cause == "target_reached":
            again = float(objective.evaluate(result.elite))
            recheck = target_reached(config.termination,
                                     objective.target_reward, again)
        record = TrialRecord(trial=i, seed=seed, steps=result.steps,
                             cause=result.cause,
                             final_reward=result.elite_reward,
                             wall_time_s=wall, recheck_ok=recheck)
        trials.append(record)
        if on_trial is not None:
            on_trial(record, result, objective)

    meta = {
        "termination": {"max_steps": config.termination.max_steps,
                        "target_tolerance": config.termination.target_tolerance},
        "base_seed": config.base_seed,
        "optimizer_config": config.optimizer.to_dict(),
    }
    return ExperimentRecord(
        label=config.label,
        optimizer_kind=config.optimizer_kind,
        objective_name=objective_name or _spec_name(config.objective),
        trials=tuple(trials),
        metadata=meta,
    )


_LAST_FAILURES: list = []


def _note_failure(record: TrialRecord, exc: Exception) -> None:
    # kept for post-mortem inspection; the record itself stays JSON-plain
    _LAST_FAILURES.append((record.trial, repr(exc)))
    del _LAST_FAILURES[:-50]


def _spec_name(spec) -> str:
    if isinstance(spec, Task1Spec):
        return f"task1:{spec.function}"
    return "classification"


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    success_count: int
    repetitions: int
    mean_steps: Optional[float]
    median_steps: Optional[float]
    #: mean_steps(this) / mean_steps(reference); >1 means the reference
    #: converges in fewer steps. None when undefined.
    speedup: Optional[float]
    note: str = ""


@dataclass(frozen=True)
class ComparisonTable:
    reference: str
    rows: tuple
    records: tuple

    def to_text(self) -> str:
        headers = ["optimizer", "success", "mean steps", "median steps",
                   f"speedup vs {self.reference}"]
        lines = [[r.label,
                  f"{r.success_count}/{r.repetitions}",
                  "-" if r.mean_steps is None else f"{r.mean_steps:.1f}",
                  "-" if r.median_steps is None else f"{r.median_steps:.1f}",
                  r.note or ("-" if r.speedup is None else f"{r.speedup:.2f}x")]
                 for r in self.rows]
        widths = [max(len(h), *(len(row[c]) for row in lines))
                  for c, h in enumerate(headers)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*row) for row in lines]
        return "\n".join(out)


def compare(configs, on_trial=None) -> ComparisonTable:
    """Run several ExperimentConfigs sharing one objective; the first is
    the reference for the speedup column. Non-converged trials are excluded
    from the means and reported via the success column."""
    if len(configs) < 2:
        raise ValueError("compare needs at least 2 configs")
    first_objective = configs[0].objective
    for cfg in configs[1:]:
        if cfg.objective != first_objective:
            raise ValueError(
                "compare requires all configs to share one objective; "
                f"{cfg.label} differs")
    records = tuple(run_experiment(cfg, on_trial=on_trial) for cfg in configs)
    ref_mean = records[0].mean_steps()
    rows = []
    for rec in records:
        mean = rec.mean_steps()
        if mean is None:
            rows.append(ComparisonRow(rec.label, rec.success_count(),
                                      len(rec.trials), None, None, None,
                                      note="no convergence"))
        elif ref_mean is None:
            rows.append(ComparisonRow(rec.label, rec.success_count(),
                                      len(rec.trials), mean, rec.median_steps(),
                                      None, note="reference never converged"))
        else:
            rows.append(ComparisonRow(rec.label, rec.success_count(),
                                      len(rec.trials), mean, rec.median_steps(),
                                      mean / ref_mean))
    return ComparisonTable(reference=records[0].label, rows=tuple(rows),
                           records=records)


_CSV_COLUMNS = ("trial", "seed", "steps", "cause", "final_reward", "wall_time_s")


def emit_results(record: ExperimentRecord, format: str, path) -> None:
    """Write an ExperimentRecord to disk.

    CSV layout (stable): one header row with columns
    trial,seed,steps,cause,final_reward,wall_time_s; one row per trial; if
    there are any trials, a blank line then ``metric,value`` aggregate rows.
    JSON is the `to_dict` form, schema_version included; `load_record`
    reads it back to an equal ExperimentRecord.
    """
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_COLUMNS)
            for t in record.trials:
                writer.writerow([t.trial, t.seed, t.steps, t.cause,
                                 repr(t.final_reward), repr(t.wall_time_s)])
            if record.trials:
                writer.writerow([])
                writer.writerow(["metric", "value"])
                for key, value in record.aggregate().items():
                    writer.writerow([key, "" if value is None else value])
    elif format == "json":
        with open(path, "w") as fh:
            json.dump(record.to_dict(), fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")


def load_record(path) -> ExperimentRecord:
    """Read back a JSON result file written by emit_results."""
    with open(path) as fh:
        return ExperimentRecord.from_dict(json.load(fh))
