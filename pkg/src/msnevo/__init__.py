"""msnevo: derivative-free training of fixed-topology neural networks.

The core optimizer evolves a pool of flat parameter vectors through
elite/anchor/probe/blend recomposition driven by an integrity schedule
(see :mod:`msnevo.msn`). Classic comparators (random search, simulated
annealing, a (mu+lambda) evolution strategy), 2-D benchmark objectives, a
small inference-only network stack, dataset utilities and an experiment
harness round out the package.

Quick start::

    from msnevo import harness, msn, objectives

    cfg = harness.ExperimentConfig(
        optimizer=msn.MsnConfig(),
        objective=harness.Task1Spec("ackley"),
        termination=objectives.TerminationRule(max_steps=5000, target_tolerance=0.06),
    )
    record = harness.run_experiment(cfg)
    print(record.aggregate())

Hot kernels (conv/pool/Canberra) run on a compiled Cython backend when the
extension is built, with a NumPy fallback otherwise; see
:mod:`msnevo.backend`.
"""

from . import backend, baselines, data, harness, msn, network, objectives, vecmath
from .backend import active_backend, available_backends, set_backend
from .baselines import BaselineConfig, run_baseline
from .data import Dataset, load_idx, load_mnist, subsample, synthetic_digits, write_idx
from .harness import (ClassificationSpec, ExperimentConfig, ExperimentRecord,
                      Task1Spec, compare, emit_results, run_experiment)
from .msn import MsnConfig, MsnState, Pool, RoleTag, RunResult, run
from .network import (NetworkSpec, accuracy, build, cross_entropy, forward,
                      mnist_cnn_spec)
from .objectives import (FUNCTIONS, Objective, TerminationRule, get_function,
                         make_classification_objective, make_task1_objective)
from .vecmath import RngHandle, canberra_distance, choose_indices, xavier_normal_init

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "active_backend", "available_backends", "set_backend",
    "BaselineConfig", "run_baseline",
    "Dataset", "load_idx", "load_mnist", "subsample", "synthetic_digits", "write_idx",
    "ClassificationSpec", "ExperimentConfig", "ExperimentRecord", "Task1Spec",
    "compare", "emit_results", "run_experiment",
    "MsnConfig", "MsnState", "Pool", "RoleTag", "RunResult", "run",
    "NetworkSpec", "accuracy", "build", "cross_entropy", "forward", "mnist_cnn_spec",
    "FUNCTIONS", "Objective", "TerminationRule", "get_function",
    "make_classification_objective", "make_task1_objective",
    "RngHandle", "canberra_distance", "choose_indices", "xavier_normal_init",
    "backend", "baselines", "data", "harness", "msn", "network", "objectives",
    "vecmath",
]
