"""Comparator optimizers: random search, simulated annealing, and a
(mu+lambda) evolution strategy.

All three consume the same Objective interface as the pool optimizer and
charge the same evaluation budget — one optimization step costs exactly
``pool_size`` objective evaluations — so step-count comparisons between any
of them are budget-fair. Randomness is keyed per step (stream index =
step number), making every trajectory reproducible from its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .msn import GenerationRecord, RunResult
from .vecmath import RngHandle, as_generator

__all__ = [
    "BaselineConfig", "RandomSearchState", "SimulatedAnnealingState",
    "EvolutionStrategiesState", "metropolis_accept", "random_search_step",
    "simulated_annealing_step", "evolution_strategies_step", "init_baseline",
    "run_baseline", "BASELINE_KINDS",
]

BASELINE_KINDS = ("random_search", "simulated_annealing", "evolution_strategies")


@dataclass(frozen=True)
class BaselineConfig:
    """Knobs for the comparator optimizers. Only the fields of the chosen
    ``kind`` matter; the rest are ignored."""

    kind: str
    pool_size: int = 50
    # simulated annealing
    initial_temperature: float = 1.0
    cooling_rate: float = 0.995
    proposal_std: float = 0.1
    # evolution strategy
    mu: int = 10
    lambda_offspring: int = 40
    sigma_init: float = 0.5
    sigma_decay: float = 0.999

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(
                f"kind must be one of {BASELINE_KINDS}, got {self.kind!r}")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.kind == "simulated_annealing":
            if self.initial_temperature <= 0:
                raise ValueError("initial_temperature must be positive")
            if not 0 < self.cooling_rate <= 1:
                raise ValueError("cooling_rate must be in (0, 1]")
            if self.proposal_std <= 0:
                raise ValueError("proposal_std must be positive")
        if self.kind == "evolution_strategies":
            if self.mu < 1 or self.mu > self.lambda_offspring:
                raise ValueError("need 1 <= mu <= lambda_offspring")
            if self.mu + self.lambda_offspring != self.pool_size:
                raise ValueError(
                    "mu + lambda_offspring must equal pool_size so each step "
                    f"costs exactly pool_size evaluations; got {self.mu} + "
                    f"{self.lambda_offspring} != {self.pool_size}")
            if self.sigma_init < 0 or not 0 < self.sigma_decay <= 1:
                raise ValueError("need sigma_init >= 0 and sigma_decay in (0, 1]")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RandomSearchState:
    config: BaselineConfig
    best: Optional[np.ndarray] = None
    best_reward: float = -math.inf
    gen_best: float = -math.inf
    generation: int = 0


@dataclass
class SimulatedAnnealingState:
    config: BaselineConfig
    current: np.ndarray = None
    current_reward: Optional[float] = None  # lazily filled on the first step
    temperature: float = 1.0
    best: Optional[np.ndarray] = None
    best_reward: float = -math.inf
    gen_best: float = -math.inf
    generation: int = 0


@dataclass
class EvolutionStrategiesState:
    config: BaselineConfig
    parents: np.ndarray = None  # (mu, n_params)
    sigma: float = 0.5
    best: Optional[np.ndarray] = None
    best_reward: float = -math.inf
    gen_best: float = -math.inf
    generation: int = 0


def metropolis_accept(delta_reward: float, temperature: float, rng) -> bool:
    """Metropolis rule: accept any improvement, accept a worsening of
    ``delta_reward`` (< 0) with probability exp(delta/T)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if delta_reward >= 0:
        return True
    return float(as_generator(rng).random()) < math.exp(delta_reward / temperature)


def init_baseline(config: BaselineConfig, objective, seed: int):
    """Initial state for a baseline optimizer; draws use stream 0 of the
    seed, later steps use stream = step number."""
    gen = RngHandle(seed, 0).generator()
    if config.kind == "random_search":
        return RandomSearchState(config)
    if config.kind == "simulated_annealing":
        return SimulatedAnnealingState(
            config, current=objective.init_params(gen),
            temperature=config.initial_temperature)
    parents = np.stack([objective.init_params(gen) for _ in range(config.mu)])
    return EvolutionStrategiesState(config, parents=parents, sigma=config.sigma_init)


def random_search_step(state: RandomSearchState, objective, rng) -> RandomSearchState:
    """Draw pool_size fresh init vectors, keep the historical best."""
    gen = as_generator(rng)
    best, best_r = state.best, state.best_reward
    gen_best = -math.inf
    for _ in range(state.config.pool_size):
        candidate = objective.init_params(gen)
        r = float(objective.evaluate(candidate))
        gen_best = max(gen_best, r)
        if r > best_r:
            best, best_r = candidate, r
    return replace(state, best=best, best_reward=best_r, gen_best=gen_best,
                   generation=state.generation + 1)


def simulated_annealing_step(state: SimulatedAnnealingState, objective,
                             rng) -> SimulatedAnnealingState:
    """pool_size Metropolis proposals on a single walker, then one cooling
    step. The walker's first-ever evaluation is charged to this step's
    budget, so every step costs exactly pool_size evaluations."""
    gen = as_generator(rng)
    cfg = state.config
    current, current_r = state.current, state.current_reward
    budget = cfg.pool_size
    if current_r is None:
        current_r = float(objective.evaluate(current))
        budget -= 1
    best, best_r = state.best, state.best_reward
    if current_r > best_r:
        best, best_r = current.copy(), current_r
    gen_best = current_r
    n = current.shape[0]
    for _ in range(budget):
        proposal = current + gen.normal(0.0, cfg.proposal_std, size=n)
        r = float(objective.evaluate(proposal))
        gen_best = max(gen_best, r)
        if metropolis_accept(r - current_r, state.temperature, gen):
            current, current_r = proposal, r
            if r > best_r:
                best, best_r = proposal.copy(), r
    return replace(state, current=current, current_reward=current_r,
                   temperature=state.temperature * cfg.cooling_rate,
                   best=best, best_reward=best_r, gen_best=gen_best,
                   generation=state.generation + 1)


def evolution_strategies_step(state: EvolutionStrategiesState, objective,
                              rng) -> EvolutionStrategiesState:
    """(mu+lambda) step: lambda offspring by Gaussian mutation of uniformly
    chosen parents, parents re-enter the selection pool, top mu survive.
    Parents are (re-)evaluated alongside the offspring — mu + lambda =
    pool_size evaluations per step."""
    gen = as_generator(rng)
    cfg = state.config
    n = state.parents.shape[1]
    picks = gen.integers(cfg.mu, size=cfg.lambda_offspring)
    offspring = state.parents[picks] + gen.normal(
        0.0, state.sigma, size=(cfg.lambda_offspring, n))
    candidates = np.concatenate([state.parents, offspring], axis=0)
    rewards = np.asarray([float(objective.evaluate(c)) for c in candidates])
    order = np.argsort(-rewards, kind="stable")  # ties keep parents first
    survivors = order[:cfg.mu]
    gen_best = float(rewards[order[0]])
    best, best_r = state.best, state.best_reward
    if gen_best > best_r:
        best, best_r = candidates[order[0]].copy(), gen_best
    return replace(state, parents=candidates[survivors].copy(),
                   sigma=state.sigma * cfg.sigma_decay,
                   best=best, best_reward=best_r, gen_best=gen_best,
                   generation=state.generation + 1)


_STEP_FNS = {
    "random_search": random_search_step,
    "simulated_annealing": simulated_annealing_step,
    "evolution_strategies": evolution_strategies_step,
}


def run_baseline(config: BaselineConfig, objective, termination,
                 seed: int) -> RunResult:
    """Loop a baseline optimizer under the same termination rules and
    RunResult shape as the pool optimizer. Trace fields that have no
    baseline equivalent (integrity, anchor count, effective lr) are NaN/0."""
    from .objectives import target_reached

    step_fn = _STEP_FNS[config.kind]
    state = init_baseline(config, objective, seed)
    records: list = []
    evaluations = 0
    cause = "max_steps"
    target = getattr(objective, "target_reward", None)

    for g in range(1, termination.max_steps + 1):
        state = step_fn(state, objective, RngHandle(seed, g))
        evaluations += config.pool_size
        records.append(GenerationRecord(
            generation=state.generation,
            best_reward=state.gen_best,
            elite_reward=state.best_reward,
            integrity=math.nan,
            num_anchors=0,
            effective_lr=math.nan,
            backtracked=False,
        ))
        if target_reached(termination, target, state.best_reward):
            cause = "target_reached"
            break

    return RunResult(
        records=records,
        steps=len(records),
        cause=cause,
        elite=None if state.best is None else state.best.copy(),
        elite_reward=state.best_reward,
        evaluations=evaluations,
    )
