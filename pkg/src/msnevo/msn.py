"""Multiple-search pool optimizer.

The optimizer evolves a fixed-size pool of parameter vectors. Each
generation, every pool member is evaluated and the pool is recomposed from
four roles:

* **elite** — the best vector seen in any generation, kept as an untouched
  copy in slot 0;
* **anchors** — up to N top-reward members that are mutually at least
  ``min_distance`` apart in Canberra distance, each the center of a local
  search region;
* **probes** — M perturbed clones per anchor; the perturbation touches
  ``num_selections`` coordinates, each by less than ``search_radius``;
* **blends** — crossovers of a random anchor with another pool member,
  filling every remaining slot.

Both the perturbation magnitude (:func:`search_radius`) and scope
(:func:`num_selections`) are driven by a single scalar, *integrity* in
[0, 1]. Integrity starts at 1 (tiny, narrow perturbations) and decays by
``step_size`` whenever a generation fails to improve the elite reward by at
least ``min_entropy`` relative; decay widens the search. Two recovery
mechanisms complete the schedule: *backtracking* (after ``patience``
consecutive failed generations, integrity snaps back to 1 and the elite is
re-inserted as an anchor) and *radial expansion* (while fewer than N anchors
satisfy the separation constraint, the effective lr and alpha grow
multiplicatively, capped; they relax back toward base once diversity
recovers).

Rewards are maximized. Wrap a loss as ``reward = -loss``.

Determinism: every random draw flows through per-slot stream handles derived
from the run seed (stream index ``generation * pool_size + slot``), so a run
is bit-reproducible for a fixed seed no matter how the objective evaluations
are scheduled (see :func:`run`'s ``evaluator`` parameter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .vecmath import RngHandle, as_generator, canberra_distance, choose_indices

__all__ = [
    "MsnConfig", "MsnState", "Pool", "RoleTag", "GenerationRecord", "RunResult",
    "EvaluationError", "search_radius", "num_selections", "init_pool",
    "select_anchors", "select_anchor_indices", "spawn_probe", "make_blend",
    "update_integrity", "backtrack", "radial_expansion", "step", "run",
    "initial_state", "serial_evaluator", "thread_evaluator",
]


class EvaluationError(RuntimeError):
    """An objective produced a non-finite reward."""


@dataclass(frozen=True)
class MsnConfig:
    """Hyperparameters of the pool optimizer.

    The nine search hyperparameters (``step_size``, ``min_entropy``, ``lr``,
    ``lam``, ``alpha``, ``beta``, ``min_distance``, ``patience``,
    ``expansion_factor``) plus the pool geometry. Defaults are the library's
    calibrated setting, used unchanged across every bundled benchmark.

    In config files the ``lam`` field is spelled ``lambda`` (a reserved word
    in Python source, hence the short attribute name).
    """

    pool_size: int = 50
    num_anchors: int = 4
    probes_per_anchor: int = 8
    #: integrity decrement applied after an insufficient-improvement generation
    step_size: float = 0.05
    #: minimum relative reward improvement that counts as progress
    min_entropy: float = 0.01
    #: base scale of the perturbation radius; small values keep the
    #: integrity-1 radius floor fine enough for late-stage refinement
    lr: float = 0.05
    #: slope of the radius curve in 1 - integrity
    lam: float = 5.0
    #: ceiling on the perturbed fraction of coordinates
    alpha: float = 0.05
    #: knee of the perturbation-scope curve
    beta: float = 0.29
    #: minimum Canberra distance between anchors. Blend offspring differ
    #: from their basis in only a few dozen coordinates, landing a handful
    #: of Canberra units away on a few-hundred-parameter vector; a wall far
    #: above that keeps one fast-improving family from flooding every
    #: anchor slot and killing independently-seeded lineages.
    min_distance: float = 50.0
    #: consecutive failed generations tolerated before backtracking
    patience: int = 20
    #: multiplicative growth of effective lr/alpha while anchors are scarce
    expansion_factor: float = 1.1
    #: noise law for probe perturbations; "gaussian" (sigma = radius) trades
    #: the hard locality bound for heavier tails
    noise: str = "uniform"
    #: effective lr is never expanded beyond lr * lr_cap_factor
    lr_cap_factor: float = 100.0

    def __post_init__(self):
        if self.pool_size < 1 or self.num_anchors < 1 or self.probes_per_anchor < 1:
            raise ValueError("pool_size, num_anchors and probes_per_anchor must be >= 1")
        if self.pool_size < self.num_anchors * self.probes_per_anchor + 1:
            raise ValueError(
                f"pool_size must be at least num_anchors*probes_per_anchor + 1 "
                f"({self.num_anchors * self.probes_per_anchor + 1}), got {self.pool_size}")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step_size must be in (0, 1], got {self.step_size}")
        if self.min_entropy < 0.0:
            raise ValueError(f"min_entropy must be >= 0, got {self.min_entropy}")
        if self.lr <= 0.0 or self.lam <= 0.0 or self.beta <= 0.0:
            raise ValueError("lr, lam and beta must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.min_distance <= 0.0:
            raise ValueError(f"min_distance must be positive, got {self.min_distance}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.expansion_factor <= 1.0:
            raise ValueError(f"expansion_factor must be > 1, got {self.expansion_factor}")
        if self.noise not in ("uniform", "gaussian"):
            raise ValueError(f"noise must be 'uniform' or 'gaussian', got {self.noise!r}")
        if self.lr_cap_factor < 1.0:
            raise ValueError("lr_cap_factor must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "pool_size": self.pool_size,
            "num_anchors": self.num_anchors,
            "probes_per_anchor": self.probes_per_anchor,
            "step_size": self.step_size,
            "min_entropy": self.min_entropy,
            "lr": self.lr,
            "lambda": self.lam,
            "alpha": self.alpha,
            "beta": self.beta,
            "min_distance": self.min_distance,
            "patience": self.patience,
            "expansion_factor": self.expansion_factor,
            "noise": self.noise,
            "lr_cap_factor": self.lr_cap_factor,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MsnConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class RoleTag:
    """Role of one pool slot: 'elite', 'anchor', 'probe' or 'blend'.

    Probes carry the index (within the anchor list) of the anchor they
    were cloned from.
    """

    kind: str
    anchor_index: Optional[int] = None


@dataclass
class Pool:
    """One generation's candidate vectors: a (pool_size, n_params) array
    plus one RoleTag per row."""

    members: np.ndarray
    roles: list

    def __post_init__(self):
        if self.members.ndim != 2:
            raise ValueError(f"pool members must be 2-D, got shape {self.members.shape}")
        if len(self.roles) != self.members.shape[0]:
            raise ValueError("one role tag per pool slot required")

    @property
    def size(self) -> int:
        return self.members.shape[0]


@dataclass(frozen=True)
class MsnState:
    """Optimizer state between generations. Treated as immutable; the ops
    below return updated copies."""

    config: MsnConfig
    integrity: float
    elite: Optional[np.ndarray]
    elite_reward: float
    anchors: list
    effective_lr: float
    effective_alpha: float
    fail_count: int
    generation: int
    rng: RngHandle
    #: True when the step that produced this state invoked backtracking
    backtracked: bool = False


def initial_state(config: MsnConfig, seed: int) -> MsnState:
    """Fresh state at generation 0: full integrity, no elite yet."""
    return MsnState(
        config=config,
        integrity=1.0,
        elite=None,
        elite_reward=-math.inf,
        anchors=[],
        effective_lr=config.lr,
        effective_alpha=config.alpha,
        fail_count=0,
        generation=0,
        rng=RngHandle(seed, 0),
    )


def search_radius(integrity: float, lam: float, effective_lr: float) -> float:
    """Perturbation magnitude bound: (tanh(lam*p - 2.5) + 1) * effective_lr,
    with p = 1 - integrity.

    Strictly increasing in p; ranges from ~0.0134*lr at full integrity to
    (tanh(lam - 2.5) + 1)*lr at integrity 0. Always positive.
    """
    if not 0.0 <= integrity <= 1.0:
        raise ValueError(f"integrity must be in [0, 1], got {integrity}")
    p = 1.0 - integrity
    return (math.tanh(lam * p - 2.5) + 1.0) * effective_lr


def num_selections(integrity: float, alpha: float, beta: float, n_params: int) -> int:
    """How many coordinates a perturbation or blend touches.

    The fraction f = alpha / (1 + beta/p), p = 1 - integrity, saturates
    below alpha as p -> 1 and vanishes at p = 0; the result is
    max(1, round(f * n_params)) so at least one coordinate always moves.
    """
    if not 0.0 <= integrity <= 1.0:
        raise ValueError(f"integrity must be in [0, 1], got {integrity}")
    if n_params < 1:
        raise ValueError(f"n_params must be >= 1, got {n_params}")
    p = 1.0 - integrity
    if p == 0.0:
        fraction = 0.0
    else:
        fraction = alpha / (1.0 + beta / p)
    return max(1, round(fraction * n_params))


def init_pool(config: MsnConfig, net, rng: RngHandle) -> Pool:
    """Independent initial pool: one fresh init draw per slot.

    ``net`` is anything with a ``parameter_count`` attribute and an
    ``init_params(generator) -> vector`` method (a built Network or an
    Objective). Slot i draws from stream ``rng.stream + i``.
    """
    members = np.empty((config.pool_size, net.parameter_count), dtype=np.float64)
    for slot in range(config.pool_size):
        members[slot] = net.init_params(rng.offset(slot).generator())
    roles = [RoleTag("blend")] * config.pool_size
    return Pool(members, roles)


def select_anchor_indices(members: np.ndarray, rewards: np.ndarray,
                          n_anchors: int, min_distance: float) -> list:
    """Greedy reductive anchor admission, returning pool indices.

    Candidates are visited in order of descending reward (ties broken by
    lower index). The best is always admitted; each later candidate is
    admitted only if its Canberra distance to every already-admitted anchor
    is at least ``min_distance``. Stops after ``n_anchors`` admissions.
    """
    order = np.argsort(-rewards, kind="stable")
    admitted: list = []
    for idx in order:
        if not admitted:
            admitted.append(int(idx))
        else:
            candidate = members[idx]
            if all(canberra_distance(candidate, members[j]) >= min_distance
                   for j in admitted):
                admitted.append(int(idx))
        if len(admitted) == n_anchors:
            break
    return admitted


def select_anchors(samples: Sequence, n_anchors: int, min_distance: float) -> list:
    """Like :func:`select_anchor_indices` but takes (vector, reward) pairs
    and returns the admitted vectors."""
    if len(samples) == 0:
        raise ValueError("samples must be non-empty")
    members = np.asarray([np.asarray(v, dtype=np.float64) for v, _ in samples])
    rewards = np.asarray([r for _, r in samples], dtype=np.float64)
    if not np.isfinite(rewards).all():
        raise ValueError("rewards must be finite")
    idx = select_anchor_indices(members, rewards, n_anchors, min_distance)
    return [members[i] for i in idx]


def spawn_probe(anchor: np.ndarray, k: int, radius: float, rng,
                noise: str = "uniform") -> np.ndarray:
    """Clone of ``anchor`` with exactly k distinct coordinates nudged.

    Under the default uniform law each nudge is a draw from
    (-radius, +radius) — strictly inside, so a probe never strays from its
    anchor by radius or more in any coordinate. The gaussian alternative
    uses sigma = radius and carries no such hard bound.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    gen = as_generator(rng)
    probe = np.array(anchor, dtype=np.float64, copy=True)
    idx = choose_indices(probe.shape[0], k, gen)
    if noise == "uniform":
        draws = gen.uniform(-radius, radius, size=k)
        # numpy's interval is [low, high); reject the closed endpoint to keep
        # the |draw| < radius contract exact
        bad = np.abs(draws) >= radius
        while bad.any():
            draws[bad] = gen.uniform(-radius, radius, size=int(bad.sum()))
            bad = np.abs(draws) >= radius
    elif noise == "gaussian":
        draws = gen.normal(0.0, radius, size=k)
    else:
        raise ValueError(f"unknown noise law {noise!r}")
    probe[idx] += draws
    return probe


def make_blend(anchors: Sequence, pool: Pool, k: int, rng,
               anchor_slots: Optional[Sequence] = None) -> np.ndarray:
    """Crossover: clone a random anchor, then replace k random coordinates
    with the values of another pool member at the same indices.

    The partner is drawn uniformly over pool slots other than the basis
    anchor's own slot (``anchor_slots`` maps anchor list positions to pool
    indices; entries may be None for anchors not present in the pool, e.g. a
    backtrack-inserted elite, in which case every slot is eligible). The
    partner may still be value-identical to the basis — the blend is then a
    no-op copy, which is fine.
    """
    if len(anchors) == 0:
        raise ValueError("anchors must be non-empty")
    if pool.size < 2:
        raise ValueError("pool must have at least 2 members")
    gen = as_generator(rng)
    basis_pos = int(gen.integers(len(anchors)))
    basis = np.array(anchors[basis_pos], dtype=np.float64, copy=True)
    own_slot = None
    if anchor_slots is not None:
        own_slot = anchor_slots[basis_pos]
    if own_slot is None:
        partner = int(gen.integers(pool.size))
    else:
        partner = int(gen.integers(pool.size - 1))
        if partner >= own_slot:
            partner += 1
    k = min(k, basis.shape[0])
    idx = choose_indices(basis.shape[0], k, gen)
    basis[idx] = pool.members[partner, idx]
    return basis


def update_integrity(state: MsnState, gen_best_reward: float) -> MsnState:
    """Integrity bookkeeping for one generation.

    The improvement ratio r = (gen_best - elite_reward) / max(|elite_reward|,
    1e-8) is measured against the elite reward *going into* the generation.
    r >= min_entropy keeps integrity and clears fail_count; anything less
    decays integrity by step_size (clamped at 0) and increments fail_count.
    Before any elite exists every finite reward counts as progress.
    """
    cfg = state.config
    if state.elite is None:
        return replace(state, fail_count=0)
    ratio = (gen_best_reward - state.elite_reward) / max(abs(state.elite_reward), 1e-8)
    if ratio >= cfg.min_entropy:
        return replace(state, fail_count=0)
    return replace(
        state,
        integrity=max(0.0, state.integrity - cfg.step_size),
        fail_count=state.fail_count + 1,
    )


def backtrack(state: MsnState) -> MsnState:
    """Reset integrity to maximum after ``patience`` consecutive failures.

    The caller (``step``) also re-inserts the elite as the first anchor of
    the next generation, bypassing the distance check.
    """
    assert state.fail_count >= state.config.patience, \
        "backtrack requires fail_count >= patience"
    return replace(state, integrity=1.0, fail_count=0)


def radial_expansion(state: MsnState, admitted_anchors: int,
                     n_anchors: Optional[int] = None,
                     expansion_factor: Optional[float] = None) -> MsnState:
    """Widen the search while anchor diversity is below target.

    When fewer than N anchors were admitted, effective_lr and
    effective_alpha each grow by one multiplicative step (capped at
    lr*lr_cap_factor and 1.0); otherwise both relax one step back toward,
    and never below, their configured base values. At most one expansion
    per generation.
    """
    cfg = state.config
    n = cfg.num_anchors if n_anchors is None else n_anchors
    factor = cfg.expansion_factor if expansion_factor is None else expansion_factor
    lr_cap = cfg.lr * cfg.lr_cap_factor
    if admitted_anchors < n:
        return replace(
            state,
            effective_lr=min(state.effective_lr * factor, lr_cap),
            effective_alpha=min(state.effective_alpha * factor, 1.0),
        )
    return replace(
        state,
        effective_lr=max(cfg.lr, state.effective_lr / factor),
        effective_alpha=max(cfg.alpha, state.effective_alpha / factor),
    )


def _check_rewards(rewards, pool_size: int) -> np.ndarray:
    arr = np.asarray(rewards, dtype=np.float64)
    if arr.shape != (pool_size,):
        raise ValueError(
            f"expected {pool_size} rewards aligned with pool slots, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise EvaluationError(
            f"non-finite reward {arr[bad[0]]!r} from objective at pool slot {int(bad[0])}")
    return arr


def step(state: MsnState, pool: Pool, rewards) -> tuple:
    """One full generation transition: bookkeeping plus pool recomposition.

    In order: elite/integrity bookkeeping against the pre-step elite,
    backtracking when fail_count reaches patience, anchor selection from the
    evaluated pool (with elite insertion on backtrack), radial expansion,
    and recomposition of the next pool as
    ``[elite] + anchors + M probes per anchor + blends`` in every remaining
    slot. The elite slot is always an untouched copy. Returns
    ``(new_state, new_pool)``.
    """
    cfg = state.config
    rewards = _check_rewards(rewards, pool.size)
    n_params = pool.members.shape[1]

    best_slot = int(np.argmax(rewards))  # first max -> lowest index on ties
    gen_best = float(rewards[best_slot])

    # integrity bookkeeping measures improvement against the elite as of the
    # start of this generation; the elite update follows
    st = update_integrity(state, gen_best)
    if gen_best > st.elite_reward:
        st = replace(st, elite=pool.members[best_slot].copy(), elite_reward=gen_best)

    did_backtrack = st.fail_count >= cfg.patience
    if did_backtrack:
        st = backtrack(st)

    anchor_idx = select_anchor_indices(pool.members, rewards,
                                       cfg.num_anchors, cfg.min_distance)
    anchors = [pool.members[i].copy() for i in anchor_idx]
    anchor_slots: list = list(anchor_idx)
    if did_backtrack:
        present = any(np.array_equal(a, st.elite) for a in anchors)
        if not present:
            anchors.insert(0, st.elite.copy())
            anchor_slots.insert(0, None)
            if len(anchors) > cfg.num_anchors:  # displace the lowest-ranked
                anchors.pop()
                anchor_slots.pop()

    st = radial_expansion(st, len(anchors))

    radius = search_radius(st.integrity, cfg.lam, st.effective_lr)
    k = num_selections(st.integrity, st.effective_alpha, cfg.beta, n_params)

    next_gen = st.generation + 1
    stream_base = next_gen * cfg.pool_size

    def slot_rng(slot: int) -> RngHandle:
        return st.rng.offset(stream_base + slot)

    members = np.empty((cfg.pool_size, n_params), dtype=np.float64)
    roles: list = []
    members[0] = st.elite
    roles.append(RoleTag("elite"))
    slot = 1
    for a_pos, anchor in enumerate(anchors):
        if slot >= cfg.pool_size:
            break
        members[slot] = anchor
        roles.append(RoleTag("anchor", a_pos))
        slot += 1
    for a_pos, anchor in enumerate(anchors):
        for _ in range(cfg.probes_per_anchor):
            if slot >= cfg.pool_size:
                break
            members[slot] = spawn_probe(anchor, k, radius, slot_rng(slot), cfg.noise)
            roles.append(RoleTag("probe", a_pos))
            slot += 1
    while slot < cfg.pool_size:
        members[slot] = make_blend(anchors, pool, k, slot_rng(slot), anchor_slots)
        roles.append(RoleTag("blend"))
        slot += 1

    st = replace(st, anchors=anchors, generation=next_gen, backtracked=did_backtrack)
    return st, Pool(members, roles)


@dataclass(frozen=True)
class GenerationRecord:
    """Per-generation trace entry."""

    generation: int
    best_reward: float
    elite_reward: float
    integrity: float
    num_anchors: int
    effective_lr: float
    backtracked: bool

    CSV_FIELDS = ("generation", "best_reward", "elite_reward", "integrity",
                  "num_anchors", "effective_lr", "backtracked")


@dataclass
class RunResult:
    """Outcome of one optimization run.

    ``cause`` is one of ``target_reached``, ``max_steps`` or
    ``caller_stop``; ``steps`` counts completed generations;
    ``evaluations`` counts objective calls.
    """

    records: list
    steps: int
    cause: str
    elite: Optional[np.ndarray]
    elite_reward: float
    evaluations: int

    def best_rewards(self) -> np.ndarray:
        return np.asarray([r.best_reward for r in self.records])

    def integrity_trace(self) -> np.ndarray:
        return np.asarray([r.integrity for r in self.records])


def serial_evaluator(evaluate: Callable, members: np.ndarray) -> list:
    """Default evaluator: call the objective on each slot in order."""
    return [float(evaluate(members[i])) for i in range(members.shape[0])]


def thread_evaluator(max_workers: int = 4) -> Callable:
    """Evaluator running objective calls in a thread pool.

    Results are gathered positionally, so trajectories are identical to the
    serial evaluator for any deterministic objective.
    """
    from concurrent.futures import ThreadPoolExecutor

    def evaluator(evaluate: Callable, members: np.ndarray) -> list:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return [float(r) for r in pool.map(evaluate, list(members))]

    return evaluator


def run(objective, config: MsnConfig, termination, seed: int,
        evaluator: Optional[Callable] = None,
        on_generation: Optional[Callable] = None) -> RunResult:
    """Full optimization loop: evaluate -> step, until termination.

    Stops with cause ``target_reached`` when the elite reward reaches
    ``objective.target_reward`` within ``termination.target_tolerance``
    (both must be set), ``max_steps`` when the generation budget runs out,
    or ``caller_stop`` when the optional ``on_generation(state, pool,
    rewards, record)`` callback returns truthy.
    """
    from .objectives import target_reached

    if evaluator is None:
        evaluator = serial_evaluator
    state = initial_state(config, seed)
    pool = init_pool(config, objective, state.rng)
    records: list = []
    evaluations = 0
    cause = "max_steps"
    target = getattr(objective, "target_reward", None)

    for _ in range(termination.max_steps):
        rewards = evaluator(objective.evaluate, pool.members)
        evaluations += pool.size
        try:
            state, pool = step(state, pool, rewards)
        except EvaluationError as exc:
            raise EvaluationError(f"generation {state.generation + 1}: {exc}") from exc
        record = GenerationRecord(
            generation=state.generation,
            best_reward=float(np.max(rewards)),
            elite_reward=state.elite_reward,
            integrity=state.integrity,
            num_anchors=len(state.anchors),
            effective_lr=state.effective_lr,
            backtracked=state.backtracked,
        )
        records.append(record)
        if target_reached(termination, target, state.elite_reward):
            cause = "target_reached"
            break
        if on_generation is not None and on_generation(state, pool, rewards, record):
            cause = "caller_stop"
            break

    return RunResult(
        records=records,
        steps=len(records),
        cause=cause,
        elite=None if state.elite is None else state.elite.copy(),
        elite_reward=state.elite_reward,
        evaluations=evaluations,
    )
