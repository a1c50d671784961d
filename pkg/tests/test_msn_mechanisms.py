"""Property tests for the pool mechanics: composition, anchors, probes,
blends, backtracking, expansion and end-to-end reproducibility."""

import numpy as np
import pytest

from msnevo.msn import (
    MsnConfig,
    Pool,
    RoleTag,
    initial_state,
    init_pool,
    make_blend,
    num_selections,
    run,
    search_radius,
    select_anchor_indices,
    spawn_probe,
    step,
    thread_evaluator,
)
from msnevo.objectives import Objective, TerminationRule
from msnevo.vecmath import RngHandle, as_generator, canberra_distance as canberra

# mechanism-scale config: coarse radius (lr) and a low anchor wall so all
# the machinery (admission, probes, blends, backtracks) engages on tiny
# random problems within a few dozen generations
SMALL = MsnConfig(pool_size=10, num_anchors=2, probes_per_anchor=3,
                  patience=5, step_size=0.25, lr=0.5, min_distance=3.0)


def sphere_objective(dim=12):
    return Objective(
        name="sphere",
        evaluate=lambda p: -float(np.sum(np.square(p))),
        parameter_count=dim,
        init_params=lambda rng: as_generator(rng).standard_normal(dim),
        target_reward=0.0,
        target_tolerance=1e-3,
    )


def constant_objective(dim=6):
    return Objective(
        name="flat",
        evaluate=lambda p: 0.0,
        parameter_count=dim,
        init_params=lambda rng: as_generator(rng).standard_normal(dim),
    )


def random_generations(config, dim, n_gens, seed):
    """Drive `step` with random rewards, yielding (state, pool) each gen."""
    gen = np.random.default_rng(seed)
    state = initial_state(config, seed)
    pool = init_pool(config, sphere_objective(dim), state.rng)
    for _ in range(n_gens):
        rewards = gen.standard_normal(pool.size)
        state, pool = step(state, pool, rewards)
        yield state, pool


# ---------------------------------------------------------------- composition

def test_pool_conservation_and_role_coverage():
    for state, pool in random_generations(SMALL, dim=7, n_gens=40, seed=0):
        assert pool.size == SMALL.pool_size
        assert len(pool.roles) == SMALL.pool_size
        assert all(r.kind in {"elite", "anchor", "probe", "blend"}
                   for r in pool.roles)
        assert pool.roles[0].kind == "elite"


def test_full_composition_counts():
    # Independent random vectors at dim 20 sit ~12 Canberra units apart, so
    # a wall of 3 admits all 4 anchors and the composition is exact.
    config = MsnConfig(min_distance=3.0)  # 50 / 4 / 8
    state = initial_state(config, 1)
    pool = init_pool(config, sphere_objective(20), state.rng)
    rewards = np.random.default_rng(1).standard_normal(50)
    state, nxt = step(state, pool, rewards)
    kinds = [r.kind for r in nxt.roles]
    assert kinds.count("elite") == 1
    assert kinds.count("anchor") == 4
    assert kinds.count("probe") == 32
    assert kinds.count("blend") == 13


def test_degenerate_pool_single_anchor_composition():
    # All-identical members leave exactly one admissible anchor; probes for
    # it, blends everywhere else.
    config = MsnConfig()
    state = initial_state(config, 2)
    members = np.tile(np.linspace(1.0, 2.0, 20), (50, 1))
    pool = Pool(members, [RoleTag("blend")] * 50)
    state, nxt = step(state, pool, np.zeros(50))
    kinds = [r.kind for r in nxt.roles]
    assert kinds.count("anchor") == 1
    assert kinds.count("probe") == 8
    assert kinds.count("blend") == 50 - 1 - 1 - 8


def test_elite_slot_is_untouched_copy():
    config = SMALL
    state = initial_state(config, 3)
    pool = init_pool(config, sphere_objective(5), state.rng)
    rewards = np.arange(float(pool.size))
    state, nxt = step(state, pool, rewards)
    np.testing.assert_array_equal(nxt.members[0], state.elite)
    np.testing.assert_array_equal(state.elite, pool.members[-1])  # argmax


def test_step_rejects_bad_rewards():
    state = initial_state(SMALL, 4)
    pool = init_pool(SMALL, sphere_objective(5), state.rng)
    with pytest.raises(ValueError):
        step(state, pool, np.zeros(pool.size - 1))
    bad = np.zeros(pool.size)
    bad[7] = np.nan
    with pytest.raises(Exception) as err:
        step(state, pool, bad)
    assert "7" in str(err.value)


# -------------------------------------------------------------------- anchors

def test_anchor_pairwise_separation():
    config = MsnConfig(pool_size=16, num_anchors=4, probes_per_anchor=3,
                       min_distance=1.5)
    for state, _pool in random_generations(config, dim=9, n_gens=30, seed=5):
        if state.backtracked:
            continue  # inserted elite bypasses the distance check
        for i in range(len(state.anchors)):
            for j in range(i + 1, len(state.anchors)):
                assert canberra(state.anchors[i], state.anchors[j]) >= 1.5


def test_select_anchor_greedy_reduction():
    members = np.array([
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 1.01],   # hugs slot 0
        [-1.0, 5.0, -2.0],  # far from everything
    ])
    idx = select_anchor_indices(members, np.array([5.0, 4.0, 3.0]),
                                n_anchors=2, min_distance=1.0)
    assert idx == [0, 2]
    # min_distance zero admits purely by reward
    idx = select_anchor_indices(members, np.array([5.0, 4.0, 3.0]),
                                n_anchors=2, min_distance=1e-12)
    assert idx == [0, 1]


def test_anchor_reward_ordering():
    members = np.random.default_rng(6).standard_normal((12, 4))
    rewards = np.random.default_rng(7).standard_normal(12)
    idx = select_anchor_indices(members, rewards, 4, 1e-9)
    picked = rewards[idx]
    assert list(picked) == sorted(picked, reverse=True)
    assert idx[0] == int(np.argmax(rewards))


# --------------------------------------------------------------------- probes

def test_probe_locality_end_to_end():
    config = MsnConfig(pool_size=12, num_anchors=2, probes_per_anchor=4,
                       step_size=0.2, patience=4)
    for state, pool in random_generations(config, dim=30, n_gens=25, seed=8):
        radius = search_radius(state.integrity, config.lam, state.effective_lr)
        k = num_selections(state.integrity, state.effective_alpha,
                           config.beta, 30)
        for member, role in zip(pool.members, pool.roles):
            if role.kind != "probe":
                continue
            diff = member - state.anchors[role.anchor_index]
            changed = np.nonzero(diff)[0]
            assert len(changed) <= k
            assert np.all(np.abs(diff[changed]) < radius)


def test_spawn_probe_exact_coordinate_count():
    anchor = np.zeros(100)
    probe = spawn_probe(anchor, k=17, radius=0.5, rng=RngHandle(9, 0))
    changed = np.nonzero(probe)[0]
    assert len(changed) == 17
    assert np.all(np.abs(probe[changed]) < 0.5)


def test_spawn_probe_gaussian_unbounded():
    anchor = np.zeros(2000)
    probe = spawn_probe(anchor, k=2000, radius=0.1, rng=RngHandle(10, 0),
                        noise="gaussian")
    # sigma = radius; some draws should exceed the uniform law's hard bound
    assert np.abs(probe).max() > 0.1


def test_spawn_probe_rejects_bad_k():
    with pytest.raises(ValueError):
        spawn_probe(np.zeros(4), k=0, radius=0.1, rng=RngHandle(0, 0))


# --------------------------------------------------------------------- blends

def test_blend_single_partner_provenance():
    # Constant-valued members make the parent of every coordinate legible.
    pool = Pool(np.arange(6, dtype=np.float64)[:, None] * np.ones((6, 40)),
                [RoleTag("blend")] * 6)
    anchors = [np.full(40, 100.0)]
    for trial in range(30):
        blend = make_blend(anchors, pool, k=12, rng=RngHandle(11, trial))
        foreign = blend[blend != 100.0]
        assert len(foreign) <= 12
        assert len(np.unique(foreign)) <= 1  # one partner only


def test_blend_full_replacement_equals_partner():
    pool = Pool(np.vstack([np.zeros(8), np.full(8, 3.0)]),
                [RoleTag("blend")] * 2)
    blend = make_blend([np.zeros(8)], pool, k=8, rng=RngHandle(12, 0),
                       anchor_slots=[0])
    np.testing.assert_array_equal(blend, np.full(8, 3.0))


# --------------------------------------------- integrity schedule / backtrack

def test_backtrack_period_on_constant_objective():
    result = run(constant_objective(), SMALL,
                 TerminationRule(max_steps=27, target_tolerance=None), seed=13)
    backtracks = [r.generation for r in result.records if r.backtracked]
    # first elite assignment counts as progress, then patience-long decay
    assert backtracks == [6, 11, 16, 21, 26]


def test_integrity_sawtooth_shape():
    result = run(constant_objective(), SMALL,
                 TerminationRule(max_steps=12, target_tolerance=None), seed=14)
    integrity = [r.integrity for r in result.records]
    assert integrity[:6] == [1.0, 0.75, 0.5, 0.25, 0.0, 1.0]
    assert integrity[6:11] == [0.75, 0.5, 0.25, 0.0, 1.0][: len(integrity) - 6]


def test_backtrack_restores_elite_to_anchors():
    seen = []

    def spy(state, pool, rewards, record):
        if record.backtracked:
            seen.append(any(np.array_equal(a, state.elite)
                            for a in state.anchors))
        return False

    run(constant_objective(), SMALL,
        TerminationRule(max_steps=20, target_tolerance=None), seed=15,
        on_generation=spy)
    assert seen and all(seen)


def test_fail_count_resets_below_patience():
    for state, _pool in random_generations(SMALL, dim=5, n_gens=60, seed=16):
        assert state.fail_count < SMALL.patience


# ----------------------------------------------------------- radial expansion

def test_expansion_grows_and_caps():
    from msnevo.msn import radial_expansion

    state = initial_state(MsnConfig(), 17)
    for _ in range(200):
        state = radial_expansion(state, admitted_anchors=1)
    assert state.effective_lr == pytest.approx(MsnConfig().lr * 100.0)
    assert state.effective_alpha == pytest.approx(1.0)


def test_expansion_relaxes_to_base():
    from msnevo.msn import radial_expansion

    cfg = MsnConfig()
    state = initial_state(cfg, 18)
    state = radial_expansion(state, admitted_anchors=2)
    grown = state.effective_lr
    assert grown == pytest.approx(cfg.lr * cfg.expansion_factor)
    for _ in range(50):
        state = radial_expansion(state, admitted_anchors=cfg.num_anchors)
    assert state.effective_lr == cfg.lr
    assert state.effective_alpha == cfg.alpha


# ------------------------------------------------------------- reproducibility

def test_run_reproducible_and_elite_monotone():
    obj = sphere_objective()
    rule = TerminationRule(max_steps=40, target_tolerance=None)
    a = run(obj, SMALL, rule, seed=19)
    b = run(obj, SMALL, rule, seed=19)
    assert a.elite_reward == b.elite_reward
    assert [r.best_reward for r in a.records] == [r.best_reward for r in b.records]
    elites = [r.elite_reward for r in a.records]
    assert all(x <= y for x, y in zip(elites, elites[1:]))
    c = run(obj, SMALL, rule, seed=20)
    assert c.elite_reward != a.elite_reward


def test_thread_evaluator_matches_serial():
    obj = sphere_objective()
    rule = TerminationRule(max_steps=25, target_tolerance=None)
    serial = run(obj, SMALL, rule, seed=21)
    threaded = run(obj, SMALL, rule, seed=21, evaluator=thread_evaluator(3))
    assert serial.elite_reward == threaded.elite_reward
    assert [r.best_reward for r in serial.records] == \
        [r.best_reward for r in threaded.records]


def test_sphere_actually_improves():
    obj = sphere_objective()
    result = run(obj, SMALL, TerminationRule(max_steps=300,
                                             target_tolerance=1e-3), seed=22)
    assert result.elite_reward > -0.05


def test_caller_stop():
    obj = sphere_objective()
    result = run(obj, SMALL, TerminationRule(max_steps=50, target_tolerance=None),
                 seed=23, on_generation=lambda s, p, r, rec: rec.generation >= 5)
    assert result.cause == "caller_stop"
    assert result.steps == 5


def test_max_steps_zero_gives_empty_trace():
    result = run(sphere_objective(), SMALL,
                 TerminationRule(max_steps=0, target_tolerance=None), seed=24)
    assert result.records == []
    assert result.cause == "max_steps"
    assert result.evaluations == 0
