import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from tkey import chain
from tkey.chain import ChainValue, HashCounter, Params
from tkey.checkpoints import make_plan, max_gap
from tkey.errors import ClockRegression, Expired, MalformedState, NotYetValid, UnsupportedVersion
from tkey.prover import (
    PlanConfig, deserialize, gen_password, init, reposition, reposition_in_background, serialize,
)

import oracles


def fresh(k=512, now=1000, seed=1, **cfg):
    cfg.setdefault("mean_gap", 40.0)
    return init(Params(k=k), random.Random(seed), now, PlanConfig(**cfg))


def head_walk(state, t):
    return chain.walk(state.params, state.salt, state.head, t, t_init=state.t_init)


def test_init_hash_count_and_enrollment():
    ctr = HashCounter()
    state, enr = init(Params(k=700), random.Random(3), 50, PlanConfig(mean_gap=60.0), counter=ctr)
    assert ctr.count == 700
    assert enr.p_init == chain.chain_tail(state.params, state.salt, state.sk, 50)
    assert enr.t_init == 50 and enr.k == 700 and state.t_max == 750
    assert enr.salt == state.salt
    assert 0 < len(state.checkpoints) <= 20


def test_init_toy_matches_literal_family():
    state, enr = init(Params(k=4), random.Random(9), 0, PlanConfig(q_total=1, q_worst=0))
    expected = oracles.literal_p_init(state.sk, t_init=0, k=4, salt=state.salt)
    assert enr.p_init.value == expected


def test_checkpoints_from_single_pass_match_head_walks():
    state, _ = fresh(k=2000)
    for cp in state.checkpoints:
        assert cp == head_walk(state, cp.at)


def test_gen_at_t_max_is_secret_key():
    state, _ = fresh()
    ctr = HashCounter()
    assert gen_password(state, state.t_max, counter=ctr) == ChainValue(state.sk, state.t_max)
    assert ctr.count == 0


def test_gen_at_checkpoint_costs_nothing():
    state, _ = fresh()
    cp = state.checkpoints[0]
    ctr = HashCounter()
    assert gen_password(state, cp.at, counter=ctr) == cp
    assert ctr.count == 0


def test_gen_bounds():
    state, _ = fresh()
    with pytest.raises(Expired):
        gen_password(state, state.t_max + 1)
    with pytest.raises(NotYetValid):
        gen_password(state, state.t_init)


def test_refuses_non_increasing_slots():
    state, _ = fresh()
    gen_password(state, state.t_init + 10)
    with pytest.raises(ClockRegression):
        gen_password(state, state.t_init + 10)
    with pytest.raises(ClockRegression):
        gen_password(state, state.t_init + 3)


def test_naive_worst_case_hashes_equal_gap_minus_one():
    state, _ = fresh(k=4000, scheme="naive", q_total=20, q_worst=20)
    plan = make_plan("naive", 4000, 20, state.model())
    worst = 0
    for t in range(state.t_init + 1, state.t_max + 1):
        ctr = HashCounter()
        cover = state.cover(t)
        chain.walk(state.params, state.salt, cover, t, t_init=state.t_init, counter=ctr)
        assert ctr.count == cover.at - t
        worst = max(worst, ctr.count)
    assert worst == max_gap(plan) - 1


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2 ** 12), st.sampled_from(["naive", "recursive", "expectation_optimal", "mixed"]),
       st.integers(0, 8), st.integers(0, 2 ** 16))
def test_generation_correct_for_any_configuration(k, scheme, q, seed):
    state, _ = init(Params(k=k), random.Random(seed), 100,
                    PlanConfig(scheme=scheme, q_total=q, q_worst=min(q, 2), mean_gap=max(1.0, k / 10)))
    rng = random.Random(seed)
    t = state.t_init
    while True:
        t += rng.randint(1, max(1, k // 4))
        if t > state.t_max:
            break
        ctr = HashCounter()
        assert gen_password(state, t, counter=ctr) == head_walk(state, t)
        assert ctr.count == state.cover(t).at - t if t != state.t_max else ctr.count == 0
        reposition(state, t)
        for cp in state.checkpoints:
            assert t <= cp.at < state.t_max


def test_reposition_fixed_point_and_cost_bound():
    state, _ = fresh(k=3000)
    gen_password(state, state.t_init + 200)
    ctr = HashCounter()
    reposition(state, state.t_init + 200, counter=ctr)
    assert ctr.count <= state.params.k
    first = state.checkpoints
    ctr2 = HashCounter()
    reposition(state, state.t_init + 200, counter=ctr2)
    assert state.checkpoints == first
    assert ctr2.count == 0


def test_reposition_preserves_values():
    state, _ = fresh(k=3000)
    now = state.t_init + 123
    gen_password(state, now)
    reposition(state, now)
    for t in range(now + 1, state.t_max + 1, 37):
        assert state.cover(t) == head_walk(state, state.cover(t).at)
    assert gen_password(state, now + 500) == head_walk(state, now + 500)


def test_background_reposition_keeps_serving():
    state, _ = fresh(k=20000)
    old = state.checkpoints
    now = state.t_init + 5
    gen_password(state, now)
    worker = reposition_in_background(state, now)
    # readers see either the old or the new set, never a partial one
    seen = state.checkpoints
    assert seen is old or len(seen) > 0
    worker.join()
    assert gen_password(state, now + 9000) == head_walk(state, now + 9000)


def test_concurrent_generation_is_serialised():
    state, _ = fresh(k=5000)
    slots = list(range(state.t_init + 1, state.t_init + 200))
    errors, ok = [], []

    def worker(t):
        try:
            ok.append(gen_password(state, t))
        except ClockRegression:
            errors.append(t)

    threads = [threading.Thread(target=worker, args=(t,)) for t in slots]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(ok) + len(errors) == len(slots)
    assert state.last_emitted == max(cv.at for cv in ok)


def test_adaptive_rate_tracks_gaps():
    state, _ = fresh(k=5000, adaptive=True, mean_gap=100.0)
    gen_password(state, state.t_init + 600)
    assert state.mean_gap == pytest.approx(0.8 * 100 + 0.2 * 600)


# serialization

def test_round_trip():
    state, _ = fresh(k=1500, seed=44)
    gen_password(state, state.t_init + 77)
    reposition(state, state.t_init + 77)
    back = deserialize(serialize(state))
    assert back == state
    assert gen_password(back, state.t_init + 900) == head_walk(state, state.t_init + 900)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 20), st.integers(1, 600), st.sampled_from(["naive", "mixed"]))
def test_round_trip_random_states(seed, k, scheme):
    state, _ = init(Params(k=k), random.Random(seed), seed, PlanConfig(scheme=scheme, q_total=6, q_worst=2, mean_gap=30.0))
    assert deserialize(serialize(state)) == state


def test_truncated_state_rejected():
    blob = serialize(fresh()[0])
    for cut in (0, 3, 6, len(blob) // 2, len(blob) - 1):
        with pytest.raises(MalformedState):
            deserialize(blob[:cut])


def test_version_bump_rejected():
    blob = bytearray(serialize(fresh()[0]))
    blob[5] += 1
    with pytest.raises(UnsupportedVersion):
        deserialize(bytes(blob))


def test_tampered_checkpoints_rejected():
    import json

    blob = serialize(fresh()[0])
    body = json.loads(blob[6:])
    body["checkpoints"] = list(reversed(body["checkpoints"]))
    with pytest.raises(MalformedState):
        deserialize(blob[:6] + json.dumps(body).encode())
