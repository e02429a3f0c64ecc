import itertools
import math

import numpy as np
import pytest

from linedisj.disjwalk import (
    BitOracle, DEFAULT_CONFIG, WalkState, amplify, checking_reflection, choose_t, coin_reflection,
    disjointness_delay_d, epsilon, epsilon_bruteforce, fixed_point_delta, grover_success,
    ideal_checking, mnrs_search, round_cost, runs_to_csv, search_plan, setup, small_error_search,
    spectral_gap, spectral_gap_closed, stage2_verify, stage_one_trace, stationary_projector,
    subset_exchange, update_step, walk_params,
)
from linedisj.querymodel import validate_delay_structure


def test_choose_t_cases():
    assert choose_t(65536, 8) == 8
    assert choose_t(256, 8) == 8
    assert choose_t(16, 16) == 16
    assert [choose_t(6, d) for d in (1, 2, 3, 6)] == [1, 2, 4, 6]
    with pytest.raises(ValueError):
        choose_t(4, 5)


def test_round_cost_examples():
    assert round_cost(16, 16, 16) == pytest.approx(3)
    n, t = 1024, 4
    assert round_cost(n, 64, t) == pytest.approx(1 + 2 * math.sqrt(n / t))
    # every max{1, .} term evaluates to 1 here
    assert round_cost(256, 8, 8) == pytest.approx(1 + 2 * math.sqrt(32))
    with pytest.raises(ValueError):
        round_cost(8, 2, 0)


def test_epsilon():
    assert epsilon(6, 2, {2}) == pytest.approx(1 / 3)
    assert epsilon(5, 2, range(5)) == 1
    assert epsilon(5, 5, {0}) == 1
    with pytest.raises(ValueError):
        epsilon(5, 2, set())
    for n in range(2, 9):
        for t in range(1, n + 1):
            for m in ({0}, {1, n - 1}, set(range(n // 2))):
                if m:
                    assert epsilon(n, t, m) == pytest.approx(epsilon_bruteforce(n, t, m), abs=1e-12)


def test_spectral_gap():
    assert spectral_gap(2, 1) == pytest.approx(2)
    assert spectral_gap(6, 2) == pytest.approx(0.75)
    assert spectral_gap(4, 2) == pytest.approx(1.0)
    for n in range(2, 9):
        for t in range(1, n):
            assert abs(spectral_gap(n, t) - spectral_gap_closed(n, t)) < 1e-9
    with pytest.raises(ValueError):
        spectral_gap(4, 4)


def test_setup_stores_true_bits():
    x = BitOracle("1")
    st = setup(x, 1, 1)
    assert st.amps.shape[0] == 1 and x.calls == 1
    x = BitOracle("01")
    st = setup(x, 2, 1)
    probs = st.probabilities()
    assert probs[(0,)] == pytest.approx(0.5) and probs[(1,)] == pytest.approx(0.5)
    for n in range(1, 7):
        for bits in itertools.product((0, 1), repeat=n):
            for t in {1, max(1, n // 2), n}:
                x = BitOracle(bits)
                st = setup(x, n, t)
                assert x.calls == t
                assert st.data_consistency_violation(bits) < 1e-12


def test_subset_exchange_is_an_involution():
    x = BitOracle("101101")
    st = setup(x, 6, 3)
    rng = np.random.default_rng(0)
    amps = st.amps * np.exp(1j * rng.uniform(0, 6.3, size=st.amps.shape))
    st = WalkState(6, 3, amps / np.linalg.norm(amps))
    twice = subset_exchange(subset_exchange(st, x), x)
    assert np.allclose(twice.amps, st.amps)
    assert x.calls == 3 + 4


def test_update_preserves_stored_bits():
    for n in range(2, 7):
        for bits in itertools.product((0, 1), repeat=n):
            x = BitOracle(bits)
            st = setup(x, n, max(1, n // 2))
            before = x.calls
            for _ in range(2):
                st = update_step(st, x)
            assert x.calls - before == 4
            assert st.data_consistency_violation(bits) < 1e-12
            assert st.norm() == pytest.approx(1)


def test_grover_four_items_one_iteration():
    for m in range(4):
        assert grover_success(4, [m], 1) == pytest.approx(1, abs=1e-12)


def test_small_error_search():
    assert small_error_search([0] * 7, 0.05).found_probability == 0
    for t in range(1, 17):
        for m in range(t):
            oracle = [int(i == m) for i in range(t)]
            res = small_error_search(oracle, 0.05)
            assert 1 - res.found_probability <= 0.05
    plan = search_plan(16, 0.05)
    assert plan.repetitions == math.ceil(math.log2(20) / 2)


def test_fixed_point_guarantee():
    w = 0.2
    for l in (1, 3, 6):
        bound = 1 - fixed_point_delta(2 * l + 1, w) ** 2
        for lam in np.linspace(w, 1, 17):
            assert amplify(lam, l, w) >= bound - 1e-12


def test_checking_without_candidates_is_identity():
    x, y = BitOracle("000000"), BitOracle("111111")
    st = setup(x, 6, 2)
    out = checking_reflection(st, y, 0.05)
    assert np.allclose(out.amps[..., 0], st.amps[..., 0])
    assert np.allclose(out.amps[..., 1:], 0)


def test_checking_single_candidate_is_exact():
    x, y = BitOracle("0110"), BitOracle("0100")
    st = setup(x, 4, 1)
    out = checking_reflection(st, y, 0.05)
    assert y.calls == 1
    assert np.allclose(out.amps[..., :1], ideal_checking(st, y.bits).amps)
    assert np.allclose(out.amps[..., 1:], 0)


def test_checking_flags_exactly_the_marked_subsets():
    # marked index 3 (1-based) is position 2 here
    x, y = BitOracle("001000"), BitOracle("001001")
    st = setup(x, 6, 2)
    out = checking_reflection(st, y, 0.01)
    ideal = ideal_checking(st, y.bits)
    assert np.abs(out.amps[..., :1] - ideal.amps).max() < 0.02 * np.abs(ideal.amps).max()
    flipped = {s for si, s in enumerate(st.subsets) if np.vdot(st.amps[si], ideal.amps[si]).real < 0}
    assert flipped == {s for s in st.subsets if 2 in s}


def test_stationary_projector_acts_as_pi_on_coin_uniform_states():
    n, t = 5, 2
    proj = stationary_projector(n, t)
    subs, coin = math.comb(n, t), t * (n - t)
    v = np.kron(np.random.default_rng(1).normal(size=subs), np.ones(coin) / math.sqrt(coin))
    pi = np.ones(subs * coin) / math.sqrt(subs * coin)
    assert np.allclose(proj @ v, pi * (pi @ v), atol=1e-12)


def test_mnrs_all_ones():
    for t in (1, 2, 3):
        res, _ = mnrs_search(5, t, BitOracle("11111"), BitOracle("11111"))
        assert res.success_probability > 0.99


def test_mnrs_unique_intersection_and_accounting():
    x, y = BitOracle("001000"), BitOracle("001000")
    res, acc = mnrs_search(6, 2, x, y)
    p = res.params
    assert res.success_probability >= 2 / 3
    assert acc.queries_x == p.t + p.iterations * p.walk_steps_per_iteration * 2 == x.calls
    assert acc.queries_y == p.iterations * p.checking_queries == y.calls


def test_stage2():
    y = BitOracle("0110")
    assert stage2_verify([1, 3], [1, 1], y, 2) == (1, 1)
    assert stage2_verify([0, 3], [1, 1], y, 1) == (None, 2)
    assert y.calls == 4


def test_disjointness_is_one_sided():
    res = disjointness_delay_d(6, 2, BitOracle("101010"), BitOracle("010101"))
    assert not res.intersecting and res.p_report_intersecting == 0 and res.success_probability == 1


def test_disjointness_accounting_matches_trace():
    for d in (1, 2, 3, 6):
        res = disjointness_delay_d(6, d, BitOracle("110011"), BitOracle("010010"))
        ok, dec = validate_delay_structure(list(res.trace), d)
        assert ok and dec.r == res.account.rounds
        p = res.params
        assert res.account.queries_x == p.t + p.iterations * p.walk_steps_per_iteration * 2
        assert res.account.queries_y == p.iterations * p.checking_queries + p.t
        assert res.account.rounds <= DEFAULT_CONFIG.round_factor * round_cost(6, d, res.t)
        assert res.success_probability >= 2 / 3
    full = disjointness_delay_d(6, 6, BitOracle("110011"), BitOracle("010010"))
    assert full.account.rounds == 2
    assert runs_to_csv([full]).splitlines()[0].startswith("n,d,t,eps,delta")


def test_trace_shape():
    p = walk_params(6, 2)
    trace = stage_one_trace(p)
    assert trace[:2] == ["x", "x"] and trace.count("y") == p.iterations * p.checking_queries
