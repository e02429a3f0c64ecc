import math

import pytest

from linedisj.bounds import (
    bounds_report, cube_dominates, cube_threshold, emit_sweep, grid_points, lb_line_rounds, lb_query,
    lg, log_spaced, optimize_t_bruteforce, parse_grid, third_case, ub_branches, ub_rounds,
)
from linedisj.disjwalk import choose_t, choose_t_case, round_cost


def test_lb_line_examples():
    assert lb_line_rounds(10**6, 100, 20)[1] == pytest.approx(793.7, abs=0.05)
    assert lb_line_rounds(400, 1, 1)[0] == 20
    assert all(v > 0 for v in lb_line_rounds(16, 16, 1))
    assert all(math.isfinite(v) for v in lb_line_rounds(2, 2, 1))


def test_lb_query_examples():
    ra, rb, qa, qb = lb_query(4096, 8)
    assert rb == pytest.approx(3.494, abs=1e-3)
    assert lb_query(256, 1)[0] == 16
    with pytest.raises(ValueError):
        lb_query(4, 5)


def test_lb_query_crossover():
    for k in range(4, 15):
        n = 2**k
        for d in range(1, n + 1):
            ra, rb, _, _ = lb_query(n, d)
            assert (ra >= rb) == (d**4 <= n * lg(n) ** 2)


def test_ub_rounds_examples():
    r, q, br = ub_rounds(16, 16)
    assert br == 2 and r == pytest.approx(1) and q == pytest.approx(16)
    r, q, br = ub_rounds(65536, 4)
    assert br == 1 and r == pytest.approx(256)


def test_ub_branches_meet_at_threshold():
    for k in range(4, 30):
        n = 2**k
        d = (n * lg(n) ** 3) ** 0.25
        a, b = ub_branches(n, d)
        assert a == pytest.approx(b, rel=1e-9)


def test_ub_branch_matches_choose_t():
    for k in range(4, 15):
        n = 2**k
        for d in log_spaced(n):
            assert (ub_rounds(n, d)[2] == 2) == (choose_t_case(n, d) == 3)


def test_bruteforce():
    assert optimize_t_bruteforce(16, 16)[1] == pytest.approx(3)
    for n in (16, 64, 256):
        t_star, cost = optimize_t_bruteforce(n, 1)
        assert round_cost(n, 1, 1) <= 4 * cost
        assert cost == pytest.approx(min(round_cost(n, 1, t) for t in range(1, n + 1)))


def test_factor_four_small_grid():
    for k in range(4, 10):
        n = 2**k
        for d in range(1, n + 1):
            assert round_cost(n, d, choose_t(n, d)) <= 4 * optimize_t_bruteforce(n, d)[1]


def test_cube_threshold_b_one():
    for k in range(4, 15):
        n = 2**k
        for d in range(1, n + 1):
            assert cube_dominates(n, d, 1) == (d >= n ** 0.25)


def test_cube_threshold_general_b():
    for n in (256, 4096):
        for b in (1, 2, 4):
            for d in range(1, n // b + 1):
                assert cube_dominates(n, d, b) == (d >= cube_threshold(n, b) - 1e-12)


def test_report_invariants():
    rep = bounds_report(256, 8, 1)
    assert rep.eq3_at_bruteforce <= rep.eq3_at_chosen
    assert rep.chosen_t == choose_t(256, 8)


def test_parse_grid():
    g = parse_grid("n=16,64 d=1:8 b=1")
    assert g == {"n": [16, 64], "d": [1, 2, 4, 8], "b": [1]}
    assert grid_points(parse_grid("n=4 d=2,8")) == [(4, 2, 1)]
    for bad in ("n=16", "x=1 n=2 d=1", "n=a d=1", "n=16 d=0", "n=16 n=4 d=1"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_emit_sweep():
    one = emit_sweep([(16, 2, 1)]).splitlines()
    assert len(one) == 2 and "lb_line_cube_shape" in one[0]
    pts = grid_points(parse_grid("n=1024:524288 d=1:512 b=1"))
    assert len(pts) == 100
    text = emit_sweep(pts)
    assert len(text.splitlines()) == 101 and text == emit_sweep(pts)
    with pytest.raises(ValueError):
        emit_sweep([])
