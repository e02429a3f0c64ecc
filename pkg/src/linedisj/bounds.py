"""Closed-form round and query bounds, t-optimization and sweep tables.

Asymptotic expressions are evaluated with constant 1. They are shape
functions: they order and cross over correctly but are not absolute counts,
and the CSV headers carry a ``_shape`` suffix to say so. Logs are base 2 with
arguments clamped below at 2.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable

import numpy as np

from .disjwalk import choose_t, round_cost


def lg(v: float) -> float:
    return math.log2(max(v, 2.0))


def _check(n: int, d: int, b: int = 1) -> None:
    if n < 1 or d < 1 or b < 1:
        raise ValueError("n, d and b must be positive")
    if d > n:
        raise ValueError(f"d={d} exceeds n={n}")


def lb_line_rounds(n: int, d: int, b: int) -> tuple[float, float, float, float]:
    """(simple, cube, log_exact_1, log_exact_2) lower-bound shapes for the d-line."""
    if n < 1 or d < 1 or b < 1:
        raise ValueError("n, d and b must be positive")
    simple = max(math.sqrt(n) / b, d)
    cube = (n * d * d / b) ** (1 / 3)
    log1 = math.sqrt(n * d) / (math.sqrt(lg(n)) * lg(n / (d * lg(n))) ** 4)
    llg = lg(lg(n))
    log2 = (n * d) ** (1 / 3) / (llg ** (1 / 3) * lg(n / (d * d * llg)) ** (8 / 3))
    return simple, cube, log1, log2


def cube_dominates(n: int, d: int, b: int) -> bool:
    simple, cube, _, _ = lb_line_rounds(n, d, b)
    return cube >= simple * (1 - 1e-12)


def cube_threshold(n: int, b: int) -> float:
    """Smallest real d with cube >= sqrt(n)/b; cube >= d holds for d <= n/b."""
    return n ** 0.25 / b


def lb_query(n: int, d: int) -> tuple[float, float, float, float]:
    """(rounds_a, rounds_b, queries_a, queries_b) for the delay-d two-oracle model."""
    _check(n, d)
    return (math.sqrt(n) / d, (n / (d * lg(n))) ** (1 / 3), math.sqrt(n), (n * d * d / lg(n)) ** (1 / 3))


def third_case(n: int, d: int) -> bool:
    return d ** 4 >= n * lg(n) ** 3


def ub_rounds(n: int, d: int) -> tuple[float, float, int]:
    """(rounds, queries, branch) of the walk-based upper bound; branch 2 iff d^4 >= n log^3 n."""
    _check(n, d)
    if third_case(n, d):
        return (n / d) ** (1 / 3), (n * d * d) ** (1 / 3), 2
    return math.sqrt(n * lg(n)) / d, math.sqrt(n * lg(n)), 1


def ub_branches(n: int, d: int) -> tuple[float, float]:
    return math.sqrt(n * lg(n)) / d, (n / d) ** (1 / 3)


def round_cost_all(n: int, d: int) -> np.ndarray:
    """round_cost(n, d, t) for t = 1..n, vectorized."""
    t = np.arange(1, n + 1, dtype=float)
    log_n = math.log2(n) if n > 1 else 0.0
    return (np.maximum(1, t / d)
            + np.sqrt(n / t) * (np.maximum(1, np.sqrt(t * log_n) / d) + np.maximum(1, np.sqrt(t) / d)))


def optimize_t_bruteforce(n: int, d: int) -> tuple[int, float]:
    _check(n, d)
    costs = round_cost_all(n, d)
    i = int(np.argmin(costs))
    return i + 1, float(costs[i])


def chosen_t_within(n: int, d: int, factor: float = 4.0) -> bool:
    _, best = optimize_t_bruteforce(n, d)
    return round_cost(n, d, choose_t(n, d)) <= factor * best


@dataclass(frozen=True)
class BoundsReport:
    n: int
    d: int
    b: int
    lb_line_simple_shape: float
    lb_line_cube_shape: float
    lb_line_log1_shape: float
    lb_line_log2_shape: float
    lb_query_rounds_a_shape: float
    lb_query_rounds_b_shape: float
    lb_query_queries_a_shape: float
    lb_query_queries_b_shape: float
    ub_rounds_shape: float
    ub_queries_shape: float
    ub_branch: int
    chosen_t: int
    bruteforce_t: int
    eq3_at_chosen: float
    eq3_at_bruteforce: float


def bounds_report(n: int, d: int, b: int) -> BoundsReport:
    _check(n, d, b)
    t_star, cost_star = optimize_t_bruteforce(n, d)
    t = choose_t(n, d)
    return BoundsReport(n, d, b, *lb_line_rounds(n, d, b), *lb_query(n, d), *ub_rounds(n, d),
                        t, t_star, round_cost(n, d, t), cost_star)


def parse_grid(text: str) -> dict[str, list[int]]:
    """``n=16,64 d=1,2,4 b=1``; a list item ``a:b`` expands to powers of 2 from a to b."""
    out: dict[str, list[int]] = {}
    for tok in text.split():
        key, sep, vals = tok.partition("=")
        if not sep or key not in ("n", "d", "b") or key in out:
            raise ValueError(f"malformed grid token {tok!r}")
        items: list[int] = []
        for v in vals.split(","):
            if ":" in v:
                lo, hi = (int(u) for u in v.split(":"))
                if lo < 1 or hi < lo:
                    raise ValueError(f"bad range {v!r}")
                k = lo
                while k <= hi:
                    items.append(k)
                    k *= 2
            else:
                items.append(int(v))
        if not items or min(items) < 1:
            raise ValueError(f"grid values for {key} must be positive integers")
        out[key] = items
    if "n" not in out or "d" not in out:
        raise ValueError("grid needs n=... and d=...")
    out.setdefault("b", [1])
    return out


def grid_points(grid: dict[str, list[int]]) -> list[tuple[int, int, int]]:
    """(n, d, b) in grid order, skipping d > n."""
    return [(n, d, b) for n in grid["n"] for d in grid["d"] for b in grid["b"] if d <= n]


def log_spaced(n: int, count: int = 20) -> list[int]:
    """count log-spaced integer delays in [1, n], deduplicated, ascending."""
    return sorted({int(round(v)) for v in np.geomspace(1, n, count)})


def _fmt(v) -> str:
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def emit_sweep(points: Iterable[tuple[int, int, int]]) -> str:
    pts = list(points)
    if not pts:
        raise ValueError("empty grid")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(BoundsReport)])
    for n, d, b in pts:
        w.writerow([_fmt(v) for v in astuple(bounds_report(n, d, b))])
    return buf.getvalue()
