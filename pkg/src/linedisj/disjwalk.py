"""Delay-d Set Disjointness by a Johnson-graph quantum walk plus classical verification.

Stage 1 is an MNRS-style search on J(n, t): set up a uniform superposition of
t-subsets I together with the stored bits x|_I, then alternate a Checking
step (is there i in I with x_i = y_i = 1?) with a reflection about the
walk's stationary state. Stage 2 measures I and x|_I and queries y on I.

Simulation notes:

* The outer loop is fixed-point amplitude amplification with phases
  (alpha_j, beta_j), so it succeeds for every hitting probability at or above
  the design value t/n, not only for a single mark.
* Checking is a small-error unordered search over the t elements of I, run
  as independent fixed-point repetitions in an ancilla register that is
  reused across iterations, never reset.
* The reflection about the stationary state is the exact projector onto the
  eigenvalue-1 space of the walk unitary W = Shift * Ref_coin, found by
  diagonalization. Its query cost is charged as ceil(c_delta/sqrt(delta))
  Update steps of 2 queries each.
* For basis inputs the stored data register is a function of I, so the
  MNRS engine works on (I, coin) x ancilla. :class:`WalkState` keeps the data
  register explicitly and is used to check the Set-up and Update steps.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .qcore import SimulationCapError
from .querymodel import QueryAccount, account_for, validate_delay_structure

MAX_ENGINE_ENTRIES = 1 << 24
# dense (subset, coin) dimension handed to the stationary-projector SVD
MAX_WALK_DIM = 8192


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class WalkConfig:
    c_eps: float = 3.0
    c_delta: float = 3.0
    c: float = 0.1
    # max measured rounds / round_cost over 2 <= n <= 12 is 17.02, at n=6, d=2
    round_factor: float = 18.0

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "WalkConfig":
        known = {f: float(values[f]) for f in ("c_eps", "c_delta", "c", "round_factor") if f in values}
        return cls(**known)


DEFAULT_CONFIG = WalkConfig()


class BitOracle:
    """Classical bit string behind a quantum oracle; counts oracle applications."""

    def __init__(self, bits: str | Sequence[int]):
        self.bits = tuple(int(b) for b in bits)
        self.calls = 0

    @property
    def n(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    def call(self, k: int = 1) -> None:
        self.calls += k


# ---------------------------------------------------------------- parameters

def _check_nd(n: int, d: int) -> None:
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if d > n:
        raise ValueError(f"d={d} exceeds n={n}")


def choose_t_case(n: int, d: int) -> int:
    """1: d <= log n, 3: d^4 >= n log^3 n, 2: otherwise."""
    _check_nd(n, d)
    lg = math.log2(n) if n > 1 else 1.0
    if d <= lg:
        return 1
    return 3 if d ** 4 >= n * lg ** 3 else 2


def choose_t(n: int, d: int) -> int:
    case = choose_t_case(n, d)
    lg = math.log2(n) if n > 1 else 1.0
    if case == 1:
        t = d
    elif case == 3:
        t = math.ceil((n * d * d) ** (1 / 3) - 1e-9)
    else:
        t = math.ceil(d * d / lg - 1e-9)
    return min(max(t, 1), n)


def round_cost(n: int, d: int, t: int) -> float:
    if not 1 <= t <= n:
        raise ValueError(f"t={t} outside [1, {n}]")
    lg = math.log2(n) if n > 1 else 0.0
    return (max(1.0, t / d)
            + math.sqrt(n / t) * (max(1.0, math.sqrt(t * lg) / d) + max(1.0, math.sqrt(t) / d)))


def epsilon(n: int, t: int, marked: Iterable[int]) -> float:
    m = len(set(marked))
    if m == 0:
        raise ValueError("hitting probability is undefined without a marked index")
    return 1.0 - math.comb(n - m, t) / math.comb(n, t)


def epsilon_bruteforce(n: int, t: int, marked: Iterable[int]) -> float:
    ms = set(marked)
    subsets = list(combinations(range(n), t))
    return sum(bool(ms & set(s)) for s in subsets) / len(subsets)


def spectral_gap_closed(n: int, t: int) -> float:
    if not 1 <= t <= n - 1:
        raise ValueError(f"t={t} outside [1, {n - 1}]")
    return n / (t * (n - t))


def johnson_walk_matrix(n: int, t: int) -> np.ndarray:
    subsets = list(combinations(range(n), t))
    index = {s: i for i, s in enumerate(subsets)}
    p = np.zeros((len(subsets), len(subsets)))
    w = 1.0 / (t * (n - t))
    for s in subsets:
        rest = [k for k in range(n) if k not in s]
        for j in s:
            for k in rest:
                p[index[s], index[tuple(sorted(set(s) - {j} | {k}))]] += w
    return p


def spectral_gap(n: int, t: int, max_dim: int = 3000) -> float:
    """1 minus the second-largest eigenvalue of the J(n,t) random walk."""
    closed = spectral_gap_closed(n, t)
    if math.comb(n, t) > max_dim:
        return closed
    ev = np.sort(np.linalg.eigvalsh(johnson_walk_matrix(n, t)))[::-1]
    gap = 1.0 - ev[1]
    if abs(gap - closed) > 1e-9:
        raise ArithmeticError(f"diagonalized gap {gap} disagrees with closed form {closed}")
    return float(gap)


# ---------------------------------------------------------------- fixed-point amplification

def fixed_point_delta(L: int, w: float) -> float:
    """Worst-case miss amplitude of the length-L fixed-point sequence when lambda >= w."""
    if w >= 1:
        return 0.0
    return 1.0 / math.cosh(L * math.acosh(1.0 / math.sqrt(1.0 - w)))


def fixed_point_phases(l: int, w: float) -> tuple[np.ndarray, np.ndarray]:
    """(alpha_j, beta_j) for j = 1..l, with L = 2l+1 and success >= 1 - delta^2 for lambda >= w."""
    L = 2 * l + 1
    s = math.sqrt(w)
    alphas = np.array([2.0 * math.atan2(1.0, math.tan(2.0 * math.pi * j / L) * s) for j in range(1, l + 1)])
    return alphas, -alphas[::-1]


def fixed_point_iterations(w: float, delta: float) -> int:
    """Smallest l whose length-(2l+1) sequence has miss amplitude <= delta at lambda = w."""
    if w >= 1:
        return 0
    l = 0
    while fixed_point_delta(2 * l + 1, w) > delta:
        l += 1
    return l


def amplify(lam: float, l: int, w: float) -> float:
    """Success probability of the fixed-point sequence on a two-level system with initial weight lam."""
    a, b = fixed_point_phases(l, w)
    s = np.array([math.sqrt(1 - lam), math.sqrt(lam)], dtype=complex)
    psi = s.copy()
    pm = np.diag([0, 1]).astype(complex)
    for al, be in zip(a, b):
        st = np.eye(2) - (1 - np.exp(1j * be)) * pm
        ss = np.eye(2) - (1 - np.exp(-1j * al)) * np.outer(s, s.conj())
        psi = -ss @ (st @ psi)
    return float(abs(psi[1]) ** 2)


def grover_success(N: int, marked: Iterable[int], iterations: int) -> float:
    """Plain Grover on N items with a -1 phase oracle, simulated on the N-dimensional state."""
    mark = np.zeros(N, dtype=bool)
    mark[list(marked)] = True
    s = np.full(N, 1 / math.sqrt(N), dtype=complex)
    psi = s.copy()
    for _ in range(iterations):
        psi = np.where(mark, -psi, psi)
        psi = 2 * s * np.vdot(s, psi) - psi
    return float(np.sum(np.abs(psi[mark]) ** 2))


# ---------------------------------------------------------------- small-error search

@dataclass(frozen=True)
class SearchPlan:
    t: int
    error_target: float
    repetitions: int
    iterations: int

    @property
    def queries(self) -> int:
        """y-queries for one search: 2 per phase-oracle call, 1 for the final flag, per repetition."""
        return self.repetitions * (2 * self.iterations + 1)

    @property
    def anc_dim(self) -> int:
        return (2 * self.t) ** self.repetitions


def search_plan(t: int, error_target: float) -> SearchPlan:
    if not 0 < error_target < 0.5:
        raise ValueError("error target must lie in (0, 1/2)")
    if t == 1:
        return SearchPlan(1, error_target, 1, 0)
    reps = math.ceil(math.log2(1 / error_target) / 2)
    return SearchPlan(t, error_target, reps, fixed_point_iterations(1 / t, 0.5))


def _uniform_prep(t: int) -> np.ndarray:
    k = np.arange(t)
    return np.exp(2j * np.pi * np.outer(k, k) / t) / math.sqrt(t)


def repetition_unitary(t: int, marked: frozenset[int], iterations: int) -> np.ndarray:
    """One fixed-point search on (index in [t]) x (flag qubit); flag ends as 'index is marked'."""
    prep = _uniform_prep(t)
    s = prep[:, 0]
    mark = np.array([p in marked for p in range(t)])
    u = prep.copy()
    a, b = fixed_point_phases(iterations, 1 / t)
    for al, be in zip(a, b):
        st = np.where(mark, np.exp(1j * be), 1.0)
        ss = np.eye(t) - (1 - np.exp(-1j * al)) * np.outer(s, s.conj())
        u = -ss @ (st[:, None] * u)
    full = np.kron(u, np.eye(2))
    flip = np.eye(2 * t, dtype=complex)
    for p in marked:
        flip[2 * p:2 * p + 2, 2 * p:2 * p + 2] = [[0, 1], [1, 0]]
    return flip @ full


def repetition_miss(t: int, marked: frozenset[int], iterations: int) -> float:
    col = repetition_unitary(t, marked, iterations)[:, 0]
    return float(np.sum(np.abs(col[0::2]) ** 2))


@dataclass(frozen=True)
class SearchResult:
    found_probability: float
    queries: int
    plan: SearchPlan


def small_error_search(oracle: Sequence[int], error_target: float) -> SearchResult:
    """Decide whether any entry of ``oracle`` (0/1 over a domain of size t) is 1."""
    t = len(oracle)
    plan = search_plan(t, error_target)
    marked = frozenset(p for p, v in enumerate(oracle) if v)
    if not marked:
        return SearchResult(0.0, plan.queries, plan)
    miss = repetition_miss(t, marked, plan.iterations)
    return SearchResult(1.0 - miss ** plan.repetitions, plan.queries, plan)


@lru_cache(maxsize=4096)
def checking_unitary(t: int, marked: frozenset[int], plan: SearchPlan, beta: float) -> np.ndarray:
    """A^dagger Phi_beta A on the search ancilla: phase e^{i beta} when any repetition flags."""
    rep = repetition_unitary(t, marked, plan.iterations)
    a = np.array([[1.0 + 0j]])
    for _ in range(plan.repetitions):
        a = np.kron(a, rep)
    flags = np.zeros(1, dtype=bool)
    for _ in range(plan.repetitions):
        flags = (flags[:, None] | (np.arange(2 * t) % 2 == 1)[None, :]).reshape(-1)
    phase = np.where(flags, np.exp(1j * beta), 1.0)
    return a.conj().T @ (phase[:, None] * a)


def checking_queries(plan: SearchPlan, beta_is_pi: bool = False) -> int:
    """y-queries per Checking call; a t=1 sign flip needs a single kickback query."""
    if plan.t == 1 and beta_is_pi:
        return 1
    return 2 * plan.queries


# ---------------------------------------------------------------- explicit walk states

@dataclass
class WalkState:
    """Amplitudes over (I, stored bits, j-position in I, k-position outside I) and a search ancilla.

    ``data`` holds an n-bit integer per basis element, bit (n-1-i) storing x_i
    for i in I and 0 elsewhere. For t = n the coin axes have size 1.
    """
    n: int
    t: int
    amps: np.ndarray  # shape (num_subsets, 2**n, t or 1, n-t or 1, anc)

    @property
    def subsets(self) -> list[tuple[int, ...]]:
        return _subsets(self.n, self.t)

    def probabilities(self) -> dict[tuple[int, ...], float]:
        p = np.sum(np.abs(self.amps) ** 2, axis=(1, 2, 3, 4))
        return {s: float(v) for s, v in zip(self.subsets, p)}

    def data_consistency_violation(self, x: Sequence[int]) -> float:
        """Probability of a stored-bits value that differs from x restricted to I."""
        bad = 0.0
        for si, s in enumerate(self.subsets):
            good = _restrict(x, s, self.n)
            w = np.abs(self.amps[si]) ** 2
            bad += float(w.sum() - w[good].sum())
        return bad

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@lru_cache(maxsize=None)
def _subsets(n: int, t: int) -> list[tuple[int, ...]]:
    return list(combinations(range(n), t))


def _restrict(x: Sequence[int], subset: Iterable[int], n: int) -> int:
    v = 0
    for i in subset:
        if x[i]:
            v |= 1 << (n - 1 - i)
    return v


def _coin_dims(n: int, t: int) -> tuple[int, int]:
    return (t, n - t) if 0 < t < n else (1, 1)


def setup(x: BitOracle, n: int, t: int) -> WalkState:
    """Uniform superposition over t-subsets with bits loaded by t oracle calls, uniform coin."""
    if not 1 <= t <= n:
        raise ValueError(f"t={t} outside [1, {n}]")
    subs = _subsets(n, t)
    cj, ck = _coin_dims(n, t)
    amps = np.zeros((len(subs), 1 << n, cj, ck, 1), dtype=complex)
    data = np.zeros(len(subs), dtype=np.int64)
    for pos in range(t):
        # one oracle application loads the pos-th element of every I in superposition
        for si, s in enumerate(subs):
            if x[s[pos]]:
                data[si] |= 1 << (n - 1 - s[pos])
        x.call()
    amp = 1 / math.sqrt(len(subs) * cj * ck)
    for si in range(len(subs)):
        amps[si, data[si]] = amp
    return WalkState(n, t, amps)


@lru_cache(maxsize=None)
def _shift_table(n: int, t: int) -> list[tuple[int, int, int, int, int, int]]:
    """(I, j, k) -> (I', k', j') with I' = I - I[j] + comp[k] and the coin swapped."""
    subs = _subsets(n, t)
    index = {s: i for i, s in enumerate(subs)}
    out = []
    for si, s in enumerate(subs):
        comp = [v for v in range(n) if v not in s]
        for jp, j in enumerate(s):
            for kp, k in enumerate(comp):
                ns = tuple(sorted(set(s) - {j} | {k}))
                ncomp = [v for v in range(n) if v not in ns]
                out.append((si, jp, kp, index[ns], ns.index(k), ncomp.index(j)))
    return out


def coin_reflection(state: WalkState) -> WalkState:
    """2|u><u| - 1 on the (j, k) coin, u uniform over t(n-t) positions."""
    a = state.amps
    cj, ck = a.shape[2], a.shape[3]
    mean = a.sum(axis=(2, 3), keepdims=True) / (cj * ck)
    return WalkState(state.n, state.t, 2 * mean - a)


def subset_exchange(state: WalkState, x: BitOracle) -> WalkState:
    """|I, x_I, j, k> -> |I - j + k, x_{I - j + k}, k, j>; 2 oracle calls (erase x_j, load x_k)."""
    n, t = state.n, state.t
    if not 0 < t < n:
        return state
    a = state.amps
    out = np.zeros_like(a)
    subs = _subsets(n, t)
    dat = np.arange(1 << n)
    for si, jp, kp, ni, nk, nj in _shift_table(n, t):
        j, k = subs[si][jp], subs[ni][nk]
        moved = dat ^ (x[j] << (n - 1 - j)) ^ (x[k] << (n - 1 - k))
        out[ni, moved, nk, nj, :] += a[si, :, jp, kp, :]
    x.call(2)
    return WalkState(n, t, out)


def update_step(state: WalkState, x: BitOracle) -> WalkState:
    """One step of the walk unitary: coin reflection, then the subset exchange."""
    return subset_exchange(coin_reflection(state), x)


def _marked_positions(subset: Sequence[int], data: int, y: Sequence[int], n: int) -> frozenset[int]:
    return frozenset(p for p, i in enumerate(subset) if (data >> (n - 1 - i)) & 1 and y[i])


def checking_reflection(state: WalkState, y: BitOracle, error_target: float,
                        beta: float = math.pi) -> WalkState:
    """Phase e^{i beta} on components whose I holds i with stored x_i = 1 and y_i = 1.

    Realized as A^dagger Phi A with the small-error search; the ancilla is
    attached on first use. For t = 1 and beta = pi the flip is exact.
    """
    n, t = state.n, state.t
    plan = search_plan(t, error_target)
    a = state.amps
    if a.size // a.shape[4] * plan.anc_dim > MAX_ENGINE_ENTRIES:
        raise SimulationCapError(f"checking needs {a.size // a.shape[4] * plan.anc_dim} amplitudes")
    if a.shape[4] == 1 and plan.anc_dim > 1:
        a = np.concatenate([a, np.zeros(a.shape[:4] + (plan.anc_dim - 1,), dtype=complex)], axis=4)
    a = a.copy()
    for si, s in enumerate(state.subsets):
        for data in np.nonzero(np.abs(a[si]).sum(axis=(1, 2, 3)) > 0)[0]:
            marked = _marked_positions(s, int(data), y, n)
            if not marked:
                continue
            u = checking_unitary(t, marked, plan, float(beta))
            a[si, data] = a[si, data] @ u.T
    y.call(checking_queries(plan, beta_is_pi=math.isclose(beta, math.pi)))
    return WalkState(n, t, a)


def ideal_checking(state: WalkState, y: Sequence[int]) -> WalkState:
    """Reference: exact -1 on marked components, no ancilla involved."""
    a = state.amps.copy()
    for si, s in enumerate(state.subsets):
        for data in range(a.shape[1]):
            if _marked_positions(s, data, y, state.n):
                a[si, data] *= -1
    return WalkState(state.n, state.t, a)


# ---------------------------------------------------------------- MNRS engine

@dataclass(frozen=True)
class WalkParams:
    n: int
    t: int
    eps: float
    delta: float
    iterations: int
    walk_steps_per_iteration: int
    checking_error_target: float
    search: SearchPlan

    @property
    def checking_queries(self) -> int:
        return checking_queries(self.search)


def walk_params(n: int, t: int, config: WalkConfig = DEFAULT_CONFIG) -> WalkParams:
    if not 1 <= t <= n:
        raise ValueError(f"t={t} outside [1, {n}]")
    eps = t / n
    if t == n:
        delta, it, ws = 1.0, 0, 0
    else:
        delta = spectral_gap(n, t)
        it = math.ceil(config.c_eps / math.sqrt(eps))
        ws = math.ceil(config.c_delta / math.sqrt(delta))
    target = min(config.c * math.sqrt(t / n), 0.49)
    return WalkParams(n, t, eps, delta, it, ws, target, search_plan(t, target))


def check_walk_size(n: int, t: int) -> None:
    cj, ck = _coin_dims(n, t)
    dim = math.comb(n, t) * cj * ck
    if dim > MAX_WALK_DIM:
        raise SimulationCapError(f"walk space has dimension {dim}, cap {MAX_WALK_DIM}")


@lru_cache(maxsize=None)
def stationary_projector(n: int, t: int) -> np.ndarray:
    """Projector onto the eigenvalue-1 space of W = Shift * Ref_coin on (I, j, k)."""
    cj, ck = _coin_dims(n, t)
    dim = len(_subsets(n, t)) * cj * ck
    if t == n:
        return np.ones((1, 1))
    shift = np.zeros((dim, dim))
    for si, jp, kp, ni, nk, nj in _shift_table(n, t):
        shift[(ni * cj + nk) * ck + nj, (si * cj + jp) * ck + kp] = 1
    block = np.full((cj * ck, cj * ck), 2 / (cj * ck)) - np.eye(cj * ck)
    ref = np.kron(np.eye(len(_subsets(n, t))), block)
    w = shift @ ref
    _, sv, vh = np.linalg.svd(w - np.eye(dim))
    null = vh[sv < 1e-9].conj().T
    return null @ null.conj().T


@dataclass(frozen=True)
class StageOneResult:
    params: WalkParams
    subset_probabilities: tuple[float, ...]
    success_probability: float


def _marked_set(x: Sequence[int], y: Sequence[int]) -> frozenset[int]:
    return frozenset(i for i, (a, b) in enumerate(zip(x, y)) if a and b)


@lru_cache(maxsize=4096)
def _stage_one(n: int, t: int, marked: frozenset[int], config: WalkConfig) -> StageOneResult:
    check_walk_size(n, t)
    p = walk_params(n, t, config)
    subs = _subsets(n, t)
    cj, ck = _coin_dims(n, t)
    coin = cj * ck
    anc = p.search.anc_dim if p.iterations else 1
    if len(subs) * coin * anc > MAX_ENGINE_ENTRIES:
        raise SimulationCapError(f"walk simulation needs {len(subs) * coin * anc} amplitudes")
    psi = np.zeros((len(subs) * coin, anc), dtype=complex)
    psi[:, 0] = 1 / math.sqrt(len(subs) * coin)
    proj = stationary_projector(n, t)
    alphas, betas = fixed_point_phases(p.iterations, p.eps)
    marked_pos = [frozenset(q for q, i in enumerate(s) if i in marked) for s in subs]
    for al, be in zip(alphas, betas):
        for si, mp in enumerate(marked_pos):
            if mp:
                u = checking_unitary(t, mp, p.search, float(be))
                rows = slice(si * coin, (si + 1) * coin)
                psi[rows] = psi[rows] @ u.T
        psi = -(psi - (1 - np.exp(-1j * al)) * (proj @ psi))
    probs = np.sum(np.abs(psi) ** 2, axis=1).reshape(len(subs), coin).sum(axis=1)
    success = float(sum(pr for pr, mp in zip(probs, marked_pos) if mp))
    return StageOneResult(p, tuple(float(v) for v in probs), success)


def stage_one_trace(p: WalkParams) -> list[str]:
    return ["x"] * p.t + (["y"] * p.checking_queries + ["x"] * (2 * p.walk_steps_per_iteration)) * p.iterations


def mnrs_search(n: int, t: int, x: BitOracle, y: BitOracle, config: WalkConfig = DEFAULT_CONFIG,
                d: int = 1) -> tuple[StageOneResult, QueryAccount]:
    """Exact distribution of the measured subset; the account covers Set-up, Checking and Update."""
    marked = _marked_set(x.bits, y.bits)
    res = _stage_one(n, t, marked, config)
    p = res.params
    x.call(p.t + 2 * p.walk_steps_per_iteration * p.iterations)
    y.call(p.checking_queries * p.iterations)
    return res, account_for(stage_one_trace(p), d)


def stage2_verify(subset: Sequence[int], stored: Sequence[int], y: BitOracle, d: int
                  ) -> tuple[int | None, int]:
    """Query y on every index of I (one batch); return the first i with stored x_i = y_i = 1."""
    y.call(len(subset))
    hit = next((i for i, xi in zip(subset, stored) if xi and y[i]), None)
    return hit, math.ceil(len(subset) / d)


@dataclass(frozen=True)
class DisjointnessResult:
    n: int
    d: int
    t: int
    intersecting: bool
    p_report_intersecting: float
    success_probability: float
    account: QueryAccount
    trace: tuple[str, ...]
    params: WalkParams
    eq3_cost: float

    def row(self) -> list:
        p = self.params
        return [self.n, self.d, self.t, f"{p.eps:.12g}", f"{p.delta:.12g}", f"{self.success_probability:.12f}",
                self.account.queries_x, self.account.queries_y, self.account.rounds, f"{self.eq3_cost:.12g}"]


RUN_HEADER = ["n", "d", "t", "eps", "delta", "success_prob", "queries_x", "queries_y", "rounds", "eq3_cost"]


def disjointness_delay_d(n: int, d: int, x: BitOracle, y: BitOracle, config: WalkConfig = DEFAULT_CONFIG,
                         t: int | None = None) -> DisjointnessResult:
    """Exact probabilities of the two-stage algorithm; intersection is only reported after stage 2."""
    _check_nd(n, d)
    if x.n != n or y.n != n:
        raise ValueError(f"inputs must have {n} bits")
    t = choose_t(n, d) if t is None else t
    check_walk_size(n, t)
    stage, _ = mnrs_search(n, t, x, y, config, d)
    marked = _marked_set(x.bits, y.bits)
    p_hit = stage.success_probability if marked else 0.0
    y.call(t)
    trace = tuple(stage_one_trace(stage.params) + ["y"] * t)
    ok, dec = validate_delay_structure(trace, d)
    acc = account_for(trace, d)
    success = p_hit if marked else 1.0
    return DisjointnessResult(n, d, t, bool(marked), p_hit, success, acc, trace, stage.params,
                              round_cost(n, d, t))


def sample_answer(result: DisjointnessResult, rng: np.random.Generator) -> bool:
    """Draw the algorithm's reported answer (True = intersecting)."""
    return bool(rng.random() < result.p_report_intersecting)


def runs_to_csv(results: Iterable[DisjointnessResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_HEADER)
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


# ---------------------------------------------------------------- calibration

def worst_case_success(n: int, d: int, config: WalkConfig = DEFAULT_CONFIG) -> float:
    """Minimum success over all nonempty marked sets; depends on (x, y) only through x AND y."""
    t = choose_t(n, d)
    worst = 1.0
    for mask in range(1, 1 << n):
        marked = frozenset(i for i in range(n) if (mask >> (n - 1 - i)) & 1)
        worst = min(worst, _stage_one(n, t, marked, config).success_probability)
    return worst


def calibrate(n: int, ds: Sequence[int], grid: Sequence[float] = (1.0, 1.5, 2.0, 2.5, 3.0),
              target: float = 2 / 3, base: WalkConfig = DEFAULT_CONFIG) -> dict[float, float]:
    """Worst-case success for each candidate c_eps; the smallest passing value is the calibrated one."""
    out = {}
    for c_eps in grid:
        cfg = replace(base, c_eps=c_eps)
        out[c_eps] = min(worst_case_success(n, d, cfg) for d in ds)
    return out


def measured_round_factor(n: int, d: int, config: WalkConfig = DEFAULT_CONFIG) -> float:
    t = choose_t(n, d)
    p = walk_params(n, t, config)
    rounds = account_for(stage_one_trace(p) + ["y"] * t, d).rounds
    return rounds / round_cost(n, d, t)
