"""Two-oracle query algorithms with delay-d round accounting.

The workspace is an index register ``Q`` of ceil(log2 n) qubits, a target
qubit ``B`` and any auxiliary registers. A query to input z maps
|i, b> to |i, b xor z_i> (indices are 0-based here); basis states with
i >= n must carry no amplitude. Queries come in maximal runs to one oracle,
and a run of length L costs ceil(L/d) rounds.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import groupby
from typing import Sequence, Union

import numpy as np

from .lineproto import IRParseError, _kv, _lines, format_gate, parse_gate, parse_qubit
from .qcore import MAX_QUBITS, GateSpec, PureState, QCoreError, RegisterLayout, apply_matrix

ORACLES = ("x", "y")
ZERO_TOL = 1e-12
Step = Union[GateSpec, str]


class InvalidIndexAmplitude(QCoreError):
    pass


def index_width(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def _bits(z) -> list[int]:
    return [int(c) for c in z]


def oracle_amplitudes(amps: np.ndarray, layout: RegisterLayout, z: Sequence[int],
                      qreg: str = "Q", breg: str = "B") -> np.ndarray:
    n = len(z)
    nq = layout.total_qubits
    qq = layout.qubits(qreg)
    bq = layout.qubit(breg, 0)
    psi = np.asarray(amps).reshape((2,) * nq)
    moved = np.moveaxis(psi, qq + [bq], list(range(len(qq) + 1)))
    shape = moved.shape
    flat = moved.reshape(1 << len(qq), 2, -1)
    if (1 << len(qq)) > n and np.abs(flat[n:]).max(initial=0) > ZERO_TOL:
        raise InvalidIndexAmplitude(f"amplitude on index register values >= n={n}")
    out = flat.copy()
    ones = [i for i, v in enumerate(z) if v]
    out[ones] = flat[ones][:, ::-1]
    return np.moveaxis(out.reshape(shape), list(range(len(qq) + 1)), qq + [bq]).reshape(-1)


def apply_query_oracle(state: PureState, z, qreg: str = "Q", breg: str = "B") -> PureState:
    return PureState(state.layout, oracle_amplitudes(state.amplitudes, state.layout, _bits(z), qreg, breg))


@dataclass
class QueryAlgorithm:
    n: int
    d: int
    steps: list[Step] = field(default_factory=list)
    aux: tuple[tuple[str, int], ...] = ()
    output: tuple[str, int] = ("B", 0)

    def layout(self, cap: int = MAX_QUBITS) -> RegisterLayout:
        return RegisterLayout.of(("Q", index_width(self.n)), ("B", 1), *self.aux, cap=cap)

    def tags(self) -> list[str]:
        return [s for s in self.steps if isinstance(s, str)]


@dataclass(frozen=True)
class DelayDecomposition:
    runs: tuple[tuple[str, int], ...]
    rounds: tuple[tuple[str, int], ...]

    @property
    def r(self) -> int:
        return len(self.rounds)


def validate_delay_structure(alg: QueryAlgorithm | Sequence[str], d: int | None = None
                             ) -> tuple[bool, DelayDecomposition]:
    """Greedy packing of maximal same-oracle runs into rounds of at most d queries."""
    tags = alg.tags() if isinstance(alg, QueryAlgorithm) else list(alg)
    d = d if d is not None else alg.d
    if d < 1:
        raise ValueError("delay d must be at least 1")
    bad = [t for t in tags if t not in ORACLES]
    if bad:
        return False, DelayDecomposition((), ())
    runs = tuple((k, len(list(g))) for k, g in groupby(tags))
    rounds = []
    for k, length in runs:
        full, rest = divmod(length, d)
        rounds += [(k, d)] * full + ([(k, rest)] if rest else [])
    return True, DelayDecomposition(runs, tuple(rounds))


def rounds_for_trace(tags: Sequence[str], d: int) -> int:
    return validate_delay_structure(tags, d)[1].r


@dataclass(frozen=True)
class QueryAccount:
    rounds: int
    queries_x: int
    queries_y: int
    d: int

    @property
    def delay_d_query_complexity(self) -> int:
        return self.d * self.rounds

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rounds", "queries_x", "queries_y", "delay_d_complexity"])
        w.writerow([self.rounds, self.queries_x, self.queries_y, self.delay_d_query_complexity])
        return buf.getvalue()


def account_for(tags: Sequence[str], d: int) -> QueryAccount:
    return QueryAccount(rounds_for_trace(tags, d), sum(t == "x" for t in tags), sum(t == "y" for t in tags), d)


def simulate_query_algorithm(alg: QueryAlgorithm, x, y, cap: int = MAX_QUBITS) -> tuple[PureState, QueryAccount]:
    xs, ys = _bits(x), _bits(y)
    if len(xs) != alg.n or len(ys) != alg.n:
        raise ValueError(f"inputs must have {alg.n} bits")
    lay = alg.layout(cap=cap)
    amps = np.zeros(lay.dim, dtype=complex)
    amps[0] = 1
    n = lay.total_qubits
    for step in alg.steps:
        if isinstance(step, str):
            amps = oracle_amplitudes(amps, lay, xs if step == "x" else ys)
        else:
            amps = apply_matrix(amps, n, step.unitary(), [lay.qubit(*q) for q in step.targets],
                                [lay.qubit(*q) for q in step.ctrl])
    ok, dec = validate_delay_structure(alg)
    if not ok:
        raise QCoreError("query steps must be tagged 'x' or 'y'")
    return PureState(lay, amps), account_for(alg.tags(), alg.d)


def run_query_algorithm(alg: QueryAlgorithm, x, y, cap: int = MAX_QUBITS
                        ) -> tuple[tuple[float, float], QueryAccount]:
    state, acc = simulate_query_algorithm(alg, x, y, cap)
    return state.qubit_probabilities(*alg.output), acc


# ---------------------------------------------------------------- builders

def _load_index(i: int, width: int) -> list[GateSpec]:
    return [GateSpec("X", [("Q", q)]) for q in range(width) if (i >> (width - 1 - q)) & 1]


def single_query_algorithm(n: int, d: int, i: int = 0, oracle: str = "x") -> QueryAlgorithm:
    """Query z_i once; the answer lands in B."""
    return QueryAlgorithm(n, d, _load_index(i, index_width(n)) + [oracle])


def read_all_algorithm(n: int, d: int) -> QueryAlgorithm:
    """Copy x into register WX and y into WY, one query per bit."""
    w = index_width(n)
    steps: list[Step] = []
    for oracle, reg in (("x", "WX"), ("y", "WY")):
        for i in range(n):
            load = _load_index(i, w)
            steps += load + [oracle, GateSpec("SWAP", [("B", 0), (reg, i)])] + load
    return QueryAlgorithm(n, d, steps, aux=(("WX", n), ("WY", n)), output=("WX", 0))


# ---------------------------------------------------------------- text format

def format_query_algorithm(alg: QueryAlgorithm) -> str:
    out = [f"query n={alg.n} d={alg.d}"]
    out += [f"register {name} {w}" for name, w in alg.aux]
    for s in alg.steps:
        out.append(f"query {s}" if isinstance(s, str) else f"gate {format_gate(s)}")
    out.append(f"output {alg.output[0]}[{alg.output[1]}]")
    return "\n".join(out) + "\n"


def parse_query_algorithm(text: str) -> QueryAlgorithm:
    alg: QueryAlgorithm | None = None
    for lineno, tokens in _lines(text):
        try:
            if alg is None:
                vals, rest = _kv(tokens[1:], ("n", "d"))
                if tokens[0] != "query" or set(vals) != {"n", "d"} or rest:
                    raise ValueError("expected header 'query n=<int> d=<int>'")
                alg = QueryAlgorithm(vals["n"], vals["d"])
            elif tokens[0] == "register":
                if len(tokens) != 3 or tokens[1] in ("Q", "B"):
                    raise ValueError("register line is 'register <name> <width>' (Q and B are implicit)")
                alg.aux += ((tokens[1], int(tokens[2])),)
            elif tokens[0] == "gate":
                alg.steps.append(parse_gate(tokens[1:]))
            elif tokens[0] == "query":
                if len(tokens) != 2 or tokens[1] not in ORACLES:
                    raise ValueError("query line is 'query x' or 'query y'")
                alg.steps.append(tokens[1])
            elif tokens[0] == "output":
                alg.output = parse_qubit(tokens[1])
            else:
                raise ValueError(f"unknown directive {tokens[0]!r}")
        except (ValueError, QCoreError, IndexError) as exc:
            raise IRParseError(lineno, str(exc)) from exc
    if alg is None:
        raise IRParseError(0, "missing header")
    return alg
