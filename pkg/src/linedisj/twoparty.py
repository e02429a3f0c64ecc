"""Two-party protocols, the line-to-two-party compiler and communication accounting.

A two-party protocol here acts on named registers shared with the line model
(``X``, ``A0``, ``R0``, ``L1``, ..., ``Y``). Each round the sender applies a
local circuit to registers it holds and hands a list of registers to the other
player. The compiler keeps the line protocol's physical slots, so the state
after every Bob round coincides with the line state at the end of the
corresponding block, with no reordering needed.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lineproto import (
    INPUT_REGS, IRParseError, InvalidProtocolError, LineParams, LineProtocol, _kv, _lines,
    bits_to_int, ensure_valid, format_gate, full_layout, output_probabilities, parse_gate, parse_qubit, run_gates,
)
from .qcore import CONTROL_POSITIONS, MAX_QUBITS, GateSpec, PureState, QCoreError, RegisterLayout, SimulationCapError

ALICE, BOB = "alice", "bob"


@dataclass
class TwoPartyRound:
    sender: str
    gates: list[GateSpec]
    message: tuple[str, ...]


@dataclass
class TwoPartyProtocol:
    n: int
    registers: tuple[tuple[str, int], ...]
    bob_initial: frozenset[str]
    rounds: list[TwoPartyRound]
    measurement: list[GateSpec] = field(default_factory=list)
    output: tuple[str, int] = ("R0", 0)
    source: LineParams | None = None

    @property
    def m(self) -> int:
        return len(self.rounds)

    @property
    def widths(self) -> dict[str, int]:
        return dict(self.registers)

    def work_layout(self, cap: int = MAX_QUBITS) -> RegisterLayout:
        return RegisterLayout.of(*[(r, w) for r, w in self.registers if r not in INPUT_REGS], cap=cap)

    def full_layout(self, cap: int = MAX_QUBITS) -> RegisterLayout:
        return RegisterLayout.of(*self.registers, cap=cap)

    def holdings(self) -> list[tuple[frozenset[str], frozenset[str]]]:
        """(Alice's, Bob's) register sets after each round's delivery; entry 0 is the start."""
        names = {r for r, _ in self.registers} | {"XH", "YH"}
        bob = set(self.bob_initial) | {"Y", "YH"}
        out = [(frozenset(names - bob), frozenset(bob))]
        for rnd in self.rounds:
            msg = set(rnd.message)
            if rnd.sender == ALICE:
                bob |= msg
            else:
                bob -= msg
            out.append((frozenset(names - bob), frozenset(bob)))
        return out

    def retained(self) -> tuple[frozenset[str], frozenset[str]]:
        """Registers never sent by Alice and by Bob respectively."""
        sent = {ALICE: set(), BOB: set()}
        for rnd in self.rounds:
            sent[rnd.sender] |= set(rnd.message)
        a, b = self.holdings()[0]
        return frozenset(a - sent[ALICE]), frozenset(b - sent[BOB])


def validate_two_party(protocol: TwoPartyProtocol) -> list[str]:
    errs: list[str] = []
    widths = protocol.widths
    if protocol.m < 1:
        errs.append("protocol needs at least one round")
    if widths.get("X") != protocol.n or widths.get("Y") != protocol.n:
        errs.append(f"input registers X and Y must have width n={protocol.n}")
    if "X" in protocol.bob_initial:
        errs.append("X must start with Alice")
    hold = protocol.holdings()

    def check_gates(gates, owned, where):
        for g in gates:
            for pos, (reg, idx) in enumerate(g.targets):
                if reg in INPUT_REGS and pos not in CONTROL_POSITIONS.get(g.kind, ()):
                    errs.append(f"{where}: input register not read-only ({g.kind} writes {reg}[{idx}])")
            for reg, idx in g.qubits:
                if reg not in widths:
                    errs.append(f"{where}: unknown register {reg}")
                elif reg not in owned:
                    errs.append(f"{where}: register {reg} not held by the acting player")
                elif not 0 <= idx < widths[reg]:
                    errs.append(f"{where}: index {reg}[{idx}] out of range")

    for k, rnd in enumerate(protocol.rounds, 1):
        expected = ALICE if k % 2 else BOB
        if rnd.sender != expected:
            errs.append(f"round {k}: sender {rnd.sender}, expected {expected} (senders alternate, Alice first)")
            continue
        owned = hold[k - 1][0] if rnd.sender == ALICE else hold[k - 1][1]
        check_gates(rnd.gates, owned, f"round {k}")
        for reg in rnd.message:
            if reg in INPUT_REGS:
                errs.append(f"round {k}: input register {reg} cannot be sent")
            elif reg not in owned:
                errs.append(f"round {k}: message register {reg} not held by {rnd.sender}")
    final = hold[-1][0]
    check_gates(protocol.measurement, final, "measurement")
    if protocol.output[0] not in final or protocol.output[0] in INPUT_REGS:
        errs.append(f"output qubit {protocol.output} not held by Alice at the end")
    return errs


# ---------------------------------------------------------------- compiler

def _swaps(params: LineParams, edges: Sequence[int]) -> list[GateSpec]:
    return [GateSpec("SWAP", [(f"R{l - 1}", q), (f"L{l}", q)]) for l in edges for q in range(params.b)]


def _middle_slots(params: LineParams) -> list[str]:
    out = []
    for i in range(1, params.d):
        out += [f"L{i}"] + ([f"A{i}"] if params.s else []) + [f"R{i}"]
    return out


def compile_line_to_two_party(protocol: LineProtocol) -> TwoPartyProtocol:
    """Alice simulates the upper-left triangle of each d-round block, Bob the rest."""
    ensure_valid(protocol)
    p = protocol.params
    if p.r % p.d:
        raise InvalidProtocolError(f"r={p.r} is not a multiple of d={p.d}; pad first")
    regs = full_layout(p, cap=10**9).registers
    bob_keeps = frozenset({f"L{p.d}", f"A{p.d}"} & {r for r, _ in regs})
    msg = tuple(["R0"] + _middle_slots(p))
    rounds: list[TwoPartyRound] = []
    for t in range(0, p.r, p.d):
        gates: list[GateSpec] = []
        for j in range(t + 1, t + p.d + 1):
            top = p.d - (j - t)
            for l in range(0, top + 1):
                gates += protocol.global_circuit(l, j)
            gates += _swaps(p, range(1, top + 1))
        rounds.append(TwoPartyRound(ALICE, gates, msg))
        gates = []
        for j in range(t + 1, t + p.d + 1):
            low = p.d - (j - t - 1)
            gates += protocol.global_circuit(p.d, j)
            for l in range(low, p.d):
                gates += protocol.global_circuit(l, j)
            gates += _swaps(p, range(low, p.d + 1))
        rounds.append(TwoPartyRound(BOB, gates, msg))
    return TwoPartyProtocol(p.n, regs, bob_keeps, rounds, protocol.global_measurement(),
                            protocol.global_output, source=p)


# ---------------------------------------------------------------- simulation

@dataclass
class TwoPartyTranscript:
    protocol: TwoPartyProtocol
    x: int
    y: int
    work: RegisterLayout
    snapshots: list[np.ndarray]
    partitions: list[tuple[frozenset[str], frozenset[str]]]

    def state(self, k: int) -> PureState:
        """Global state after round k (0 = initial), registers in the protocol's order."""
        n = self.protocol.n
        ex = np.zeros(1 << n)
        ex[self.x] = 1
        ey = np.zeros(1 << n)
        ey[self.y] = 1
        lay = self.protocol.full_layout(cap=10**9)
        if lay.names[0] != "X" or lay.names[-1] != "Y":
            raise QCoreError("lifting expects X first and Y last")
        return PureState(lay, np.kron(np.kron(ex, self.snapshots[k]), ey))

    def E(self, k: int) -> frozenset[str]:
        return self.partitions[k][0]

    def F(self, k: int) -> frozenset[str]:
        return self.partitions[k][1]

    def norms(self) -> list[float]:
        return [float(np.linalg.norm(a)) for a in self.snapshots]


def ensure_valid_two_party(protocol: TwoPartyProtocol) -> None:
    errs = validate_two_party(protocol)
    if errs:
        raise InvalidProtocolError("; ".join(errs))


def simulate_two_party(protocol: TwoPartyProtocol, x, y, cap: int = MAX_QUBITS
                       ) -> tuple[tuple[float, float], TwoPartyTranscript]:
    ensure_valid_two_party(protocol)
    total = sum(w for _, w in protocol.registers)
    if total > cap:
        raise SimulationCapError(f"protocol needs {total} qubits, cap {cap}")
    if len(x) != protocol.n or len(y) != protocol.n:
        raise ValueError(f"inputs must have {protocol.n} bits")
    xv, yv = bits_to_int(x), bits_to_int(y)
    lay = protocol.work_layout()
    inputs = {"X": (xv, protocol.n), "Y": (yv, protocol.n)}
    amps = np.zeros(lay.dim, dtype=complex)
    amps[0] = 1
    snaps = [amps]
    for rnd in protocol.rounds:
        amps = run_gates(amps, lay, rnd.gates, inputs)
        snaps.append(amps)
    final = run_gates(amps, lay, protocol.measurement, inputs)
    out = output_probabilities(final, lay, protocol.output)
    return out, TwoPartyTranscript(protocol, xv, yv, lay, snaps, protocol.holdings())


# ---------------------------------------------------------------- accounting

@dataclass
class CommAccount:
    per_round: list[tuple[int, str, int]]
    total: int
    rounds: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "sender", "qubits"])
        w.writerows(self.per_round)
        return buf.getvalue()


def communication_total(protocol: TwoPartyProtocol) -> CommAccount:
    widths = protocol.widths
    rows = [(k, rnd.sender, sum(widths[r] for r in rnd.message))
            for k, rnd in enumerate(protocol.rounds, 1)]
    return CommAccount(rows, sum(q for *_, q in rows), len(rows))


def block_message_sizes(params: LineParams) -> tuple[int, int]:
    """Qubits sent by Alice and by Bob per d-round block of the compiled protocol."""
    size = (2 * params.d - 1) * params.b + (params.d - 1) * params.s
    return size, size


def pipeline_schedule(T: int, q: int, d: int, b: int) -> int:
    """Line rounds to stream T waves of q qubits over a path of length d, bandwidth b."""
    if b < 1:
        raise ValueError("bandwidth b must be at least 1")
    if min(T, q, d) < 0:
        raise ValueError("T, q and d must be non-negative")
    return d + T * math.ceil(q / b)


# ---------------------------------------------------------------- text format

def format_two_party(protocol: TwoPartyProtocol) -> str:
    out = [f"twoparty m={protocol.m} n={protocol.n}"]
    for name, w in protocol.registers:
        owner = BOB if name == "Y" or name in protocol.bob_initial else ALICE
        out.append(f"register {name} {w} owner={owner}")
    for k, rnd in enumerate(protocol.rounds, 1):
        out.append(f"round k={k} sender={rnd.sender}")
        out.extend(f"gate {format_gate(g)}" for g in rnd.gates)
        out.append("send " + " ".join(rnd.message))
    out.append("measure")
    out.extend(f"gate {format_gate(g)}" for g in protocol.measurement)
    out.append(f"output {protocol.output[0]}[{protocol.output[1]}]")
    return "\n".join(out) + "\n"


def parse_two_party(text: str) -> TwoPartyProtocol:
    header = None
    regs: list[tuple[str, int]] = []
    bob: set[str] = set()
    rounds: list[TwoPartyRound] = []
    measurement: list[GateSpec] = []
    output = None
    in_measure = False
    for lineno, tokens in _lines(text):
        head = tokens[0]
        try:
            if header is None:
                vals, rest = _kv(tokens[1:], ("m", "n"))
                if head != "twoparty" or set(vals) != {"m", "n"} or rest:
                    raise ValueError("expected header 'twoparty m=<int> n=<int>'")
                header = vals
            elif head == "register":
                if len(tokens) != 4 or not tokens[3].startswith("owner="):
                    raise ValueError("register line is 'register <name> <width> owner=<alice|bob>'")
                owner = tokens[3][6:]
                if owner not in (ALICE, BOB):
                    raise ValueError(f"unknown owner {owner!r}")
                regs.append((tokens[1], int(tokens[2])))
                if owner == BOB and tokens[1] != "Y":
                    bob.add(tokens[1])
            elif head == "round":
                vals, rest = _kv(tokens[1:], ("k",))
                if len(rest) != 1 or not rest[0].startswith("sender="):
                    raise ValueError("round line is 'round k=<int> sender=<alice|bob>'")
                if vals.get("k") != len(rounds) + 1:
                    raise ValueError("rounds must be numbered consecutively from 1")
                rounds.append(TwoPartyRound(rest[0][7:], [], ()))
            elif head == "gate":
                g = parse_gate(tokens[1:])
                if in_measure:
                    measurement.append(g)
                elif rounds:
                    rounds[-1].gates.append(g)
                else:
                    raise ValueError("gate outside a round")
            elif head == "send":
                if not rounds:
                    raise ValueError("send outside a round")
                rounds[-1].message = tuple(tokens[1:])
            elif head == "measure":
                in_measure = True
            elif head == "output":
                output = parse_qubit(tokens[1])
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (ValueError, QCoreError, IndexError) as exc:
            raise IRParseError(lineno, str(exc)) from exc
    if header is None:
        raise IRParseError(0, "missing header")
    if header["m"] != len(rounds):
        raise IRParseError(0, f"header says m={header['m']} but {len(rounds)} rounds given")
    if output is None:
        raise IRParseError(0, "missing output line")
    return TwoPartyProtocol(header["n"], tuple(regs), frozenset(bob), rounds, measurement, output)
