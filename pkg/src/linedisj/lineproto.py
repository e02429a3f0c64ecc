"""Protocols on a path of d+1 parties: IR, validation and exact simulation.

Party ``i`` owns three physical slots: a left port ``L{i}`` (absent for
party 0), a memory register ``A{i}`` and a right port ``R{i}`` (absent for
party d). Party 0 also holds the read-only input ``X`` and party d holds ``Y``.
In round t each party applies its circuit to its own slots; the left port then
carries the outgoing message L_{i,t} and the right port carries R_{i,t}. The
exchange at the end of the round swaps the contents of ``R{i-1}`` and ``L{i}``
on every edge, so after round t slot ``L{i}`` holds R_{i-1,t} and slot
``R{i}`` holds L_{i+1,t}. Ownership of slots never changes; the logical names
of the registers they carry do.

Circuits are written with party-local register names ``X``, ``Y``, ``A``,
``L`` and ``R``; :func:`global_name` maps them to slots.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .qcore import (
    ARITY, CONTROL_POSITIONS, MAX_QUBITS, GateSpec, PureState, QCoreError, RegisterLayout,
    SimulationCapError, apply_matrix, random_unitary,
)

INPUT_REGS = ("X", "Y")
PURIFIERS = {"X": "XH", "Y": "YH"}


class IRParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class InvalidProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class LineParams:
    n: int
    d: int
    r: int
    b: int
    s: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.r < 1 or self.b < 1 or self.s < 0:
            raise InvalidProtocolError(f"invalid line parameters {self}")


def local_registers(params: LineParams, party: int) -> dict[str, int]:
    """Party-local register widths, in slot order."""
    regs: dict[str, int] = {}
    if party == 0:
        regs["X"] = params.n
    else:
        regs["L"] = params.b
    if params.s:
        regs["A"] = params.s
    if party == params.d:
        regs["Y"] = params.n
    else:
        regs["R"] = params.b
    return regs


def global_name(party: int, local: str) -> str:
    return local if local in INPUT_REGS else f"{local}{party}"


def party_slots(params: LineParams, party: int) -> list[str]:
    """Global names of the non-input slots of ``party``."""
    return [global_name(party, r) for r in local_registers(params, party) if r not in INPUT_REGS]


def work_layout(params: LineParams, cap: int = MAX_QUBITS) -> RegisterLayout:
    regs = []
    for i in range(params.d + 1):
        for local, w in local_registers(params, i).items():
            if local not in INPUT_REGS:
                regs.append((global_name(i, local), w))
    return RegisterLayout.of(*regs, cap=cap)


def full_layout(params: LineParams, cap: int = MAX_QUBITS) -> RegisterLayout:
    """Canonical global order: X, party slots left to right, Y."""
    w = work_layout(params, cap=10**9)
    return RegisterLayout((("X", params.n),) + w.registers + (("Y", params.n),), cap=cap)


def canonical_order(params: LineParams) -> list[str]:
    return list(full_layout(params, cap=10**9).names)


def bits_to_int(bits: str | Sequence[int]) -> int:
    s = "".join(str(int(b)) for b in bits)
    return int(s, 2) if s else 0


def int_to_bits(v: int, n: int) -> str:
    return format(v, f"0{n}b") if n else ""


# ---------------------------------------------------------------- protocol IR

@dataclass
class LineProtocol:
    params: LineParams
    circuits: dict[tuple[int, int], list[GateSpec]] = field(default_factory=dict)
    measurement: list[GateSpec] = field(default_factory=list)
    output: tuple[str, int] = ("R", 0)
    declared: dict[tuple[int, str], int] = field(default_factory=dict)

    def circuit(self, party: int, t: int) -> list[GateSpec]:
        return self.circuits.get((party, t), [])

    def global_circuit(self, party: int, t: int) -> list[GateSpec]:
        return [g.renamed(lambda r, p=party: global_name(p, r)) for g in self.circuit(party, t)]

    def global_measurement(self) -> list[GateSpec]:
        return [g.renamed(lambda r: global_name(0, r)) for g in self.measurement]

    @property
    def global_output(self) -> tuple[str, int]:
        return global_name(0, self.output[0]), self.output[1]


@dataclass(frozen=True)
class Violation:
    party: int
    round: int | None
    message: str

    def __str__(self):
        where = "measure" if self.round is None else f"t={self.round}"
        return f"party={self.party} {where}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        return "valid" if self.ok else "\n".join(map(str, self.violations))


def _check_gate(params: LineParams, party: int, t: int | None, gate: GateSpec,
                out: list[Violation]) -> None:
    regs = local_registers(params, party)
    for pos, (reg, idx) in enumerate(gate.targets):
        if reg in INPUT_REGS and pos not in CONTROL_POSITIONS.get(gate.kind, ()):
            out.append(Violation(party, t, f"input register not read-only ({gate.kind} writes {reg}[{idx}])"))
    for reg, idx in gate.qubits:
        if reg not in regs:
            out.append(Violation(party, t, f"register {reg} not held by party {party}"))
        elif not 0 <= idx < regs[reg]:
            if reg in ("L", "R"):
                out.append(Violation(party, t, f"bandwidth exceeded ({reg}[{idx}] with b={params.b})"))
            elif reg == "A":
                out.append(Violation(party, t, f"memory exceeded (A[{idx}] with s={params.s})"))
            else:
                out.append(Violation(party, t, f"input index {reg}[{idx}] out of range"))
    for reg, _ in gate.ctrl:
        if reg not in INPUT_REGS:
            out.append(Violation(party, t, f"classical control on non-input register {reg}"))


def validate(protocol: LineProtocol) -> ValidationReport:
    p = protocol.params
    out: list[Violation] = []
    for (party, name), width in sorted(protocol.declared.items()):
        regs = local_registers(p, party) if 0 <= party <= p.d else {}
        if name not in regs:
            out.append(Violation(party, None, f"declared register {name} not held by party {party}"))
        elif name in ("L", "R") and width != p.b:
            out.append(Violation(party, None, f"bandwidth exceeded ({name} declared with {width} qubits, b={p.b})"))
        elif name == "A" and width != p.s:
            out.append(Violation(party, None, f"memory register declared with {width} qubits, s={p.s}"))
        elif name in INPUT_REGS and width != p.n:
            out.append(Violation(party, None, f"input register {name} declared with {width} qubits, n={p.n}"))
    for (party, t), gates in sorted(protocol.circuits.items()):
        if not 0 <= party <= p.d:
            out.append(Violation(party, t, f"no party {party} on a line with d={p.d}"))
            continue
        if not 1 <= t <= p.r:
            out.append(Violation(party, t, f"round {t} outside 1..{p.r}"))
        for g in gates:
            _check_gate(p, party, t, g, out)
    for g in protocol.measurement:
        _check_gate(p, 0, None, g, out)
    reg, idx = protocol.output
    regs0 = local_registers(p, 0)
    if reg not in regs0 or reg == "X" or not 0 <= idx < regs0[reg]:
        out.append(Violation(0, None, f"output qubit {reg}[{idx}] is not a work qubit of party 0"))
    return ValidationReport(out)


def ensure_valid(protocol: LineProtocol) -> None:
    rep = validate(protocol)
    if not rep.ok:
        raise InvalidProtocolError(str(rep))


# ---------------------------------------------------------------- execution

def input_bit(inputs: dict[str, tuple[int, int]], reg: str, idx: int) -> int:
    value, width = inputs[reg]
    return (value >> (width - 1 - idx)) & 1


def run_gates(amps: np.ndarray, layout: RegisterLayout, gates: Iterable[GateSpec],
              inputs: dict[str, tuple[int, int]] | None = None) -> np.ndarray:
    """Apply gates to a raw amplitude vector.

    Qubits of registers missing from ``layout`` must be classical inputs listed in
    ``inputs`` as ``name -> (value, width)``; the gate is restricted to their
    values, which is exact because inputs only sit in control positions.
    """
    inputs = inputs or {}
    n = layout.total_qubits
    for g in gates:
        if any(r not in layout for r, _ in g.ctrl) and any(
                input_bit(inputs, r, i) == 0 for r, i in g.ctrl if r not in layout):
            continue
        controls = [layout.qubit(r, i) for r, i in g.ctrl if r in layout]
        u = g.unitary()
        fixed = [(pos, input_bit(inputs, r, i)) for pos, (r, i) in enumerate(g.targets)
                 if r not in layout]
        if fixed:
            k = len(g.targets)
            keep = [idx for idx in range(1 << k)
                    if all(((idx >> (k - 1 - pos)) & 1) == bit for pos, bit in fixed)]
            u_sub = u[np.ix_(keep, keep)]
            if not np.allclose(u_sub.conj().T @ u_sub, np.eye(len(keep)), atol=1e-9):
                raise QCoreError(f"{g.kind} writes a classical input register")
            u = u_sub
        qubits = [layout.qubit(r, i) for r, i in g.targets if r in layout]
        if not qubits:
            # every target was a classical input: only a (controlled) phase remains
            amps = _phase(amps, n, complex(u[0, 0]), controls)
            continue
        amps = apply_matrix(amps, n, u, qubits, controls)
    return amps


def _phase(amps: np.ndarray, n: int, phase: complex, controls: list[int]) -> np.ndarray:
    if phase == 1:
        return amps
    if not controls:
        return amps * phase
    psi = np.array(amps).reshape((2,) * n)
    sl = [slice(None)] * n
    for c in controls:
        sl[c] = 1
    psi[tuple(sl)] *= phase
    return psi.reshape(-1)


def exchange(amps: np.ndarray, params: LineParams, layout: RegisterLayout) -> np.ndarray:
    """End-of-round message exchange: swap R{i-1} and L{i} on every edge."""
    n = layout.total_qubits
    perm = list(range(n))
    for i in range(1, params.d + 1):
        a = layout.qubits(f"R{i - 1}")
        b = layout.qubits(f"L{i}")
        for qa, qb in zip(a, b):
            perm[qa], perm[qb] = qb, qa
    return np.asarray(amps).reshape((2,) * n).transpose(perm).reshape(-1)


def logical_slots(params: LineParams, t: int) -> dict[str, str]:
    """Logical register name (as in R_{i,t}) -> physical slot, at the end of round t."""
    out = {"X": "X", "Y": "Y", "XH": "XH", "YH": "YH"}
    for i in range(params.d + 1):
        if params.s:
            out[f"A_{i},{t}"] = f"A{i}"
        if i < params.d:
            out[f"L_{i + 1},{t}"] = f"R{i}"
        if i > 0:
            out[f"R_{i - 1},{t}"] = f"L{i}"
    return out


def slot_owner(params: LineParams, slot: str) -> int:
    if slot in ("X", "XH"):
        return 0
    if slot in ("Y", "YH"):
        return params.d
    return int(slot[1:])


def side_slots(params: LineParams, side: str) -> set[str]:
    """Physical registers (with purifiers) held by A_1..A_d ('right') or A_0..A_{d-1} ('left')."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    parties = range(1, params.d + 1) if side == "right" else range(0, params.d)
    names = {"Y", "YH"} if side == "right" else {"X", "XH"}
    for i in parties:
        names.update(party_slots(params, i))
    return names


@dataclass
class RoundTrace:
    params: LineParams
    x: int
    y: int
    work: RegisterLayout
    snapshots: list[np.ndarray]

    def state(self, t: int) -> PureState:
        """Global state at the end of round t, in canonical register order."""
        p = self.params
        ex = np.zeros(1 << p.n)
        ex[self.x] = 1
        ey = np.zeros(1 << p.n)
        ey[self.y] = 1
        amps = np.kron(np.kron(ex, self.snapshots[t]), ey)
        return PureState(full_layout(p, cap=10**9), amps)

    def ownership(self, t: int) -> dict[str, int]:
        if not 0 <= t <= self.params.r:
            raise ValueError(f"round {t} outside 0..{self.params.r}")
        return {name: slot_owner(self.params, slot)
                for name, slot in logical_slots(self.params, t).items()}

    def norms(self) -> list[float]:
        return [float(np.linalg.norm(a)) for a in self.snapshots]


def snapshot_side(trace: RoundTrace, t: int, side: str) -> set[str]:
    owners = trace.ownership(t)
    right = side == "right"
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    d = trace.params.d
    return {name for name, party in owners.items() if (party >= 1 if right else party <= d - 1)}


def _inputs(params: LineParams, x, y) -> tuple[int, int]:
    if len(x) != params.n or len(y) != params.n:
        raise ValueError(f"inputs must have {params.n} bits")
    return bits_to_int(x), bits_to_int(y)


def output_probabilities(amps: np.ndarray, layout: RegisterLayout, qubit: tuple[str, int]) -> tuple[float, float]:
    n = layout.total_qubits
    q = layout.qubit(*qubit)
    p = np.abs(np.asarray(amps).reshape((2,) * n)) ** 2
    p1 = float(p.sum(axis=tuple(i for i in range(n) if i != q))[1])
    return 1.0 - p1, p1


def simulate_line(protocol: LineProtocol, x, y, cap: int = MAX_QUBITS
                  ) -> tuple[tuple[float, float], RoundTrace]:
    """Run the protocol on basis inputs; returns (P(out=0), P(out=1)) and the trace."""
    ensure_valid(protocol)
    p = protocol.params
    if full_layout(p, cap=10**9).total_qubits > cap:
        raise SimulationCapError(f"protocol needs {full_layout(p, cap=10**9).total_qubits} qubits, cap {cap}")
    xv, yv = _inputs(p, x, y)
    lay = work_layout(p)
    inputs = {"X": (xv, p.n), "Y": (yv, p.n)}
    amps = np.zeros(lay.dim, dtype=complex)
    amps[0] = 1
    snaps = [amps]
    for t in range(1, p.r + 1):
        for party in range(p.d + 1):
            amps = run_gates(amps, lay, protocol.global_circuit(party, t), inputs)
        amps = exchange(amps, p, lay)
        snaps.append(amps)
    final = run_gates(amps, lay, protocol.global_measurement(), inputs)
    return output_probabilities(final, lay, protocol.global_output), RoundTrace(p, xv, yv, lay, snaps)


def pad_to_multiple(protocol: LineProtocol) -> LineProtocol:
    ensure_valid(protocol)
    p = protocol.params
    r = p.d * math.ceil(p.r / p.d)
    return LineProtocol(LineParams(p.n, p.d, r, p.b, p.s), dict(protocol.circuits),
                        list(protocol.measurement), protocol.output, dict(protocol.declared))


# ---------------------------------------------------------------- text format

_QUBIT = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)\[(\d+)\]$")
_KIND = re.compile(r"^([A-Za-z0-9]+)(?:\((.*)\))?$")


def parse_qubit(tok: str) -> tuple[str, int]:
    m = _QUBIT.match(tok)
    if not m:
        raise ValueError(f"bad qubit reference {tok!r}")
    return m.group(1), int(m.group(2))


def parse_gate(tokens: list[str]) -> GateSpec:
    """Parse ``KIND[(m00,m01,...)] q[i] ... [ctrl=X[j],...]``."""
    if not tokens:
        raise ValueError("empty gate")
    m = _KIND.match(tokens[0])
    if not m:
        raise ValueError(f"bad gate kind {tokens[0]!r}")
    kind = m.group(1).upper()
    matrix = None
    if m.group(2) is not None:
        vals = [complex(v.strip().replace(" ", "")) for v in m.group(2).split(",")]
        dim = int(round(math.sqrt(len(vals))))
        if dim * dim != len(vals):
            raise ValueError("matrix entries do not form a square")
        matrix = np.array(vals, dtype=complex).reshape(dim, dim)
    targets, ctrl = [], []
    for tok in tokens[1:]:
        if tok.startswith("ctrl="):
            ctrl.extend(parse_qubit(c) for c in tok[5:].split(",") if c)
        else:
            targets.append(parse_qubit(tok))
    return GateSpec(kind, targets, matrix, ctrl)


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_gate(g: GateSpec) -> str:
    kind = g.kind
    if g.matrix is not None:
        kind += "(" + ",".join(_fmt_complex(complex(v)) for v in g.matrix.reshape(-1)) + ")"
    parts = [kind] + [f"{r}[{i}]" for r, i in g.targets]
    if g.ctrl:
        parts.append("ctrl=" + ",".join(f"{r}[{i}]" for r, i in g.ctrl))
    return " ".join(parts)


def _kv(tokens: list[str], keys: Sequence[str]) -> tuple[dict[str, int], list[str]]:
    vals, rest = {}, []
    for tok in tokens:
        k, sep, v = tok.partition("=")
        if sep and k in keys:
            vals[k] = int(v)
        else:
            rest.append(tok)
    return vals, rest


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line.split()


def parse_line_protocol(text: str) -> LineProtocol:
    proto: LineProtocol | None = None
    in_measure = False
    for lineno, tokens in _lines(text):
        head = tokens[0]
        try:
            if proto is None:
                if head != "line":
                    raise ValueError("expected header 'line n=.. d=.. r=.. b=.. s=..'")
                vals, rest = _kv(tokens[1:], ("n", "d", "r", "b", "s"))
                missing = {"n", "d", "r", "b"} - set(vals)
                if missing or rest:
                    raise ValueError(f"malformed header (missing {sorted(missing)}, extra {rest})")
                proto = LineProtocol(LineParams(vals["n"], vals["d"], vals["r"], vals["b"], vals.get("s", 0)))
            elif head == "gate":
                if in_measure:
                    proto.measurement.append(parse_gate(tokens[1:]))
                else:
                    vals, rest = _kv(tokens[1:], ("t", "party"))
                    if set(vals) != {"t", "party"}:
                        raise ValueError("gate line needs t=<round> party=<i>")
                    proto.circuits.setdefault((vals["party"], vals["t"]), []).append(parse_gate(rest))
            elif head == "reg":
                vals, rest = _kv(tokens[1:], ("party",))
                if "party" not in vals or len(rest) != 2:
                    raise ValueError("reg line is 'reg party=<i> <name> <width>'")
                proto.declared[(vals["party"], rest[0])] = int(rest[1])
            elif head == "measure":
                vals, _ = _kv(tokens[1:], ("party",))
                if vals.get("party", 0) != 0:
                    raise ValueError("measurement belongs to party 0")
                in_measure = True
            elif head == "output":
                if len(tokens) != 2:
                    raise ValueError("output line is 'output <reg[idx]>'")
                proto.output = parse_qubit(tokens[1])
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (ValueError, QCoreError) as exc:
            raise IRParseError(lineno, str(exc)) from exc
    if proto is None:
        raise IRParseError(0, "missing header")
    return proto


def format_line_protocol(protocol: LineProtocol) -> str:
    p = protocol.params
    out = [f"line n={p.n} d={p.d} r={p.r} b={p.b} s={p.s}"]
    for (party, name), w in sorted(protocol.declared.items()):
        out.append(f"reg party={party} {name} {w}")
    for (party, t) in sorted(protocol.circuits, key=lambda k: (k[1], k[0])):
        for g in protocol.circuits[(party, t)]:
            out.append(f"gate t={t} party={party} {format_gate(g)}")
    out.append("measure party=0")
    out.extend(f"gate {format_gate(g)}" for g in protocol.measurement)
    out.append(f"output {protocol.output[0]}[{protocol.output[1]}]")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- generators

def identity_protocol(params: LineParams) -> LineProtocol:
    return LineProtocol(params)


def relay_protocol(n: int = 1, d: int = 2, b: int = 1) -> LineProtocol:
    """A_d writes y_1 to the left; every middle party forwards it; A_0 outputs it."""
    p = LineParams(n, d, d, b, 0)
    proto = LineProtocol(p)
    proto.circuits[(d, 1)] = [GateSpec("CNOT", [("Y", 0), ("L", 0)])]
    for k in range(1, d):
        party = d - k
        proto.circuits[(party, k + 1)] = [GateSpec("SWAP", [("R", 0), ("L", 0)])]
    proto.output = ("R", 0)
    return proto


def random_line_protocol(params: LineParams, rng: np.random.Generator,
                         max_gates: int = 3) -> LineProtocol:
    """Random valid protocol: local gates, entangling gates and input-controlled gates."""
    proto = LineProtocol(params)

    def qubits_of(party):
        regs = local_registers(params, party)
        return [(r, i) for r, w in regs.items() if r not in INPUT_REGS for i in range(w)]

    def input_of(party):
        if party == 0:
            return "X"
        if party == params.d:
            return "Y"
        return None

    def one_gate(party):
        qs = qubits_of(party)
        inp = input_of(party)
        choices = ["1q", "1q"]
        if len(qs) >= 2:
            choices += ["2q", "u2"]
        if inp:
            choices += ["ctrl", "ctrl"]
        kind = choices[rng.integers(len(choices))]
        if kind == "1q":
            g = ["H", "X", "Z", "S", "T", "U1"][rng.integers(6)]
            q = qs[rng.integers(len(qs))]
            return GateSpec(g, [q], random_unitary(2, rng) if g == "U1" else None)
        if kind in ("2q", "u2"):
            a, b = rng.choice(len(qs), size=2, replace=False)
            if kind == "u2":
                return GateSpec("U2", [qs[a], qs[b]], random_unitary(4, rng))
            g = ["CNOT", "CZ", "SWAP"][rng.integers(3)]
            return GateSpec(g, [qs[a], qs[b]])
        j = int(rng.integers(params.n))
        q = qs[rng.integers(len(qs))]
        if rng.integers(2):
            return GateSpec("CNOT", [(inp, j), q])
        g = ["H", "X", "T", "U1"][rng.integers(4)]
        return GateSpec(g, [q], random_unitary(2, rng) if g == "U1" else None, ctrl=[(inp, j)])

    for t in range(1, params.r + 1):
        for party in range(params.d + 1):
            k = int(rng.integers(0, max_gates + 1))
            if k:
                proto.circuits[(party, t)] = [one_gate(party) for _ in range(k)]
    proto.measurement = [one_gate(0) for _ in range(int(rng.integers(0, 3)))]
    outs = [q for q in qubits_of(0)]
    proto.output = outs[rng.integers(len(outs))]
    return proto
