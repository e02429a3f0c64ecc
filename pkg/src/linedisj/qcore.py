"""Dense state-vector and density-matrix algebra over named qubit registers.

Amplitude ordering is register-major: the first register of a layout holds the
most significant bits, and within a register index 0 is the most significant
qubit. All entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_QUBITS = 26
NORM_TOL = 1e-9
EIG_CLIP = 1e-9
EIG_CUTOFF = 1e-12


class QCoreError(ValueError):
    pass


class SimulationCapError(QCoreError):
    pass


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]
    cap: int = MAX_QUBITS

    def __post_init__(self):
        regs = tuple((str(n), int(w)) for n, w in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise QCoreError(f"duplicate register names in {names}")
        for name, width in regs:
            if width < 1:
                raise QCoreError(f"register {name} has width {width} < 1")
        if self.total_qubits > self.cap:
            raise SimulationCapError(
                f"layout needs {self.total_qubits} qubits, cap is {self.cap}")

    @classmethod
    def of(cls, *registers: tuple[str, int], cap: int = MAX_QUBITS) -> "RegisterLayout":
        return cls(tuple(r for r in registers if r[1] > 0), cap=cap)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def total_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def dim(self) -> int:
        return 1 << self.total_qubits

    def width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise QCoreError(f"unknown register {name!r}")

    def offset(self, name: str) -> int:
        off = 0
        for n, w in self.registers:
            if n == name:
                return off
            off += w
        raise QCoreError(f"unknown register {name!r}")

    def qubits(self, name: str) -> list[int]:
        off = self.offset(name)
        return list(range(off, off + self.width(name)))

    def qubit(self, name: str, idx: int) -> int:
        w = self.width(name)
        if not 0 <= idx < w:
            raise QCoreError(f"qubit {name}[{idx}] out of range (width {w})")
        return self.offset(name) + idx

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.registers)

    def sub(self, names: Iterable[str]) -> "RegisterLayout":
        """Layout of the given registers, kept in this layout's order."""
        keep = set(names)
        unknown = keep - set(self.names)
        if unknown:
            raise QCoreError(f"unknown registers {sorted(unknown)}")
        return RegisterLayout(tuple(r for r in self.registers if r[0] in keep), cap=self.cap)

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers, cap=max(self.cap, other.cap))


# ---------------------------------------------------------------- gates

_S2 = 1 / np.sqrt(2)
FIXED_GATES: dict[str, np.ndarray] = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_ccnot = np.eye(8, dtype=complex)
_ccnot[6:, 6:] = [[0, 1], [1, 0]]
FIXED_GATES["CCNOT"] = _ccnot

ARITY = {"H": 1, "X": 1, "Z": 1, "S": 1, "T": 1, "U1": 1,
         "CNOT": 2, "CZ": 2, "SWAP": 2, "U2": 2, "CCNOT": 3}
# Positions whose basis value a gate never changes; read-only registers may sit there.
CONTROL_POSITIONS = {"CNOT": (0,), "CCNOT": (0, 1), "CZ": (0, 1)}

Qubit = tuple[str, int]


def is_unitary(m: np.ndarray, tol: float = NORM_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(
        m.conj().T @ m, np.eye(m.shape[0]), atol=tol)


@dataclass(frozen=True)
class GateSpec:
    """A gate on register-qualified qubits.

    ``ctrl`` lists extra control qubits (used for input-register bits); the
    gate fires only when all of them are 1.
    """
    kind: str
    targets: tuple[Qubit, ...]
    matrix: np.ndarray | None = field(default=None, compare=False)
    ctrl: tuple[Qubit, ...] = ()

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple((str(r), int(i)) for r, i in self.targets))
        object.__setattr__(self, "ctrl", tuple((str(r), int(i)) for r, i in self.ctrl))
        if kind not in ARITY:
            raise QCoreError(f"unknown gate kind {kind!r}")
        if len(self.targets) != ARITY[kind]:
            raise QCoreError(f"{kind} takes {ARITY[kind]} targets, got {len(self.targets)}")
        if kind in ("U1", "U2"):
            if self.matrix is None:
                raise QCoreError(f"{kind} needs an explicit matrix")
            m = np.asarray(self.matrix, dtype=complex)
            dim = 2 ** ARITY[kind]
            if m.shape != (dim, dim):
                raise QCoreError(f"{kind} matrix must be {dim}x{dim}")
            if not is_unitary(m):
                raise QCoreError(f"{kind} matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        allq = self.targets + self.ctrl
        if len(set(allq)) != len(allq):
            raise QCoreError(f"gate {kind} repeats a qubit: {allq}")

    def unitary(self) -> np.ndarray:
        return self.matrix if self.matrix is not None else FIXED_GATES[self.kind]

    @property
    def written(self) -> tuple[Qubit, ...]:
        """Target qubits whose basis value the gate may change."""
        keep = CONTROL_POSITIONS.get(self.kind, ())
        return tuple(q for i, q in enumerate(self.targets) if i not in keep)

    @property
    def qubits(self) -> tuple[Qubit, ...]:
        return self.targets + self.ctrl

    def registers(self) -> set[str]:
        return {r for r, _ in self.qubits}

    def renamed(self, mapping: Callable[[str], str]) -> "GateSpec":
        return GateSpec(self.kind, tuple((mapping(r), i) for r, i in self.targets),
                        self.matrix, tuple((mapping(r), i) for r, i in self.ctrl))


def apply_matrix(amps: np.ndarray, n: int, u: np.ndarray, qubits: Sequence[int],
                 controls: Sequence[int] = ()) -> np.ndarray:
    """Apply ``u`` to global qubit positions ``qubits`` (first = most significant)."""
    psi = np.array(amps, dtype=complex).reshape((2,) * n) if n else np.array(amps, dtype=complex)
    if n == 0:
        return psi
    sl = [slice(None)] * n
    for c in controls:
        sl[c] = 1
    sl = tuple(sl)
    sub = psi[sl]
    remaining = [q for q in range(n) if q not in set(controls)]
    axes = [remaining.index(q) for q in qubits]
    k = len(qubits)
    moved = np.moveaxis(sub, axes, list(range(k)))
    shape = moved.shape
    out = (u @ moved.reshape(1 << k, -1)).reshape(shape)
    psi[sl] = np.moveaxis(out, list(range(k)), axes)
    return psi.reshape(-1)


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class PureState:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape[0] != self.layout.dim:
            raise QCoreError(f"expected {self.layout.dim} amplitudes, got {a.shape[0]}")
        norm = float(np.vdot(a, a).real)
        if abs(norm - 1) > NORM_TOL:
            raise QCoreError(f"state norm^2 {norm} differs from 1")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def basis(cls, layout: RegisterLayout, values: dict[str, int] | None = None) -> "PureState":
        """Computational basis state; unlisted registers are |0>."""
        values = values or {}
        idx = 0
        for name, width in layout.registers:
            v = int(values.get(name, 0))
            if not 0 <= v < (1 << width):
                raise QCoreError(f"value {v} does not fit register {name}[{width}]")
            idx = (idx << width) | v
        a = np.zeros(layout.dim, dtype=complex)
        a[idx] = 1
        return cls(layout, a)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(self.layout.concat(other.layout), np.kron(self.amplitudes, other.amplitudes))

    def reorder(self, names: Sequence[str]) -> "PureState":
        """Same state with registers permuted into ``names`` order."""
        if sorted(names) != sorted(self.layout.names):
            raise QCoreError("reorder needs a permutation of the layout's registers")
        perm = [q for nm in names for q in self.layout.qubits(nm)]
        n = self.layout.total_qubits
        psi = self.amplitudes.reshape((2,) * n).transpose(perm) if n else self.amplitudes
        layout = RegisterLayout(tuple((nm, self.layout.width(nm)) for nm in names), cap=self.layout.cap)
        return PureState(layout, psi.reshape(-1))

    def register_value_probabilities(self, name: str) -> np.ndarray:
        n = self.layout.total_qubits
        qs = self.layout.qubits(name)
        p = np.abs(self.amplitudes.reshape((2,) * n)) ** 2
        others = tuple(q for q in range(n) if q not in qs)
        return p.sum(axis=others).reshape(-1)

    def qubit_probabilities(self, name: str, idx: int) -> tuple[float, float]:
        n = self.layout.total_qubits
        q = self.layout.qubit(name, idx)
        p = np.abs(self.amplitudes.reshape((2,) * n)) ** 2
        p = p.sum(axis=tuple(i for i in range(n) if i != q))
        return float(p[0]), float(p[1])

    def density(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(self.layout, np.outer(a, a.conj()))

    def reduced(self, keep: Iterable[str]) -> "DensityMatrix":
        return reduced_density(self, keep)


def apply_gate(state: PureState, gate: GateSpec) -> PureState:
    lay = state.layout
    qubits = [lay.qubit(r, i) for r, i in gate.targets]
    controls = [lay.qubit(r, i) for r, i in gate.ctrl]
    amps = apply_matrix(state.amplitudes, lay.total_qubits, gate.unitary(), qubits, controls)
    return PureState(lay, amps)


def apply_gates(state: PureState, gates: Iterable[GateSpec]) -> PureState:
    for g in gates:
        state = apply_gate(state, g)
    return state


@dataclass(frozen=True)
class DensityMatrix:
    layout: RegisterLayout
    matrix: np.ndarray
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise QCoreError(f"density matrix shape {m.shape} does not match layout")
        if self.check:
            if not np.allclose(m, m.conj().T, atol=NORM_TOL):
                raise QCoreError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1) > NORM_TOL:
                raise QCoreError(f"density matrix trace {tr} differs from 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_diagonal(cls, layout: RegisterLayout, probs: Sequence[float]) -> "DensityMatrix":
        return cls(layout, np.diag(np.asarray(probs, dtype=complex)))

    @classmethod
    def mixture(cls, parts: Iterable[tuple[float, PureState]]) -> "DensityMatrix":
        parts = list(parts)
        layout = parts[0][1].layout
        m = sum(p * np.outer(s.amplitudes, s.amplitudes.conj()) for p, s in parts)
        return cls(layout, m)

    def eigenvalues(self) -> np.ndarray:
        return _checked_eigenvalues(self.matrix)


def _checked_eigenvalues(m: np.ndarray) -> np.ndarray:
    if not np.allclose(m, m.conj().T, atol=NORM_TOL):
        raise QCoreError("matrix is not Hermitian")
    ev = np.linalg.eigvalsh((m + m.conj().T) / 2)
    if ev.size and ev.min() < -EIG_CLIP:
        raise QCoreError(f"negative eigenvalue {ev.min():.3e} beyond tolerance")
    return np.clip(ev, 0.0, None)


def reduced_density(state: PureState, keep: Iterable[str]) -> DensityMatrix:
    """Reduced state of a pure state on ``keep``, registers in layout order."""
    lay = state.layout
    keep = set(keep)
    sub = lay.sub(keep)
    n = lay.total_qubits
    kq = [q for nm in sub.names for q in lay.qubits(nm)]
    rq = [q for q in range(n) if q not in set(kq)]
    psi = state.amplitudes.reshape((2,) * n).transpose(kq + rq) if n else state.amplitudes
    a = psi.reshape(1 << len(kq), 1 << len(rq))
    return DensityMatrix(sub, a @ a.conj().T)


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    lay = rho.layout
    keep = set(keep)
    sub = lay.sub(keep)
    n = lay.total_qubits
    if sub.names == lay.names:
        return rho
    kq = [q for nm in sub.names for q in lay.qubits(nm)]
    rq = [q for q in range(n) if q not in set(kq)]
    t = rho.matrix.reshape((2,) * (2 * n))
    perm = kq + rq + [n + q for q in kq] + [n + q for q in rq]
    dk, dr = 1 << len(kq), 1 << len(rq)
    t = t.transpose(perm).reshape(dk, dr, dk, dr)
    return DensityMatrix(sub, np.einsum("ijkj->ik", t))


def entropy_of_eigenvalues(ev: np.ndarray) -> float:
    ev = ev[ev > EIG_CUTOFF]
    return float(-(ev * np.log2(ev)).sum())


def von_neumann_entropy(rho: DensityMatrix) -> float:
    return entropy_of_eigenvalues(rho.eigenvalues())


def matrix_entropy(m: np.ndarray) -> float:
    """Entropy in bits of an unnormalised-layout density matrix given as an array."""
    return entropy_of_eigenvalues(_checked_eigenvalues(m))


def _disjoint(*parts: Iterable[str]) -> list[frozenset[str]]:
    sets = [frozenset(p) for p in parts]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if sets[i] & sets[j]:
                raise QCoreError(f"register sets overlap: {sorted(sets[i] & sets[j])}")
    return sets


def mutual_information(rho: DensityMatrix, part_x: Iterable[str], part_y: Iterable[str]) -> float:
    x, y = _disjoint(part_x, part_y)
    h = lambda s: von_neumann_entropy(partial_trace(rho, s)) if s else 0.0
    return h(x) + h(y) - h(x | y)


def cmi_from_entropies(h: Callable[[frozenset[str]], float], x: Iterable[str],
                       y: Iterable[str], z: Iterable[str]) -> float:
    """I(X:Y|Z) = H(XZ) + H(YZ) - H(XYZ) - H(Z) for any entropy oracle ``h``."""
    x, y, z = _disjoint(x, y, z)
    return h(x | z) + h(y | z) - h(x | y | z) - h(z)


def conditional_mutual_information(rho: DensityMatrix, part_x: Iterable[str],
                                   part_y: Iterable[str], part_z: Iterable[str] = ()) -> float:
    def h(s: frozenset[str]) -> float:
        return von_neumann_entropy(partial_trace(rho, s)) if s else 0.0
    return cmi_from_entropies(h, part_x, part_y, part_z)


def pure_state_entropy_oracle(state: PureState) -> Callable[[frozenset[str]], float]:
    """Entropy oracle for subsets of a pure state, tracing whichever side is smaller."""
    names = frozenset(state.layout.names)
    cache: dict[frozenset[str], float] = {}

    def h(s: frozenset[str]) -> float:
        s = frozenset(s)
        comp = names - s
        key = min(s, comp, key=lambda r: sum(state.layout.width(n) for n in r))
        if not key:
            return 0.0
        if key not in cache:
            cache[key] = von_neumann_entropy(reduced_density(state, key))
        return cache[key]
    return h


# ---------------------------------------------------------------- random helpers

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(layout: RegisterLayout, rng: np.random.Generator) -> PureState:
    a = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    return PureState(layout, a / np.linalg.norm(a))
