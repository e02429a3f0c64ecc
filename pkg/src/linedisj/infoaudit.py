"""Purified inputs and exact information audits of line and two-party protocols.

Inputs stay in the computational basis throughout a protocol, so the global
purified state for a fixed label z is

    |Phi_z> = sum_{x,y} sqrt(mu(x,y|z)) |x>_XH |y>_YH |x>_X |y>_Y |psi_xy>_W

where psi_xy is the work-register state of the (x, y) branch. The reduced
state of any register set is assembled from the branch states directly (see
:class:`BranchEnsemble`), which avoids simulating the purification registers.
Conditioning on Z is the expectation over z of the per-z quantity.
"""
from __future__ import annotations

import csv
import io
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .lineproto import (
    LineProtocol, bits_to_int, ensure_valid, exchange, int_to_bits, run_gates, side_slots,
    simulate_line, work_layout,
)
from .qcore import (
    MAX_QUBITS, PureState, QCoreError, RegisterLayout, SimulationCapError, cmi_from_entropies,
    entropy_of_eigenvalues, pure_state_entropy_oracle,
)
from .twoparty import TwoPartyProtocol, simulate_two_party

PROB_TOL = 1e-12
CI_TOL = 1e-10
BOUND_TOL = 1e-8
QIL_TOL = 1e-6


class DistributionError(ValueError):
    pass


class LeakageBoundViolation(RuntimeError):
    """An audited quantity exceeded a proven bound; this indicates a simulator bug."""


# ---------------------------------------------------------------- distributions

@dataclass(frozen=True)
class InputDistribution:
    support: tuple[tuple[str, str, int, float], ...]

    def __post_init__(self):
        if not self.support:
            raise DistributionError("empty distribution")
        n = len(self.support[0][0])
        merged: dict[tuple[str, str, int], float] = defaultdict(float)
        for x, y, z, p in self.support:
            if len(x) != n or len(y) != n or set(x + y) - {"0", "1"}:
                raise DistributionError(f"bad input pair ({x!r}, {y!r}) for n={n}")
            if p < 0:
                raise DistributionError(f"negative probability {p}")
            merged[(x, y, int(z))] += float(p)
        total = sum(merged.values())
        if abs(total - 1) > PROB_TOL:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "support", tuple(
            (x, y, z, p) for (x, y, z), p in sorted(merged.items()) if p > 0))

    @property
    def n(self) -> int:
        return len(self.support[0][0])

    @property
    def labels(self) -> list[int]:
        return sorted({z for _, _, z, _ in self.support})

    def z_marginal(self) -> dict[int, float]:
        out: dict[int, float] = defaultdict(float)
        for _, _, z, p in self.support:
            out[z] += p
        return dict(out)

    def conditional(self, z: int) -> dict[tuple[str, str], float]:
        pz = self.z_marginal()[z]
        return {(x, y): p / pz for x, y, zz, p in self.support if zz == z}

    def pairs(self) -> list[tuple[str, str]]:
        return sorted({(x, y) for x, y, _, _ in self.support})


_PLINE = re.compile(r"^p\(\s*([01]*)\s*,\s*([01]*)\s*,\s*(-?\d+)\s*\)\s*=\s*(\S+)$")


def parse_distribution(text: str) -> InputDistribution:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _PLINE.match(line)
        if not m:
            raise DistributionError(f"line {lineno}: expected 'p(<x>,<y>,<z>) = <prob>'")
        try:
            p = float(Fraction(m.group(4)))
        except (ValueError, ZeroDivisionError) as exc:
            raise DistributionError(f"line {lineno}: bad probability {m.group(4)!r}") from exc
        rows.append((m.group(1), m.group(2), int(m.group(3)), p))
    return InputDistribution(tuple(rows))


def format_distribution(mu: InputDistribution) -> str:
    return "".join(f"p({x},{y},{z}) = {p!r}\n" for x, y, z, p in mu.support)


def _all_bits(n: int) -> list[str]:
    return [int_to_bits(v, n) for v in range(1 << n)]


def uniform_product(n: int) -> InputDistribution:
    p = 1 / 4 ** n
    return InputDistribution(tuple((x, y, 0, p) for x in _all_bits(n) for y in _all_bits(n)))


def intersecting(n: int) -> InputDistribution:
    """Z = i uniform; x, y uniform subject to x_i = y_i = 1, independent given Z."""
    rows = []
    for i in range(n):
        xs = [x for x in _all_bits(n) if x[i] == "1"]
        p = 1 / (n * len(xs) ** 2)
        rows += [(x, y, i, p) for x in xs for y in xs]
    return InputDistribution(tuple(rows))


def product_mixture(n: int, biases: Sequence[tuple[float, float]] = ((0.25, 0.75), (0.75, 0.5))
                    ) -> InputDistribution:
    """Z uniform over len(biases); given Z=z, bits x_i ~ Bern(px), y_i ~ Bern(py) independently."""
    rows = []
    for z, (px, py) in enumerate(biases):
        for x in _all_bits(n):
            wx = np.prod([px if c == "1" else 1 - px for c in x])
            for y in _all_bits(n):
                wy = np.prod([py if c == "1" else 1 - py for c in y])
                rows.append((x, y, z, float(wx * wy) / len(biases)))
    return InputDistribution(tuple(rows))


def default_families(n: int) -> dict[str, InputDistribution]:
    return {"uniform": uniform_product(n), "intersecting": intersecting(n), "mixture": product_mixture(n)}


def verify_conditional_independence(mu: InputDistribution) -> bool:
    for z in mu.labels:
        cond = mu.conditional(z)
        px: dict[str, float] = defaultdict(float)
        py: dict[str, float] = defaultdict(float)
        for (x, y), p in cond.items():
            px[x] += p
            py[y] += p
        for x in px:
            for y in py:
                if abs(cond.get((x, y), 0.0) - px[x] * py[y]) > CI_TOL:
                    return False
    return True


def _z_width(mu: InputDistribution) -> int:
    k = len(mu.labels)
    return math.ceil(math.log2(k)) if k > 1 else 0


def canonical_purification(mu: InputDistribution, cap: int = MAX_QUBITS) -> PureState:
    """sum sqrt(mu) |x y z>_{XH YH ZH} |x y z>_{X Y Z}; Z labels are encoded by rank."""
    n, zw = mu.n, _z_width(mu)
    lay = RegisterLayout.of(("XH", n), ("YH", n), ("ZH", zw), ("X", n), ("Y", n), ("Z", zw), cap=cap)
    rank = {z: i for i, z in enumerate(mu.labels)}
    amps = np.zeros(lay.dim, dtype=complex)
    for x, y, z, p in mu.support:
        xv, yv, zv = bits_to_int(x), bits_to_int(y), rank[z]
        word = (((xv << n | yv) << zw | zv) << n | xv) << n | yv
        amps[word << zw | zv] = math.sqrt(p)
    return PureState(lay, amps)


# ---------------------------------------------------------------- branch assembly

@dataclass
class BranchEnsemble:
    """Global pure state sum_b c_b |x_b>|y_b>|x_b>|y_b>|psi_b> over XH, YH, X, Y and work registers.

    Entropy of a register set S uses the block decomposition
    rho_S = sum_g A_g A_g^dagger, where g ranges over the basis labels of the
    complement's copies of x and y, and A_g = sum_{b in g} c_b |S-label_b> (x) M_b
    with M_b the branch state reshaped as (S work part) x (complement work part).
    The spectrum of rho_S is the squared singular values of [A_g1 | A_g2 | ...].
    """
    work: RegisterLayout
    branches: list[tuple[int, int, float, np.ndarray]]
    _cache: dict = field(default_factory=dict, repr=False)

    def entropy(self, names: Iterable[str]) -> float:
        s = frozenset(names)
        if s not in self._cache:
            self._cache[s] = self._entropy(s)
        return self._cache[s]

    def _entropy(self, s: frozenset[str]) -> float:
        known = set(self.work.names) | {"XH", "YH", "X", "Y"}
        if s - known:
            raise QCoreError(f"unknown registers {sorted(s - known)}")
        ws = [r for r in self.work.names if r in s]
        wr = [r for r in self.work.names if r not in s]
        n = self.work.total_qubits
        axes = [q for r in ws for q in self.work.qubits(r)] + [q for r in wr for q in self.work.qubits(r)]
        ds = 1 << sum(self.work.width(r) for r in ws)
        dr = (1 << n) // ds
        rows: dict[tuple, int] = {}
        cols: dict[tuple, int] = {}
        blocks = []
        for xv, yv, c, psi in self.branches:
            skey = tuple(v if name in s else None for name, v in (("XH", xv), ("X", xv), ("YH", yv), ("Y", yv)))
            rkey = tuple(v if name not in s else None for name, v in (("XH", xv), ("X", xv), ("YH", yv), ("Y", yv)))
            i = rows.setdefault(skey, len(rows))
            j = cols.setdefault(rkey, len(cols))
            m = psi.reshape((2,) * n).transpose(axes).reshape(ds, dr) if n else psi.reshape(1, 1)
            blocks.append((i, j, c * m))
        big = np.zeros((len(rows) * ds, len(cols) * dr), dtype=complex)
        for i, j, m in blocks:
            big[i * ds:(i + 1) * ds, j * dr:(j + 1) * dr] += m
        if big.shape[0] <= big.shape[1]:
            ev = np.linalg.eigvalsh(big @ big.conj().T)
        else:
            ev = np.linalg.eigvalsh(big.conj().T @ big)
        return entropy_of_eigenvalues(_clip(ev))

    def cmi(self, a: Iterable[str], b: Iterable[str], c: Iterable[str] = ()) -> float:
        return cmi_from_entropies(self.entropy, a, b, c)


def _clip(ev: np.ndarray) -> np.ndarray:
    if ev.min(initial=0) < -1e-9:
        raise QCoreError(f"negative eigenvalue {ev.min()} in assembled state")
    return np.clip(ev, 0, None)


class _Conditioned:
    """Per-z ensembles with the expectation-over-z CMI."""

    def __init__(self, mu: InputDistribution, work: RegisterLayout,
                 branch_state: Callable[[str, str], np.ndarray]):
        self.mu = mu
        self.pz = mu.z_marginal()
        self.ens: dict[int, BranchEnsemble] = {}
        self.branch_state = branch_state
        self.work = work

    def at(self, z: int, k) -> BranchEnsemble:
        key = (z, k)
        if key not in self.ens:
            br = [(bits_to_int(x), bits_to_int(y), math.sqrt(p), self.branch_state(x, y)[k])
                  for (x, y), p in self.mu.conditional(z).items()]
            self.ens[key] = BranchEnsemble(self.work, br)
        return self.ens[key]

    def cmi(self, k, a, b) -> float:
        return sum(pz * self.at(z, k).cmi(a, b) for z, pz in self.pz.items())


# ---------------------------------------------------------------- line audit

def _num(v: float) -> str:
    # drop the sign of values that are zero at the printed precision
    return f"{v:.12f}" if abs(v) >= 5e-13 else f"{0.0:.12f}"


@dataclass
class AuditTrace:
    b: int
    rounds: list[int]
    i_x_d: list[float]
    i_y_c: list[float]

    def bound(self, t: int) -> float:
        return 2 * t * self.b

    def passes(self, tol: float = BOUND_TOL) -> bool:
        return all(v <= self.bound(t) + tol for t, v in zip(self.rounds, self.i_x_d)) and all(
            v <= self.bound(t) + tol for t, v in zip(self.rounds, self.i_y_c))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "I_X_Dt", "I_Y_Ct", "bound_2tb", "pass"])
        for t, a, c in zip(self.rounds, self.i_x_d, self.i_y_c):
            ok = a <= self.bound(t) + BOUND_TOL and c <= self.bound(t) + BOUND_TOL
            w.writerow([t, _num(a), _num(c), self.bound(t), str(ok).lower()])
        return buf.getvalue()


def _require_ci(mu: InputDistribution) -> None:
    if not verify_conditional_independence(mu):
        raise DistributionError("X and Y are not independent given Z")


def line_branch_states(protocol: LineProtocol) -> Callable[[str, str], list[np.ndarray]]:
    @lru_cache(maxsize=None)
    def states(x: str, y: str) -> list[np.ndarray]:
        return simulate_line(protocol, x, y)[1].snapshots
    return states


def audit_line_leakage(protocol: LineProtocol, mu: InputDistribution, check: bool = True) -> AuditTrace:
    """I(X : D_t | Z) and I(Y : C_t | Z) for t = 0..r, D_t/C_t the right/left side with purifiers."""
    _require_ci(mu)
    ensure_valid(protocol)
    p = protocol.params
    if mu.n != p.n:
        raise DistributionError(f"distribution has n={mu.n}, protocol n={p.n}")
    cond = _Conditioned(mu, work_layout(p), line_branch_states(protocol))
    right, left = side_slots(p, "right"), side_slots(p, "left")
    rounds, ixd, iyc = [], [], []
    for t in range(p.r + 1):
        rounds.append(t)
        ixd.append(cond.cmi(t, {"X"}, right))
        iyc.append(cond.cmi(t, {"Y"}, left))
    trace = AuditTrace(p.b, rounds, ixd, iyc)
    if check and not trace.passes():
        raise LeakageBoundViolation("information bound exceeded:\n" + trace.to_csv())
    return trace


def monolithic_line_audit(protocol: LineProtocol, mu: InputDistribution, cap: int = 20) -> AuditTrace:
    """Reference path: simulate the full purified state with quantum X, Y and Z."""
    _require_ci(mu)
    ensure_valid(protocol)
    p = protocol.params
    pur = canonical_purification(mu, cap=10**9)
    work = work_layout(p, cap=10**9)
    lay = pur.layout.concat(work)
    if lay.total_qubits > cap:
        raise SimulationCapError(f"monolithic audit needs {lay.total_qubits} qubits, cap {cap}")
    amps = np.kron(pur.amplitudes, np.eye(1, work.dim, 0).reshape(-1))
    zset = {"Z"} if "Z" in lay else set()
    right = (side_slots(p, "right") & set(lay.names))
    left = (side_slots(p, "left") & set(lay.names))
    rounds, ixd, iyc = [], [], []

    def measure(a, t):
        h = pure_state_entropy_oracle(PureState(lay, a))
        rounds.append(t)
        ixd.append(cmi_from_entropies(h, {"X"}, right, zset))
        iyc.append(cmi_from_entropies(h, {"Y"}, left, zset))

    measure(amps, 0)
    for t in range(1, p.r + 1):
        for party in range(p.d + 1):
            amps = run_gates(amps, lay, protocol.global_circuit(party, t))
        amps = exchange(amps, p, lay)
        measure(amps, t)
    return AuditTrace(p.b, rounds, ixd, iyc)


# ---------------------------------------------------------------- two-party leakage

@dataclass
class LeakageReport:
    qil: float
    il: float
    qil_terms: list[float]
    il_terms: list[float]
    qil_bound: float | None = None
    boundary_literal: list[tuple[float, float]] = field(default_factory=list)
    boundary_with_port: list[tuple[float, float]] = field(default_factory=list)

    @property
    def qil_ok(self) -> bool:
        return self.qil_bound is None or self.qil <= self.qil_bound + QIL_TOL

    @property
    def literal_identity_ok(self) -> bool:
        return all(abs(a - b) <= BOUND_TOL for a, b in self.boundary_literal)

    @property
    def port_identity_ok(self) -> bool:
        return all(abs(a - b) <= BOUND_TOL for a, b in self.boundary_with_port)


def leakage_two_party(protocol: TwoPartyProtocol, mu: InputDistribution,
                      line: LineProtocol | None = None) -> LeakageReport:
    """Round-summed leakage (with purifiers) and loss (without) of a two-party protocol.

    If ``line`` is the protocol that ``protocol`` was compiled from, the Alice-round
    terms are also compared against the line audit at block boundaries, both
    against D_{kd} alone and against D_{kd} plus the port slot R0 that Bob holds.
    """
    _require_ci(mu)
    if mu.n != protocol.n:
        raise DistributionError(f"distribution has n={mu.n}, protocol n={protocol.n}")

    @lru_cache(maxsize=None)
    def states(x, y):
        return simulate_two_party(protocol, x, y)[1].snapshots

    cond = _Conditioned(mu, protocol.work_layout(cap=10**9), states)
    hold = protocol.holdings()
    qil_terms, il_terms = [], []
    for i in range(1, protocol.m + 1):
        alice, bob = hold[i]
        if i % 2:
            qil_terms.append(cond.cmi(i, {"X"}, bob))
            il_terms.append(cond.cmi(i, {"X"}, bob - {"YH"}))
        else:
            qil_terms.append(cond.cmi(i, {"Y"}, alice))
            il_terms.append(cond.cmi(i, {"Y"}, alice - {"XH"}))
    rep = LeakageReport(sum(qil_terms), sum(il_terms), qil_terms, il_terms)
    p = protocol.source
    if p is not None:
        rep.qil_bound = 4 * p.r ** 2 * p.b / p.d
    if line is not None:
        p = line.params
        lc = _Conditioned(mu, work_layout(p), line_branch_states(line))
        right = side_slots(p, "right")
        for k in range(1, protocol.m // 2 + 1):
            term = qil_terms[2 * k - 2]
            rep.boundary_literal.append((term, lc.cmi(k * p.d, {"X"}, right)))
            rep.boundary_with_port.append((term, lc.cmi(k * p.d, {"X"}, right | {"R0"})))
    return rep
