import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linedisj.qcore import (
    DensityMatrix, GateSpec, PureState, QCoreError, RegisterLayout, SimulationCapError, apply_matrix,
    apply_gate, conditional_mutual_information, mutual_information, partial_trace,
    random_state, random_unitary, reduced_density, von_neumann_entropy,
)

ONE = RegisterLayout.of(("q", 1))
TWO = RegisterLayout.of(("a", 1), ("b", 1))


def bell():
    return PureState(TWO, np.array([1, 0, 0, 1]) / np.sqrt(2))


def binary_entropy(p):
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


def test_layout_invariants():
    with pytest.raises(QCoreError):
        RegisterLayout((("a", 1), ("a", 2)))
    with pytest.raises(QCoreError):
        RegisterLayout((("a", 0),))
    with pytest.raises(SimulationCapError):
        RegisterLayout((("a", 27),))
    lay = RegisterLayout.of(("a", 2), ("b", 0), ("c", 3))
    assert lay.names == ("a", "c") and lay.total_qubits == 5
    assert lay.qubit("c", 1) == 3


def test_x_flips_zero():
    s = apply_gate(PureState.basis(ONE), GateSpec("X", [("q", 0)]))
    assert np.allclose(s.amplitudes, [0, 1])


def test_register_major_ordering():
    lay = RegisterLayout.of(("a", 2), ("b", 1))
    s = PureState.basis(lay, {"a": 2, "b": 1})
    # a=10, b=1 -> binary 101
    assert s.amplitudes[5] == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_hadamard_is_involution(seed, target):
    lay = RegisterLayout.of(("r", 3))
    s = random_state(lay, np.random.default_rng(seed))
    h = GateSpec("H", [("r", target)])
    assert np.allclose(apply_gate(apply_gate(s, h), h).amplitudes, s.amplitudes, atol=1e-12)


def test_cnot_makes_bell():
    s = PureState(TWO, np.array([1, 0, 1, 0]) / np.sqrt(2))
    out = apply_gate(s, GateSpec("CNOT", [("a", 0), ("b", 0)]))
    assert np.allclose(out.amplitudes, bell().amplitudes)


def test_classical_control():
    lay = RegisterLayout.of(("c", 1), ("t", 1))
    g = GateSpec("X", [("t", 0)], ctrl=[("c", 0)])
    assert apply_gate(PureState.basis(lay, {"c": 0}), g).amplitudes[0] == 1
    assert apply_gate(PureState.basis(lay, {"c": 1}), g).amplitudes[3] == 1


def test_gate_errors():
    with pytest.raises(QCoreError):
        GateSpec("U1", [("q", 0)], matrix=np.array([[1, 1], [0, 1]]))
    with pytest.raises(QCoreError):
        GateSpec("CNOT", [("q", 0), ("q", 0)])
    with pytest.raises(QCoreError):
        apply_gate(PureState.basis(ONE), GateSpec("X", [("q", 1)]))


def test_partial_trace_bell_half():
    for keep in ("a", "b"):
        r = partial_trace(bell().density(), {keep})
        assert np.allclose(r.matrix, np.eye(2) / 2)


def test_partial_trace_keep_all_is_identity():
    rho = bell().density()
    assert np.allclose(partial_trace(rho, {"a", "b"}).matrix, rho.matrix)


def test_partial_trace_weighted():
    # sqrt(1/4)|00> + sqrt(3/4)|11>: tracing either qubit leaves diag(1/4, 3/4)
    s = PureState(TWO, np.array([0.5, 0, 0, np.sqrt(0.75)]))
    r = partial_trace(s.density(), {"a"})
    assert np.allclose(r.matrix, np.diag([0.25, 0.75]))
    assert np.allclose(reduced_density(s, {"b"}).matrix, np.diag([0.25, 0.75]))


def test_partial_trace_unknown_register():
    with pytest.raises(QCoreError):
        partial_trace(bell().density(), {"zz"})


def test_entropies():
    assert abs(von_neumann_entropy(random_state(TWO, np.random.default_rng(1)).density())) < 1e-9
    assert abs(von_neumann_entropy(DensityMatrix(ONE, np.eye(2) / 2)) - 1) < 1e-12
    h = von_neumann_entropy(DensityMatrix.from_diagonal(ONE, [0.25, 0.75]))
    assert abs(h - binary_entropy(0.25)) < 1e-12
    assert abs(h - 0.811278) < 1e-6


def test_entropy_rejects_bad_input():
    with pytest.raises(QCoreError):
        DensityMatrix(ONE, np.array([[0.5, 1], [0, 0.5]]))
    bad = DensityMatrix(ONE, np.diag([1.5, -0.5]))
    with pytest.raises(QCoreError):
        von_neumann_entropy(bad)


def test_mutual_information_examples():
    prod = PureState.basis(TWO).density()
    assert abs(mutual_information(prod, {"a"}, {"b"})) < 1e-9
    classical = DensityMatrix.from_diagonal(TWO, [0.5, 0, 0, 0.5])
    assert abs(mutual_information(classical, {"a"}, {"b"}) - 1) < 1e-12
    assert abs(mutual_information(bell().density(), {"a"}, {"b"}) - 2) < 1e-12
    with pytest.raises(QCoreError):
        mutual_information(prod, {"a"}, {"a", "b"})


def test_cmi_examples():
    lay = RegisterLayout.of(("x", 1), ("y", 1), ("z", 1))
    rho = bell().density()
    assert abs(conditional_mutual_information(rho, {"a"}, {"b"}, ())
               - mutual_information(rho, {"a"}, {"b"})) < 1e-12
    # X = Y = Z uniform
    ghz_classical = DensityMatrix.from_diagonal(lay, [0.5, 0, 0, 0, 0, 0, 0, 0.5])
    assert abs(conditional_mutual_information(ghz_classical, {"x"}, {"y"}, {"z"})) < 1e-12
    # X = Y uniform, Z independent uniform: H(XZ)+H(YZ)-H(XYZ)-H(Z) = 2+2-2-1
    p = np.zeros(8)
    for xy in (0, 1):
        for z in (0, 1):
            p[(xy << 2) | (xy << 1) | z] = 0.25
    rho = DensityMatrix.from_diagonal(lay, p)
    assert abs(conditional_mutual_information(rho, {"x"}, {"y"}, {"z"}) - 1) < 1e-12


def _random_parts(rng, names, k):
    """Split a random subset of names into k disjoint non-empty-or-empty parts."""
    labels = rng.integers(0, k + 1, size=len(names))
    parts = [{n for n, l in zip(names, labels) if l == i} for i in range(k)]
    if not parts[0]:
        parts[0] = {names[0]}
        for p in parts[1:]:
            p.discard(names[0])
    return parts


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    widths = rng.integers(1, 3, size=int(rng.integers(3, 6)))
    while widths.sum() > 8:
        widths = widths[:-1]
    lay = RegisterLayout.of(*[(f"r{i}", int(w)) for i, w in enumerate(widths)])
    return rng, lay, random_state(lay, rng)


def test_strong_subadditivity_and_entropy_bound():
    for seed in range(200):
        rng, lay, psi = _random_instance(seed)
        a, b, c = _random_parts(rng, list(lay.names), 3)
        rho = psi.density()
        assert conditional_mutual_information(rho, a, b - a, c - a - b) >= -1e-8
        for name in lay.names:
            assert von_neumann_entropy(reduced_density(psi, {name})) <= lay.width(name) + 1e-9


def test_data_processing_and_extra_register_bound():
    for seed in range(200):
        rng, lay, psi = _random_instance(seed)
        names = list(lay.names)
        rng.shuffle(names)
        x, w, y = {names[0]}, {names[1]}, {names[2]}
        z = set(names[3:4])
        rho = psi.density()
        base = conditional_mutual_information(rho, x, y, z)
        more = conditional_mutual_information(rho, x, w | y, z)
        h_w = von_neumann_entropy(reduced_density(psi, w))
        assert more >= base - 1e-8
        assert more <= 2 * h_w + base + 1e-8


def test_isometry_invariance():
    for seed in range(200):
        rng, lay, psi = _random_instance(seed)
        names = list(lay.names)
        rng.shuffle(names)
        x, y, z = {names[0]}, {names[1]}, set(names[2:3])
        target = names[int(rng.integers(0, min(3, len(names))))]
        # attach a fresh qubit to the target part and scramble target + ancilla
        ext = lay.concat(RegisterLayout.of(("anc", 1)))
        amps = np.kron(psi.amplitudes, [1, 0])
        qubits = lay.qubits(target) + [ext.qubit("anc", 0)]
        u = random_unitary(1 << len(qubits), rng)
        amps = apply_matrix(amps, ext.total_qubits, u, qubits)
        grow = lambda part: part | {"anc"} if target in part else part
        before = conditional_mutual_information(psi.density(), x, y, z)
        after = conditional_mutual_information(PureState(ext, amps).density(), grow(x), grow(y), grow(z))
        assert abs(before - after) < 1e-8
