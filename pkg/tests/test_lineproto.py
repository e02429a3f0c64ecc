import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linedisj.lineproto import (
    IRParseError, InvalidProtocolError, LineParams, LineProtocol, format_line_protocol,
    pad_to_multiple, parse_line_protocol, random_line_protocol, relay_protocol, simulate_line,
    snapshot_side, validate,
)
from linedisj.qcore import GateSpec


def bits(n):
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def test_relay_delivers_first_bit_of_y():
    proto = relay_protocol(n=2, d=3)
    for x in bits(2):
        for y in bits(2):
            (p0, p1), _ = simulate_line(proto, x, y)
            assert abs((p1 if y[0] == "1" else p0) - 1) < 1e-12


def test_relay_from_ir_text():
    text = """
    # y_1 travels from A_2 to A_0
    line n=1 d=2 r=2 b=1 s=0
    gate t=1 party=2 CNOT Y[0] L[0]
    gate t=2 party=1 CNOT R[0] L[0]
    measure party=0
    output R[0]
    """
    proto = parse_line_protocol(text)
    assert validate(proto).ok
    assert simulate_line(proto, "0", "1")[0][1] == pytest.approx(1.0)
    assert simulate_line(proto, "1", "0")[0][0] == pytest.approx(1.0)


def test_validation_flags_writes_to_input():
    p = LineParams(2, 2, 2, 1, 0)
    proto = LineProtocol(p, {(0, 1): [GateSpec("CNOT", [("R", 0), ("X", 1)])]})
    rep = validate(proto)
    assert not rep.ok
    assert any("input register not read-only" in v.message for v in rep.violations)
    assert (rep.violations[0].party, rep.violations[0].round) == (0, 1)


def test_validation_flags_bandwidth():
    text = "line n=1 d=2 r=1 b=1 s=0\nreg party=1 L 2\noutput R[0]\n"
    rep = validate(parse_line_protocol(text))
    assert any("bandwidth exceeded" in v.message for v in rep.violations)
    proto = LineProtocol(LineParams(1, 2, 1, 1, 0), {(1, 1): [GateSpec("H", [("L", 1)])]})
    assert any("bandwidth exceeded" in v.message for v in validate(proto).violations)


def test_validation_flags_foreign_registers_and_memory():
    p = LineParams(1, 2, 1, 1, 1)
    proto = LineProtocol(p, {(1, 1): [GateSpec("H", [("A", 1)]), GateSpec("X", [("Y", 0)])]})
    msgs = [v.message for v in validate(proto).violations]
    assert any("memory exceeded" in m for m in msgs)
    assert any("not held by party 1" in m for m in msgs)
    with pytest.raises(InvalidProtocolError):
        simulate_line(proto, "0", "0")


def test_parse_errors_carry_line_numbers():
    with pytest.raises(IRParseError) as exc:
        parse_line_protocol("line n=1 d=1 r=1 b=1\ngate t=1 party=0 FOO R[0]\n")
    assert exc.value.lineno == 2
    with pytest.raises(IRParseError):
        parse_line_protocol("gate t=1 party=0 H R[0]\n")


def test_pad_to_multiple_preserves_distribution():
    rng = np.random.default_rng(7)
    proto = random_line_protocol(LineParams(2, 3, 4, 1, 1), rng)
    padded = pad_to_multiple(proto)
    assert padded.params.r == 6
    for x in bits(2):
        for y in bits(2):
            a, _ = simulate_line(proto, x, y)
            b, _ = simulate_line(padded, x, y)
            assert np.allclose(a, b, atol=1e-12)


def test_snapshot_sides_at_start():
    _, trace = simulate_line(relay_protocol(n=1, d=2), "0", "0")
    right = snapshot_side(trace, 0, "right")
    left = snapshot_side(trace, 0, "left")
    assert {"Y", "YH", "R_0,0", "L_2,0"} <= right
    assert "X" not in right and "XH" not in right
    assert left == {"X", "XH", "L_1,0", "R_0,0", "L_2,0"}
    assert "Y" not in left
    # middle party's registers are on both sides
    assert right & left == {"R_0,0", "L_2,0"}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_protocols_preserve_norm_and_round_trip(seed):
    rng = np.random.default_rng(seed)
    proto = random_line_protocol(LineParams(2, 2, 3, 1, 1), rng)
    text = format_line_protocol(proto)
    again = parse_line_protocol(text)
    assert format_line_protocol(again) == text
    x, y = bits(2)[seed % 4], bits(2)[(seed // 4) % 4]
    (p0, p1), trace = simulate_line(proto, x, y)
    assert abs(p0 + p1 - 1) < 1e-9
    assert np.allclose(trace.norms(), 1, atol=1e-9)
    assert np.allclose(simulate_line(again, x, y)[0], (p0, p1), atol=1e-12)
    # inputs are never disturbed
    st_final = trace.state(proto.params.r)
    assert st_final.register_value_probabilities("X")[int(x, 2)] == pytest.approx(1)
    assert st_final.register_value_probabilities("Y")[int(y, 2)] == pytest.approx(1)
