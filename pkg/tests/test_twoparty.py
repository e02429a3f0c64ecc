import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linedisj.lineproto import (
    InvalidProtocolError, LineParams, LineProtocol, pad_to_multiple, random_line_protocol,
    relay_protocol, simulate_line,
)
from linedisj.qcore import GateSpec
from linedisj.twoparty import (
    ALICE, BOB, block_message_sizes, communication_total, compile_line_to_two_party,
    format_two_party, parse_two_party, pipeline_schedule, simulate_two_party, validate_two_party,
)


def bits(n):
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def test_round_counts():
    proto = random_line_protocol(LineParams(1, 3, 6, 1, 0), np.random.default_rng(0))
    assert compile_line_to_two_party(proto).m == 4
    assert compile_line_to_two_party(LineProtocol(LineParams(1, 3, 3, 1, 0))).m == 2


def test_requires_padding():
    with pytest.raises(InvalidProtocolError):
        compile_line_to_two_party(LineProtocol(LineParams(1, 3, 4, 1, 0)))


def test_message_sizes():
    cp = compile_line_to_two_party(LineProtocol(LineParams(1, 2, 2, 1, 1)))
    acc = communication_total(cp)
    # R0, then L1 A1 R1 of the middle party
    assert acc.per_round[0] == (1, ALICE, 4)
    assert block_message_sizes(LineParams(1, 2, 2, 1, 1)) == (4, 4)
    assert acc.per_round[1][2] == 4
    assert acc.total == sum(q for *_, q in acc.per_round)
    assert acc.to_csv().splitlines()[0] == "round,sender,qubits"


def test_bob_keeps_his_memory_and_incoming_port():
    cp = compile_line_to_two_party(LineProtocol(LineParams(1, 3, 3, 1, 1)))
    alice_keep, bob_keep = cp.retained()
    assert {"X", "A0"} <= alice_keep
    assert {"Y", "A3", "L3"} <= bob_keep


def test_identity_protocol_outputs_zero():
    cp = compile_line_to_two_party(LineProtocol(LineParams(2, 2, 4, 1, 1)))
    for x in bits(2):
        assert simulate_two_party(cp, x, "11")[0] == pytest.approx((1.0, 0.0))


def test_relay_survives_compilation():
    cp = compile_line_to_two_party(relay_protocol(n=2, d=3))
    for y in bits(2):
        (p0, p1), _ = simulate_two_party(cp, "00", y)
        assert (p1 if y[0] == "1" else p0) == pytest.approx(1.0)


def test_validation_catches_foreign_register_and_alternation():
    cp = compile_line_to_two_party(relay_protocol(n=1, d=2))
    cp.rounds[0].gates.append(GateSpec("H", [("L2", 0)]))
    assert any("not held" in e for e in validate_two_party(cp))
    cp = compile_line_to_two_party(relay_protocol(n=1, d=2))
    cp.rounds[1].sender = ALICE
    assert any("alternate" in e for e in validate_two_party(cp))


def test_ir_round_trip():
    cp = compile_line_to_two_party(random_line_protocol(LineParams(1, 2, 4, 1, 1), np.random.default_rng(3)))
    text = format_two_party(cp)
    again = parse_two_party(text)
    assert format_two_party(again) == text
    for x, y in itertools.product(bits(1), bits(1)):
        assert np.allclose(simulate_two_party(again, x, y)[0], simulate_two_party(cp, x, y)[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.integers(0, 2), st.integers(1, 6))
def test_compiled_state_matches_line_state(seed, d, s, r):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 2
    proto = pad_to_multiple(random_line_protocol(LineParams(n, d, r, 1, s), rng))
    cp = compile_line_to_two_party(proto)
    assert cp.m == 2 * proto.params.r // d
    x, y = bits(n)[seed % (1 << n)], bits(n)[(seed >> 3) % (1 << n)]
    out_l, tr = simulate_line(proto, x, y)
    out_2, tt = simulate_two_party(cp, x, y)
    assert np.allclose(out_l, out_2, atol=1e-9)
    assert np.allclose(tt.norms(), 1, atol=1e-9)
    for k in range(1, cp.m // 2 + 1):
        assert np.allclose(tt.state(2 * k).amplitudes, tr.state(k * d).amplitudes, atol=1e-9)


def test_transcript_partitions_cover_everything():
    cp = compile_line_to_two_party(LineProtocol(LineParams(1, 2, 2, 1, 1)))
    _, tt = simulate_two_party(cp, "1", "0")
    names = {r for r, _ in cp.registers} | {"XH", "YH"}
    for k in range(cp.m + 1):
        assert tt.E(k) | tt.F(k) == names and not tt.E(k) & tt.F(k)
    assert "XH" in tt.E(0) and "YH" in tt.F(0)


def test_pipeline_schedule():
    assert pipeline_schedule(0, 5, 4, 1) == 4
    assert pipeline_schedule(7, 1, 4, 2) == 11
    assert pipeline_schedule(4, 4, 4, 1) == 20 <= 2 * np.sqrt(64 * 4)
    with pytest.raises(ValueError):
        pipeline_schedule(1, 1, 1, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 8))
def test_pipeline_schedule_monotone(T, q, d, b):
    base = pipeline_schedule(T, q, d, b)
    assert pipeline_schedule(T + 1, q, d, b) >= base
    assert pipeline_schedule(T, q + 1, d, b) >= base
    assert pipeline_schedule(T, q, d + 1, b) >= base
