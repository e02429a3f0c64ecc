"""Command-line front end.

Exit codes: 0 ok, 2 parse or validation failure, 3 simulation cap exceeded,
4 failed precondition, 5 an audited bound does not hold, 1 anything else.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import bounds, disjwalk, infoaudit, lineproto, querymodel, twoparty
from .qcore import QCoreError, SimulationCapError

EXIT_OK, EXIT_INTERNAL, EXIT_PARSE, EXIT_CAP, EXIT_PRECONDITION, EXIT_BOUND = 0, 1, 2, 3, 4, 5

CONFIG_KEYS = {"n", "d", "b", "s", "r", "t", "seed", "x", "y", "grid", "family",
               "c_eps", "c_delta", "c", "round_factor"}
INT_KEYS = {"n", "d", "b", "s", "r", "t", "seed"}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    out: str | None = None
    n: int | None = None
    d: int | None = None
    b: int | None = None
    s: int | None = None
    r: int | None = None
    t: int | None = None
    x: str | None = None
    y: str | None = None
    grid: str | None = None
    family: str = "uniform"
    seed: int = 0
    walk: disjwalk.WalkConfig = disjwalk.DEFAULT_CONFIG


def parse_config_file(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or key not in CONFIG_KEYS:
            raise CliError(EXIT_PARSE, f"config line {lineno}: expected '<key> = <value>' with a known key")
        values[key] = val.strip()
    return values


def build_config(ns: argparse.Namespace) -> RunConfig:
    values: dict[str, str] = {}
    if ns.config:
        values = parse_config_file(_read(ns.config))
    cfg = RunConfig(ns.command)
    for key in ("n", "d", "b", "s", "r", "t", "seed", "x", "y", "grid", "family"):
        raw = getattr(ns, key, None)
        if raw is None and key in values:
            raw = values[key]
        if raw is None:
            continue
        if key in INT_KEYS:
            try:
                raw = int(raw)
            except ValueError:
                raise CliError(EXIT_PARSE, f"{key} must be an integer") from None
            if raw < (0 if key in ("s", "seed") else 1):
                raise CliError(EXIT_PRECONDITION, f"{key}={raw} out of range")
        setattr(cfg, key, raw)
    try:
        cfg.walk = disjwalk.WalkConfig.from_mapping(values)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"bad walk constant: {exc}") from None
    for bits in (cfg.x, cfg.y):
        if bits is not None and (not bits or set(bits) - {"0", "1"}):
            raise CliError(EXIT_PRECONDITION, f"input {bits!r} is not a bit string")
    cfg.inputs = list(ns.inputs or [])
    cfg.out = ns.out
    return cfg


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_PRECONDITION, f"cannot read {path}: {exc.strerror}") from None


def _parse(path: str, parser: Callable[[str], object]):
    text = _read(path)
    try:
        return parser(text)
    except lineproto.IRParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None
    except (ValueError, QCoreError) as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None


def _emit(cfg: RunConfig, text: str, out) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        out.write(text)


def _one_input(cfg: RunConfig) -> str:
    if len(cfg.inputs) != 1:
        raise CliError(EXIT_PRECONDITION, f"{cfg.command} takes exactly one --in file")
    return cfg.inputs[0]


def _bits(cfg: RunConfig, n: int) -> tuple[str, str]:
    x = cfg.x if cfg.x is not None else "0" * n
    y = cfg.y if cfg.y is not None else "0" * n
    if len(x) != n or len(y) != n:
        raise CliError(EXIT_PRECONDITION, f"--x and --y must have n={n} bits")
    return x, y


def _validated_line(cfg: RunConfig) -> lineproto.LineProtocol:
    if cfg.inputs:
        proto = _parse(_one_input(cfg), lineproto.parse_line_protocol)
    else:
        params = lineproto.LineParams(cfg.n or 1, cfg.d or 2, cfg.r or (cfg.d or 2), cfg.b or 1, cfg.s or 0)
        proto = lineproto.random_line_protocol(params, np.random.default_rng(cfg.seed))
    report = lineproto.validate(proto)
    if not report.ok:
        raise CliError(EXIT_PARSE, "invalid protocol:\n" + "\n".join(str(v) for v in report.violations))
    return proto


def _fmt(p: float) -> str:
    return f"{p:.12g}"


# ---------------------------------------------------------------- commands

def cmd_simulate_line(cfg: RunConfig, out) -> int:
    proto = _validated_line(cfg)
    x, y = _bits(cfg, proto.params.n)
    (p0, p1), trace = lineproto.simulate_line(proto, x, y)
    out.write(f"P(output=0)={_fmt(p0)}\nP(output=1)={_fmt(p1)}\n")
    norms = trace.norms()
    out.write("norms=" + ",".join(_fmt(v) for v in norms) + "\n")
    if cfg.out:
        Path(cfg.out).write_text("t,norm\n" + "".join(f"{t},{_fmt(v)}\n" for t, v in enumerate(norms)))
    return EXIT_OK


def cmd_compile(cfg: RunConfig, out) -> int:
    proto = _validated_line(cfg)
    p = proto.params
    if p.r % p.d:
        proto = lineproto.pad_to_multiple(proto)
        out.write(f"padded to r={proto.params.r}\n")
    tp = twoparty.compile_line_to_two_party(proto)
    acc = twoparty.communication_total(tp)
    alice, bob = twoparty.block_message_sizes(proto.params)
    out.write(f"rounds={tp.m}\nalice_message={alice}\nbob_message={bob}\ntotal_qubits={acc.total}\n")
    text = twoparty.format_two_party(tp)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_simulate_2p(cfg: RunConfig, out) -> int:
    tp = _parse(_one_input(cfg), twoparty.parse_two_party)
    errs = twoparty.validate_two_party(tp)
    if errs:
        raise CliError(EXIT_PARSE, "invalid protocol:\n" + "\n".join(errs))
    x, y = _bits(cfg, tp.n)
    (p0, p1), tr = twoparty.simulate_two_party(tp, x, y)
    acc = twoparty.communication_total(tp)
    out.write(f"P(output=0)={_fmt(p0)}\nP(output=1)={_fmt(p1)}\nrounds={tp.m}\ntotal_qubits={acc.total}\n")
    out.write("norms=" + ",".join(_fmt(v) for v in tr.norms()) + "\n")
    if cfg.out:
        Path(cfg.out).write_text(acc.to_csv())
    return EXIT_OK


FAMILIES = {
    "uniform": infoaudit.uniform_product,
    "intersecting": infoaudit.intersecting,
    "mixture": infoaudit.product_mixture,
}


def cmd_audit(cfg: RunConfig, out) -> int:
    if not cfg.inputs or len(cfg.inputs) > 2:
        raise CliError(EXIT_PRECONDITION, "audit takes --in <line protocol> [--in <distribution>]")
    proto = _parse(cfg.inputs[0], lineproto.parse_line_protocol)
    report = lineproto.validate(proto)
    if not report.ok:
        raise CliError(EXIT_PARSE, "invalid protocol:\n" + "\n".join(str(v) for v in report.violations))
    if len(cfg.inputs) == 2:
        mu = _parse(cfg.inputs[1], infoaudit.parse_distribution)
    elif cfg.family in FAMILIES:
        mu = FAMILIES[cfg.family](proto.params.n)
    else:
        raise CliError(EXIT_PRECONDITION, f"unknown family {cfg.family!r}")
    if not infoaudit.verify_conditional_independence(mu):
        raise CliError(EXIT_PRECONDITION, "X and Y are not independent given Z")
    if mu.n != proto.params.n:
        raise CliError(EXIT_PRECONDITION, f"distribution has n={mu.n}, protocol n={proto.params.n}")
    trace = infoaudit.audit_line_leakage(proto, mu, check=False)
    padded = lineproto.pad_to_multiple(proto)
    leak = infoaudit.leakage_two_party(twoparty.compile_line_to_two_party(padded), mu)
    _emit(cfg, trace.to_csv(), out)
    ok = trace.passes() and leak.qil_ok
    out.write(f"qil={_fmt(leak.qil)}\nqil_bound={_fmt(leak.qil_bound)}\nil={_fmt(leak.il)}\n"
              f"status={'pass' if ok else 'fail'}\n")
    return EXIT_OK if ok else EXIT_BOUND


def cmd_disjointness(cfg: RunConfig, out) -> int:
    n = cfg.n or (len(cfg.x) if cfg.x else None)
    if n is None or cfg.d is None:
        raise CliError(EXIT_PRECONDITION, "disjointness needs --d and --n (or --x)")
    if cfg.d > n or (cfg.t is not None and cfg.t > n):
        raise CliError(EXIT_PRECONDITION, "need d <= n and t <= n")
    x, y = _bits(cfg, n)
    res = disjwalk.disjointness_delay_d(n, cfg.d, disjwalk.BitOracle(x), disjwalk.BitOracle(y), cfg.walk, cfg.t)
    if res.intersecting:
        verdict = f"intersecting, p_success={_fmt(res.success_probability)}"
        verdict += " (>= 2/3)" if res.success_probability >= 2 / 3 else " (< 2/3)"
    else:
        verdict = f"disjoint, p={_fmt(res.success_probability)}"
    a = res.account
    out.write(f"{verdict}\nt={res.t}\neq3_cost={_fmt(res.eq3_cost)}\nrounds={a.rounds}\n"
              f"queries_x={a.queries_x}\nqueries_y={a.queries_y}\ndelay_d_complexity={a.delay_d_query_complexity}\n")
    if cfg.out:
        Path(cfg.out).write_text(disjwalk.runs_to_csv([res]))
    return EXIT_OK


def cmd_query_run(cfg: RunConfig, out) -> int:
    alg = _parse(_one_input(cfg), querymodel.parse_query_algorithm)
    if cfg.d is not None:
        alg.d = cfg.d
    x, y = _bits(cfg, alg.n)
    try:
        (p0, p1), acc = querymodel.run_query_algorithm(alg, x, y)
    except querymodel.InvalidIndexAmplitude as exc:
        raise CliError(EXIT_PRECONDITION, str(exc)) from None
    out.write(f"P(output=0)={_fmt(p0)}\nP(output=1)={_fmt(p1)}\n")
    _emit(cfg, acc.to_csv(), out)
    return EXIT_OK


def _grid_points(cfg: RunConfig, default: Callable[[], list[tuple[int, int, int]]]) -> list[tuple[int, int, int]]:
    if cfg.grid is not None:
        try:
            pts = bounds.grid_points(bounds.parse_grid(cfg.grid))
        except ValueError as exc:
            raise CliError(EXIT_PARSE, f"grid: {exc}") from None
    else:
        pts = default()
    if not pts:
        raise CliError(EXIT_PRECONDITION, "grid has no points with d <= n")
    return pts


def cmd_bounds(cfg: RunConfig, out) -> int:
    def single():
        if cfg.n is None or cfg.d is None:
            raise CliError(EXIT_PRECONDITION, "bounds needs --n and --d, or --grid")
        if cfg.d > cfg.n:
            raise CliError(EXIT_PRECONDITION, f"d={cfg.d} exceeds n={cfg.n}")
        return [(cfg.n, cfg.d, cfg.b or 1)]
    _emit(cfg, bounds.emit_sweep(_grid_points(cfg, single)), out)
    return EXIT_OK


def default_sweep_points(b: int = 1) -> list[tuple[int, int, int]]:
    return [(1 << k, d, b) for k in range(4, 15) for d in bounds.log_spaced(1 << k)]


def cmd_sweep(cfg: RunConfig, out) -> int:
    _emit(cfg, bounds.emit_sweep(_grid_points(cfg, lambda: default_sweep_points(cfg.b or 1))), out)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, object], int]] = {
    "simulate-line": cmd_simulate_line,
    "compile": cmd_compile,
    "simulate-2p": cmd_simulate_2p,
    "audit": cmd_audit,
    "disjointness": cmd_disjointness,
    "query-run": cmd_query_run,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linedisj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--in", dest="inputs", action="append", metavar="PATH")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--config", metavar="PATH", help="key=value file; flags take precedence")
        for flag in ("n", "d", "b", "s", "r", "t", "seed"):
            p.add_argument(f"--{flag}")
        p.add_argument("--x")
        p.add_argument("--y")
        p.add_argument("--grid", help="e.g. 'n=16,64 d=1:8 b=1'")
        p.add_argument("--family", choices=sorted(FAMILIES))
    return parser


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    try:
        cfg = build_config(ns)
        return COMMANDS[cfg.command](cfg, out)
    except CliError as exc:
        err.write(f"error: {exc}\n")
        return exc.code
    except SimulationCapError as exc:
        err.write(f"error: simulation cap: {exc}\n")
        return EXIT_CAP
    except (lineproto.InvalidProtocolError, infoaudit.DistributionError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PARSE
    except ValueError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    except Exception as exc:  # noqa: BLE001
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
