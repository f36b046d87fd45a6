"""Command-line entry point.

Machine output is JSON on stdout; diagnostics and human summaries go to
stderr.  Exit status: 0 success, 1 negative verdict, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .arith import DimensionError, ParseError, format_rational, parse_rational
from .checker import check_tree, default_workers
from .fuzz import run_fuzz
from .network import (
    NetworkError,
    check_counterexample,
    compile_query,
    eval_network,
    load_network,
    load_property,
)
from .oracle import EnumerationLimit, GenParams, OracleSat, oracle_decide
from .proof import count_internal, count_leaves, parse_proof, serialize_proof
from .prover import ProverError, Sat, solve_query
from .query import QueryError, dump_query, load_query

OK, NEGATIVE, USAGE = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _write(path: str, data: str | bytes) -> None:
    try:
        if isinstance(data, bytes):
            Path(path).write_bytes(data)
        else:
            Path(path).write_text(data)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _load(path: str, loader):
    try:
        return loader(_read(path))
    except (ParseError, NetworkError, DimensionError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _vector(values) -> list[str]:
    return [format_rational(v) for v in values]


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _rational_pair(text: str) -> tuple[Fraction, Fraction]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return _rational(parts[0]), _rational(parts[1])


# -- subcommands --------------------------------------------------------------


def cmd_compile(args) -> int:
    net = _load(args.network, load_network)
    prop = _load(args.property, load_property)
    try:
        q = compile_query(net, prop)
    except (NetworkError, DimensionError) as exc:
        raise InputError(str(exc)) from None
    _write(args.output, dump_query(q))
    _note(f"compiled {q.n} variables, {q.m} rows, {len(q.constraints)} ReLU constraints -> {args.output}")
    _emit({"variables": q.n, "rows": q.m, "relu_constraints": len(q.constraints), "output": args.output})
    return OK


def cmd_solve(args) -> int:
    q = _load(args.query, load_query)
    try:
        outcome = solve_query(q, depth_limit=args.depth_limit)
    except QueryError as exc:
        raise InputError(f"{args.query}: {exc}") from None
    except ProverError as exc:
        _note(f"solver gave up: {exc}")
        _emit({"verdict": "unknown", "reason": str(exc)})
        return NEGATIVE
    if isinstance(outcome, Sat):
        _emit({"verdict": "sat", "assignment": _vector(outcome.assignment)})
        _note("SAT")
        return NEGATIVE if args.expect == "unsat" else OK
    tree = outcome.proof
    if args.proof_out:
        _write(args.proof_out, serialize_proof(tree))
    _emit({"verdict": "unsat", "leaves": count_leaves(tree), "splits": count_internal(tree)})
    _note(f"UNSAT, proof with {count_leaves(tree)} leaves")
    return NEGATIVE if args.expect == "sat" else OK


def cmd_check(args) -> int:
    q = _load(args.query, load_query)
    tree = _load(args.proof, parse_proof)
    workers = args.parallel if args.parallel is not None else default_workers()
    try:
        report = check_tree(
            q, tree, allow_empty_box=args.allow_empty_box, workers=workers, sequential=args.sequential
        )
    except QueryError as exc:
        raise InputError(f"{args.query}: {exc}") from None
    doc = report.to_dict(include_leaves=args.leaves)
    if args.report:
        _write(args.report, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    _emit(doc)
    if report.certified:
        _note("certified")
        return OK
    for f in report.failures:
        _note(f"{'/'.join(f.path) or '<root>'}: {f.reason} {f.detail}".rstrip())
    return NEGATIVE


def cmd_oracle(args) -> int:
    q = _load(args.query, load_query)
    try:
        truth = oracle_decide(q)
    except QueryError as exc:
        raise InputError(f"{args.query}: {exc}") from None
    except EnumerationLimit as exc:
        raise InputError(str(exc)) from None
    if isinstance(truth, OracleSat):
        _emit({"verdict": "sat", "assignment": _vector(truth.assignment)})
        return NEGATIVE if args.expect == "unsat" else OK
    _emit({"verdict": "unsat"})
    return NEGATIVE if args.expect == "sat" else OK


def cmd_fuzz(args) -> int:
    try:
        params = GenParams(
            max_inputs=args.max_inputs,
            max_hidden=args.max_hidden,
            max_outputs=args.max_outputs,
            weight_range=args.weight_range,
            bound_width=args.bound_width,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    workers = args.parallel if args.parallel is not None else default_workers()
    summary = run_fuzz(args.count, args.seed, params, workers=workers)
    _emit(summary.to_dict())
    applied, rejected = summary.value_mutations
    _note(
        f"{args.count} instances ({summary.sat} sat, {summary.unsat} unsat), "
        f"{len(summary.problems)} problems, {rejected}/{applied} value mutations rejected, "
        f"{summary.seconds:.1f}s"
    )
    return OK if summary.ok else NEGATIVE


def cmd_evaluate(args) -> int:
    net = _load(args.network, load_network)
    try:
        xs = [parse_rational(t) for t in args.input.split(",")]
    except ParseError as exc:
        raise InputError(f"--input: {exc}") from None
    try:
        ys = eval_network(net, xs)
        doc = {"outputs": _vector(ys)}
        if args.property:
            prop = _load(args.property, load_property)
            doc["counterexample"] = check_counterexample(net, prop, xs)
    except (NetworkError, DimensionError) as exc:
        raise InputError(str(exc)) from None
    _emit(doc)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="farkas-check", description="Certificate checking for ReLU network verification.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a network and bound property into a query")
    c.add_argument("--network", required=True)
    c.add_argument("--property", required=True)
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("solve", help="decide a query, emitting a proof tree when UNSAT")
    s.add_argument("--query", required=True)
    s.add_argument("--proof-out")
    s.add_argument("--depth-limit", type=_positive_int)
    s.add_argument("--expect", choices=("sat", "unsat"))
    s.set_defaults(func=cmd_solve)

    k = sub.add_parser("check", help="check a proof tree against a query")
    k.add_argument("--query", required=True)
    k.add_argument("--proof", required=True)
    k.add_argument("--allow-empty-box", action="store_true")
    k.add_argument("--sequential", action="store_true")
    k.add_argument("--parallel", type=_positive_int, metavar="N", help="worker cap (default: all cores)")
    k.add_argument("--report")
    k.add_argument("--leaves", action="store_true", help="include per-leaf certificate constants")
    k.set_defaults(func=cmd_check)

    o = sub.add_parser("oracle", help="decide a query by phase enumeration and elimination")
    o.add_argument("--query", required=True)
    o.add_argument("--expect", choices=("sat", "unsat"))
    o.set_defaults(func=cmd_oracle)

    z = sub.add_parser("fuzz", help="differential test of solver, oracle and checker")
    z.add_argument("--count", type=_positive_int, required=True)
    z.add_argument("--seed", type=int, required=True)
    z.add_argument("--max-inputs", type=_positive_int, default=2)
    z.add_argument("--max-hidden", type=_positive_int, default=4)
    z.add_argument("--max-outputs", type=_positive_int, default=1)
    z.add_argument("--weight-range", type=_rational_pair, default=(Fraction(-2), Fraction(2)), metavar="LO,HI")
    z.add_argument("--bound-width", type=_rational, default=Fraction(1))
    z.add_argument("--parallel", type=_positive_int, metavar="N")
    z.set_defaults(func=cmd_fuzz)

    e = sub.add_parser("evaluate", help="run a network on one input")
    e.add_argument("--network", required=True)
    e.add_argument("--input", required=True, help='comma-separated rationals, e.g. "1,1/2"')
    e.add_argument("--property")
    e.set_defaults(func=cmd_evaluate)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except InputError as exc:
        _note(f"error: {exc}")
        return USAGE


def main() -> None:
    sys.exit(run_cli())
