"""``farkas-check`` command line.

Exit codes: 0 VALID, 1 INVALID (including structurally malformed proofs), 2
input could not be read, parsed or schema-checked. Verdicts
and stats are JSON on stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .checker import DEFAULT_MAX_DEPTH, Mode, RunStats, check_proof, collect_failures
from .fuzz import run_fuzz
from .linalg import Backend, DimensionError
from .proof_codec import (
    CodecError,
    parse_network,
    parse_property,
    parse_proof,
    parse_query,
    serialize_proof,
    serialize_query,
)
from .proof_producer import ProducerError, Sat, SizeLimitError, prove
from .query_encoder import EncodeError, encode

EXIT_VALID = 0
EXIT_INVALID = 1
EXIT_ERROR = 2

BENCH_COLUMNS = ("proof", "backend", "mode", "verdict", "nodes", "lemmas_checked",
                 "lemmas_skipped", "max_depth", "wall_ms")


class _UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"farkas-check: {msg}", file=sys.stderr)


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise _UsageError(f"cannot read {path}: {e.strerror or e}") from e


def _write(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise _UsageError(f"cannot write {path}: {e.strerror or e}") from e


def max_depth_from_env() -> int:
    raw = os.environ.get("FARKAS_CHECK_MAX_DEPTH")
    if raw is None or raw == "":
        return DEFAULT_MAX_DEPTH
    try:
        depth = int(raw)
    except ValueError:
        raise _UsageError(f"FARKAS_CHECK_MAX_DEPTH must be a non-negative integer, got {raw!r}")
    if depth < 0:
        raise _UsageError(f"FARKAS_CHECK_MAX_DEPTH must be a non-negative integer, got {raw!r}")
    return depth


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def cmd_check(args) -> int:
    if args.source != "native":
        raise _UsageError(f"--from {args.source}: input adapter not implemented")
    backend = Backend(args.backend)
    mode = Mode(args.mode)
    depth = max_depth_from_env()
    # structural defects are verdicts (exit 1), not read errors
    proof = parse_proof(_read(args.proof), backend, validate=False)
    stats = RunStats()
    if args.keep_going:
        failures = collect_failures(proof, mode, stats=stats, max_depth=depth)
        if failures:
            for v in failures:
                print(_dumps(v.to_json()))
        else:
            print(_dumps({"verdict": "VALID"}))
        valid = not failures
    else:
        verdict = check_proof(proof, mode, stats=stats, max_depth=depth)
        print(_dumps(verdict.to_json()))
        valid = verdict.valid
    if args.stats:
        print(_dumps(stats.to_json()))
    return EXIT_VALID if valid else EXIT_INVALID


def cmd_encode(args) -> int:
    net = parse_network(_read(args.network))
    prop = parse_property(_read(args.property))
    query = encode(net, prop)
    _write(args.output, serialize_query(query))
    return 0


def cmd_prove(args) -> int:
    query = parse_query(_read(args.query))
    result = prove(query, max_relus=args.max_relus, max_vars=args.max_vars, lemmas=not args.no_lemmas)
    if isinstance(result, Sat):
        # a satisfying assignment means there is nothing to prove
        print(_dumps({"result": "SAT", "witness": [str(v) for v in result.witness]}))
        return EXIT_INVALID
    _write(args.output, serialize_proof(result.proof))
    print(_dumps({"result": "UNSAT", "proof": args.output}))
    return EXIT_VALID


def cmd_fuzz(args) -> int:
    report = run_fuzz(args.seed, args.count, max_relus=args.max_relus, max_inputs=args.max_inputs,
                      samples=args.samples, keep_cases=args.emit is not None)
    if args.emit is not None:
        out = Path(args.emit)
        out.mkdir(parents=True, exist_ok=True)
        for i, case in enumerate(report.cases):
            if not isinstance(case.result, Sat):
                _write(str(out / f"fuzz{args.seed}_{i:03d}.proof.json"), serialize_proof(case.result.proof))
    if args.json:
        print(_dumps(report.to_json()))
    else:
        print(report.table())
    return EXIT_VALID if report.ok else EXIT_INVALID


def bench_rows(suite: Path, backends: Sequence[Backend], modes: Sequence[Mode]) -> list[dict]:
    proofs = sorted(suite.glob("*.proof.json"))
    if not proofs:
        raise _UsageError(f"no *.proof.json files in {suite}")
    rows = []
    for path in proofs:
        raw = _read(str(path))
        for backend in backends:
            proof = parse_proof(raw, backend)
            for mode in modes:
                stats = RunStats()
                start = time.perf_counter()
                verdict = check_proof(proof, mode, stats=stats)
                wall = (time.perf_counter() - start) * 1000.0
                rows.append({
                    "proof": path.name,
                    "backend": backend.value,
                    "mode": mode.value,
                    "verdict": "VALID" if verdict.valid else "INVALID",
                    "nodes": stats.nodes_checked,
                    "lemmas_checked": stats.lemmas_checked,
                    "lemmas_skipped": stats.lemmas_skipped,
                    "max_depth": stats.max_depth,
                    "wall_ms": f"{wall:.3f}",
                })
    return rows


def cmd_bench(args) -> int:
    suite = Path(args.suite)
    if not suite.is_dir():
        raise _UsageError(f"{args.suite} is not a directory")
    backends = [Backend(args.backend)] if args.backend else list(Backend)
    modes = [Mode(args.mode)] if args.mode else list(Mode)
    rows = bench_rows(suite, backends, modes)
    writer = csv.DictWriter(sys.stdout, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="farkas-check", description="Exact checker for UNSAT proofs of ReLU network queries.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check a proof file")
    p.add_argument("proof")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULL.value)
    p.add_argument("--backend", choices=[b.value for b in Backend], default=Backend.DENSE.value)
    p.add_argument("--stats", action="store_true", help="print run statistics after the verdict")
    p.add_argument("--keep-going", action="store_true", help="report every failing node")
    p.add_argument("--from", dest="source", choices=["native", "marabou-raw"], default="native")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("encode", help="encode a network and property as a query")
    p.add_argument("network")
    p.add_argument("property")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("prove", help="decide a query and write a proof if it is UNSAT")
    p.add_argument("query")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--max-relus", type=int, default=8)
    p.add_argument("--max-vars", type=int, default=32)
    p.add_argument("--no-lemmas", action="store_true", help="split instead of deriving lemmas")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("fuzz", help="random encode/prove/check runs with proof mutations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--max-relus", type=int, default=6)
    p.add_argument("--max-inputs", type=int, default=3)
    p.add_argument("--samples", type=int, default=0, help="random inputs tried against each UNSAT result")
    p.add_argument("--emit", metavar="DIR", help="write produced proofs to DIR")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("bench", help="time every proof in a directory, CSV on stdout")
    p.add_argument("--suite", required=True)
    p.add_argument("--backend", choices=[b.value for b in Backend])
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as e:
        _err(str(e))
    except (CodecError, EncodeError, DimensionError, SizeLimitError, ProducerError) as e:
        _err(str(e))
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
