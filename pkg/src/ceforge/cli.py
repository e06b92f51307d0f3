"""``ceforge`` command line: generate scenarios, run engines, audit traces,
and drive the standalone code-allocation and real-encoding tools."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .approx import (
    CERealApprox,
    BlockOverflow,
    GenParams,
    Scenario,
    ScenarioError,
    encode_real,
    gen_scenario,
)
from .audit import audit_trace, report_to_json, trace_from_jsonl, trace_to_jsonl
from .engine import DualEngine, LemmaViolation, SingleEngine
from .machines import Exhausted, FreeBlockSet

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SCENARIO = 2
EXIT_LEMMA = 3

log = logging.getLogger("ceforge")


def _setup_logging() -> None:
    level = os.environ.get("CEFORGE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_scenario(path: str) -> Scenario:
    return Scenario.from_json(Path(path).read_text())


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = _load_scenario(args.scenario)
    except (OSError, ScenarioError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    stages = args.stages if args.stages is not None else scenario.stages
    engine_cls = SingleEngine if args.engine == "single" else DualEngine
    engine = engine_cls(scenario)
    try:
        records = engine.run(stages)
    except LemmaViolation as exc:
        print(f"lemma violation: {exc}", file=sys.stderr)
        return EXIT_LEMMA
    if args.trace_out:
        Path(args.trace_out).write_text(trace_to_jsonl(records))
        log.info("trace written to %s", args.trace_out)
    report = audit_trace(records, scenario)
    text = report_to_json(report)
    if args.report_out:
        Path(args.report_out).write_text(text + "\n")
    else:
        print(text)
    if not report["pass"]:
        failed = [c["name"] for c in report["checks"] if not c["pass"]]
        print(f"audit failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_LEMMA
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    params = GenParams()
    if args.stages is not None:
        params.stages = args.stages
        params.active_stages = min(params.active_stages, args.stages)
    scenario = gen_scenario(args.seed, params)
    text = scenario.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    try:
        scenario = _load_scenario(args.scenario)
        records = trace_from_jsonl(Path(args.trace).read_text())
        report = audit_trace(records, scenario)
    except (OSError, ScenarioError, ValueError, KeyError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    text = report_to_json(report)
    if args.report_out:
        Path(args.report_out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK if report["pass"] else EXIT_LEMMA


def cmd_kc(args: argparse.Namespace) -> int:
    """Requests file: one ``target length`` pair per line.

    Drives the raw allocator, so a stream of total weight exactly 1 is
    honoured (the container types enforce the strict bound instead).
    """
    free = FreeBlockSet()
    rows = []
    try:
        for line in Path(args.requests).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            target, length = line.split()
            rows.append((free.allocate(int(length)), target))
    except (OSError, ValueError, Exhausted) as exc:
        print(f"request error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    for codeword, target in rows:
        print(f"{codeword}\t{target}")
    return EXIT_OK


def cmd_encode_real(args: argparse.Namespace) -> int:
    """Real file: JSON list of per-stage bit vectors."""
    try:
        vectors = json.loads(Path(args.real).read_text())
        real = CERealApprox(vectors)
        encoded = encode_real(real)
    except (OSError, ValueError, BlockOverflow) as exc:
        print(f"real error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    for element, stage in sorted(encoded.schedule):
        print(f"{element}\t{stage}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceforge",
        description="Deterministic marker-construction engines and audits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an engine and audit the trace")
    run.add_argument("--scenario", required=True)
    run.add_argument("--stages", type=int, default=None)
    run.add_argument("--engine", choices=("single", "dual"), default="single")
    run.add_argument("--trace-out", default=None)
    run.add_argument("--report-out", default=None)
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="generate a scenario from a seed")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--stages", type=int, default=None)
    gen.add_argument("--out", default=None)
    gen.set_defaults(func=cmd_gen)

    audit = sub.add_parser("audit", help="audit an existing trace")
    audit.add_argument("--scenario", required=True)
    audit.add_argument("--trace", required=True)
    audit.add_argument("--report-out", default=None)
    audit.set_defaults(func=cmd_audit)

    kc = sub.add_parser("kc", help="allocate codewords for a request file")
    kc.add_argument("requests")
    kc.set_defaults(func=cmd_kc)

    enc = sub.add_parser(
        "encode-real", help="encode a staged real as a set schedule"
    )
    enc.add_argument("real")
    enc.set_defaults(func=cmd_encode_real)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
