"""Command-line entry point.

Exit codes: 0 property holds / witness search finished / fuzz clean,
1 violation found (or a golden trace no longer reproduces), 2 usage or
configuration error, 3 state cap exceeded.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Optional

from rollupcheck import __version__
from rollupcheck.domain import VARIANTS, ScopeConfig, VariantConfig, render_state, variant
from rollupcheck.explorer import (
    DEFAULT_MAX_STATES,
    SCENARIOS,
    CheckRequest,
    Mode,
    ResourceLimitExceeded,
    canonical_encode,
    check,
    get_scenario,
    run,
)
from rollupcheck.fuzz import FuzzConfig, fuzz
from rollupcheck.properties import catalog, get_property
from rollupcheck.temporal import Outcome, PropertyVerdict, eval_at
from rollupcheck.traceio import (
    ReplayError,
    parse_scope,
    parse_trace,
    parse_variant,
    render_scope,
    render_trace,
    render_variant,
    replay,
)

OUTPUT_DIR_ENV = "ROLLUPCHECK_OUTPUT_DIR"

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _scope_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scope")
    g.add_argument("--inputs", type=int, default=3, help="size of the input pool")
    g.add_argument("--block-size", type=int, default=2, help="largest block")
    g.add_argument("--steps", type=int, default=8, help="bound on trace length, in events")
    g.add_argument("--claims", type=int, default=4, help="cap on pending commitments plus proofs")
    g.add_argument("--queue", type=int, default=None, help="cap on forced queue length (default: --inputs)")


def _variant_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--variant", choices=sorted(VARIANTS), required=required)
    p.add_argument("--update-during-upgrade", action="store_true",
                   help="let a queued policy take effect while an upgrade is pending")


def _output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--output", type=Path, default=None,
                   help=f"write the JSON report here (default: ${OUTPUT_DIR_ENV}/<name>.json if set)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rollupcheck", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rollupcheck {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="search for a counterexample to a property")
    _variant_args(c, required=False)
    c.add_argument("--property")
    _scope_args(c)
    c.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    c.add_argument("--golden", type=Path, help="replay a stored report and re-verify its verdict")
    _output_args(c)

    r = sub.add_parser("run", help="search for a trace reaching a scenario goal")
    _variant_args(r, required=False)
    r.add_argument("--scenario", choices=sorted(SCENARIOS))
    _scope_args(r)
    r.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
    r.add_argument("--golden", type=Path, help="replay a stored report and re-verify its verdict")
    _output_args(r)

    f = sub.add_parser("fuzz", help="random traces with shrinking")
    _variant_args(f)
    f.add_argument("--property", action="append", help="restrict to these properties (repeatable)")
    _scope_args(f)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--traces", type=int, default=10_000)
    f.add_argument("--max-len", type=int, default=None, help="events per trace (default: --steps)")
    _output_args(f)

    ls = sub.add_parser("list", help="list properties, variants or scenarios")
    ls.add_argument("what", nargs="?", choices=("properties", "variants", "scenarios"), default="properties")
    ls.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def _scope(ns) -> ScopeConfig:
    try:
        return ScopeConfig(max_inputs=ns.inputs, max_block_size=ns.block_size, max_steps=ns.steps,
                           max_pending_claims=ns.claims, max_queue_length=ns.queue)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _variant(ns) -> VariantConfig:
    if ns.variant is None:
        raise UsageError("--variant is required")
    v = variant(ns.variant)
    if ns.update_during_upgrade:
        v = dataclasses.replace(v, blacklist_update_during_upgrade=True)
    return v


def verdict_document(command: str, v: VariantConfig, scope: ScopeConfig, target: str,
                     verdict: PropertyVerdict) -> dict:
    key = "property" if command == "check" else "scenario"
    doc = {
        "tool": "rollupcheck",
        "version": __version__,
        "command": command,
        "variant": render_variant(v),
        "scope": render_scope(scope),
        key: target,
        "outcome": verdict.outcome.value,
        "violation_index": verdict.violation_index,
        "lasso_to": None,
        "trace": None,
        "final_state_encoding": None,
        "stats": verdict.stats,
    }
    if verdict.witness is not None:
        doc["lasso_to"] = verdict.witness.lasso_to
        doc["trace"] = render_trace(verdict.witness)
        doc["final_state_encoding"] = canonical_encode(verdict.witness.last).hex()
    return doc


def _format_text(doc: dict) -> str:
    target = doc.get("property") or doc.get("scenario")
    lines = [f"{doc['command']} {target} on {doc['variant']['name']}: {doc['outcome']}"]
    sc = doc["scope"]
    lines.append("scope: " + ", ".join(f"{k}={v}" for k, v in sc.items()))
    if doc.get("trace"):
        lines.append(f"trace ({len(doc['trace']) - 1} events):")
        for n, step in enumerate(doc["trace"][1:], 1):
            ev = step["event"]
            params = json.dumps(ev["params"], separators=(",", ":")) if ev["params"] else ""
            lines.append(f"  {n}. {ev['kind']} {params}".rstrip())
        if doc.get("violation_index") is not None:
            lines.append(f"violated at position {doc['violation_index']}")
        if doc.get("lasso_to") is not None:
            lines.append(f"loops back to position {doc['lasso_to']}")
    stats = doc.get("stats") or {}
    if stats:
        lines.append("stats: " + ", ".join(f"{k}={v}" for k, v in stats.items()))
    return "\n".join(lines)


def _emit(doc: dict, ns, name: str, summary: Optional[str] = None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if ns.format == "json":
        sys.stdout.write(text)
    else:
        sys.stdout.write((summary or _format_text(doc)) + "\n")
    out = getattr(ns, "output", None)
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV]) / f"{name}.json"
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _golden(ns, command: str) -> int:
    try:
        doc = json.loads(ns.golden.read_text())
        v = parse_variant(doc["variant"])
        scope = parse_scope(doc["scope"])
        target = doc["property"] if command == "check" else doc["scenario"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read golden report: {exc}") from None
    stored = doc["outcome"]
    if doc.get("trace") is None:
        # nothing to replay: search again
        req = CheckRequest(v, scope, target, Mode.CHECK if command == "check" else Mode.RUN)
        verdict = check(req) if command == "check" else run(req)
        ok = verdict.outcome.value == stored
        final = None
    else:
        try:
            trace = replay(parse_trace(doc["trace"], doc.get("lasso_to")), v)
        except (ReplayError, ValueError) as exc:
            print(f"golden mismatch: {exc}")
            return EXIT_VIOLATION
        if command == "check":
            idx = get_property(target).violation(trace, v)
            outcome = Outcome.VIOLATED.value if idx is not None else Outcome.NO_COUNTEREXAMPLE.value
            ok = outcome == stored and idx == doc.get("violation_index")
        else:
            outcome = Outcome.HOLDS.value if eval_at(get_scenario(target).goal, trace, 0) else Outcome.NO_COUNTEREXAMPLE.value
            ok = outcome == stored
        final = canonical_encode(trace.last).hex()
        ok = ok and final == doc.get("final_state_encoding")
        stored = f"{stored} at {doc.get('violation_index')}" if command == "check" else stored
    print(f"golden {ns.golden}: {'match' if ok else 'mismatch'} ({target} on {v.name}: {stored})")
    if final is not None:
        print(f"final state: {json.dumps(render_state(trace.last), separators=(',', ':'))}")
    return EXIT_OK if ok else EXIT_VIOLATION


def _cmd_check(ns) -> int:
    if ns.golden:
        return _golden(ns, "check")
    if not ns.property:
        raise UsageError("--property is required")
    v, scope = _variant(ns), _scope(ns)
    try:
        prop = get_property(ns.property)
        req = CheckRequest(v, scope, prop.name, Mode.CHECK, ns.max_states)
    except (KeyError, ValueError) as exc:
        raise UsageError(exc.args[0]) from None
    verdict = check(req)
    doc = verdict_document("check", v, scope, prop.name, verdict)
    _emit(doc, ns, f"check-{v.name}-{prop.name.replace(chr(39), 'p')}")
    return EXIT_VIOLATION if verdict.outcome is Outcome.VIOLATED else EXIT_OK


def _cmd_run(ns) -> int:
    if ns.golden:
        return _golden(ns, "run")
    if not ns.scenario:
        raise UsageError("--scenario is required")
    v, scope = _variant(ns), _scope(ns)
    verdict = run(CheckRequest(v, scope, ns.scenario, Mode.RUN, ns.max_states))
    doc = verdict_document("run", v, scope, ns.scenario, verdict)
    _emit(doc, ns, f"run-{v.name}-{ns.scenario}")
    return EXIT_OK


def _cmd_fuzz(ns) -> int:
    v, scope = _variant(ns), _scope(ns)
    try:
        cfg = FuzzConfig(ns.seed, ns.traces, ns.max_len or scope.max_steps, v, scope)
        report = fuzz(cfg, ns.property)
    except (KeyError, ValueError) as exc:
        raise UsageError(exc.args[0]) from None
    doc = report.to_json()
    lines = [f"fuzz {v.name}: {ns.traces} traces, seed {ns.seed}: {doc['outcome']}"]
    for f in doc["violations"]:
        lines.append(f"  {f['property']}: {f['count']} traces, first #{f['first_trace']}, "
                     f"shrunk {f['original_length']} -> {f['shrunk_length']} events")
        for n, step in enumerate(f["trace"][1:], 1):
            ev = step["event"]
            params = json.dumps(ev["params"], separators=(",", ":")) if ev["params"] else ""
            lines.append(f"    {n}. {ev['kind']} {params}".rstrip())
    _emit(doc, ns, f"fuzz-{v.name}-{ns.seed}", "\n".join(lines))
    return EXIT_OK if report.clean else EXIT_VIOLATION


def _cmd_list(ns) -> int:
    if ns.what == "properties":
        rows = [{"name": p.name, "kind": p.kind.value, "title": p.title,
                 "variants": [n for n, v in VARIANTS.items() if p.applies(v)]} for p in catalog()]
        text = [f"{r['name']:<7} {r['kind']:<9} {r['title']}  [{', '.join(r['variants'])}]" for r in rows]
    elif ns.what == "variants":
        rows = [render_variant(v) for v in VARIANTS.values()]
        text = [r["name"] for r in rows]
    else:
        rows = [{"name": s.name, "description": s.description} for s in SCENARIOS.values()]
        text = [f"{r['name']:<17} {r['description']}" for r in rows]
    if ns.format == "json":
        sys.stdout.write(json.dumps(rows, indent=2) + "\n")
    else:
        sys.stdout.write("\n".join(text) + "\n")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"check": _cmd_check, "run": _cmd_run, "fuzz": _cmd_fuzz, "list": _cmd_list}[ns.command]
    try:
        return handler(ns)
    except UsageError as exc:
        print(f"rollupcheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitExceeded as exc:
        print(f"rollupcheck: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
