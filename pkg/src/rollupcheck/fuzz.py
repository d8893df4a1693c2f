"""Random traces with shrinking.

Each trace draws uniformly among the events enabled at the current state.
Trace ``n`` has its own generator seeded with ``(seed, n)``, so results do
not depend on the order in which traces are produced.  Only safety
properties are fuzzed: a finite random trace cannot refute an eventuality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from rollupcheck import __version__
from rollupcheck.domain import MAX_STEPS_CAP, L1State, ScopeConfig, VariantConfig
from rollupcheck.properties import Kind, PropertySpec, applicable, get_property
from rollupcheck.temporal import Trace
from rollupcheck.traceio import render_scope, render_trace, render_variant
from rollupcheck.transitions import Event, enumerate_events


@dataclass(frozen=True)
class FuzzConfig:
    seed: int
    num_traces: int
    max_len: int
    variant: VariantConfig
    scope: ScopeConfig = field(default_factory=ScopeConfig)

    def __post_init__(self):
        if self.num_traces < 1:
            raise ValueError("num_traces must be at least 1")
        if not 1 <= self.max_len <= MAX_STEPS_CAP:
            raise ValueError(f"max_len must be between 1 and {MAX_STEPS_CAP}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class Finding:
    prop: str
    count: int
    first_trace: int
    original_length: int
    shrunk: Trace
    violation_index: int


@dataclass
class FuzzReport:
    config: FuzzConfig
    properties: list[str]
    findings: list[Finding]

    @property
    def clean(self) -> bool:
        return not self.findings

    def to_json(self) -> dict:
        cfg = self.config
        return {
            "tool": "rollupcheck",
            "version": __version__,
            "command": "fuzz",
            "variant": render_variant(cfg.variant),
            "scope": render_scope(cfg.scope),
            "seed": cfg.seed,
            "num_traces": cfg.num_traces,
            "max_len": cfg.max_len,
            "properties": self.properties,
            "outcome": "Clean" if self.clean else "Violated",
            "violations": [
                {
                    "property": f.prop,
                    "count": f.count,
                    "first_trace": f.first_trace,
                    "original_length": f.original_length,
                    "shrunk_length": len(f.shrunk),
                    "violation_index": f.violation_index,
                    "trace": render_trace(f.shrunk),
                }
                for f in self.findings
            ],
        }


def random_trace(cfg: FuzzConfig, n: int) -> Trace:
    rng = np.random.default_rng([cfg.seed, n])
    s = L1State()
    states, events = [s], []
    for _ in range(cfg.max_len):
        options = enumerate_events(s, cfg.scope, cfg.variant)
        e, s = options[int(rng.integers(len(options)))]
        states.append(s)
        events.append(e)
    return Trace(tuple(states), tuple(events))


def replay_events(
    events: Iterable[Event], scope: ScopeConfig, variant: VariantConfig
) -> Optional[Trace]:
    """The trace produced by `events` from the initial state, or None when
    some event is not among those enabled (within scope) where it occurs."""
    s = L1State()
    states, evs = [s], []
    for e in events:
        nxt = None
        for cand, t in enumerate_events(s, scope, variant):
            if cand == e:
                nxt = t
                break
        if nxt is None:
            return None
        s = nxt
        states.append(s)
        evs.append(e)
    return Trace(tuple(states), tuple(evs))


def _violated(prop: PropertySpec, trace: Trace, variant) -> bool:
    return prop.violation(trace, variant) is not None


def minimal_prefix(prop: PropertySpec, trace: Trace, variant) -> Trace:
    """Shortest prefix of `trace` that already violates `prop`.

    Safety violations persist in longer prefixes, so bisection applies.
    """
    lo, hi = 0, len(trace)
    while lo < hi:
        mid = (lo + hi) // 2
        if _violated(prop, trace.prefix(mid), variant):
            hi = mid
        else:
            lo = mid + 1
    return trace.prefix(lo)


def shrink(prop: PropertySpec, trace: Trace, scope: ScopeConfig, variant: VariantConfig) -> Trace:
    """Shrink a violating trace: cut, delete events, then lower parameters.

    Every candidate must replay with enabled events and still violate
    `prop`; the loop stops at a fixpoint.
    """
    best = minimal_prefix(prop, trace, variant)

    def accept(events) -> Optional[Trace]:
        t = replay_events(events, scope, variant)
        if t is None or not _violated(prop, t, variant):
            return None
        return minimal_prefix(prop, t, variant)

    changed = True
    while changed:
        changed = False
        ev = list(best.events)
        # single deletions, then pairs
        for i in range(len(ev)):
            t = accept(ev[:i] + ev[i + 1:])
            if t is not None:
                best, changed = t, True
                break
        if changed:
            continue
        for i in range(len(ev)):
            for j in range(i + 1, len(ev)):
                t = accept(ev[:i] + ev[i + 1:j] + ev[j + 1:])
                if t is not None:
                    best, changed = t, True
                    break
            if changed:
                break
        if changed:
            continue
        # lower parameters: same kind, canonically smaller arguments
        for i, e in enumerate(ev):
            options = enumerate_events(best.states[i], scope, variant)
            smaller = sorted(
                (c for c, _ in options if c.kind is e.kind and c.sort_key() < e.sort_key()),
                key=Event.sort_key,
            )
            for c in smaller:
                t = accept(ev[:i] + [c] + ev[i + 1:])
                if t is not None and len(t) <= len(best):
                    best, changed = t, True
                    break
            if changed:
                break
    return best


def fuzz(cfg: FuzzConfig, props: Optional[Iterable[PropertySpec | str]] = None) -> FuzzReport:
    """Run `cfg.num_traces` random traces and shrink the first violation of
    each property."""
    if props is None:
        chosen = [p for p in applicable(cfg.variant) if p.kind is Kind.SAFETY]
    else:
        chosen = [get_property(p) if isinstance(p, str) else p for p in props]
        for p in chosen:
            if not p.applies(cfg.variant):
                raise ValueError(f"{p.name} does not apply to variant {cfg.variant.name}")
        chosen = [p for p in chosen if p.kind is Kind.SAFETY]
    counts = {p.name: 0 for p in chosen}
    first: dict[str, tuple[int, Trace]] = {}
    for n in range(cfg.num_traces):
        trace = random_trace(cfg, n)
        for p in chosen:
            if _violated(p, trace, cfg.variant):
                counts[p.name] += 1
                first.setdefault(p.name, (n, trace))
    findings = []
    for p in chosen:
        if p.name not in first:
            continue
        n, trace = first[p.name]
        small = shrink(p, trace, cfg.scope, cfg.variant)
        findings.append(Finding(p.name, counts[p.name], n, len(trace), small,
                                p.violation(small, cfg.variant)))
    return FuzzReport(cfg, [p.name for p in chosen], findings)
