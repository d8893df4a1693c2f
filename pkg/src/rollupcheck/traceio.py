"""JSON form of events, traces and variants, and trace replay."""
from __future__ import annotations

from typing import Optional

from rollupcheck.domain import (
    BlacklistPolicy,
    Flaw,
    L1State,
    ScopeConfig,
    VariantConfig,
    VARIANTS,
    parse_announcement,
    parse_claim,
    parse_forced,
    parse_state,
    render_announcement,
    render_claim,
    render_forced,
    render_state,
)
from rollupcheck.temporal import Trace
from rollupcheck.transitions import Event, EventKind, apply_event


class ReplayError(ValueError):
    """A stored trace does not replay under the given variant."""


def render_event(e: Event) -> dict:
    k = e.kind
    if k in (EventKind.ReceiveCommitment, EventKind.ReceiveProof):
        params = {"claim": render_claim(e.args[0])}
    elif k is EventKind.RollupProcess:
        params = {"commitment": render_claim(e.args[0]), "proof": render_claim(e.args[1])}
    elif k is EventKind.ReceiveForced:
        params = {"forced": render_forced(e.args[0])}
    elif k is EventKind.UpdateBlacklist:
        params = {"policy": sorted(e.args[0].predicate)}
    elif k is EventKind.UpgradeInit:
        params = {"announcement": render_announcement(e.args[0])}
    elif k is EventKind.AdminSetBlacklist:
        params = {"blacklist": sorted(e.args[0])}
    else:
        params = {}
    return {"kind": k.value, "params": params}


def parse_event(data: dict) -> Event:
    k = EventKind(data["kind"])
    p = data.get("params", {})
    if k in (EventKind.ReceiveCommitment, EventKind.ReceiveProof):
        return Event(k, (parse_claim(p["claim"]),))
    if k is EventKind.RollupProcess:
        return Event(k, (parse_claim(p["commitment"]), parse_claim(p["proof"])))
    if k is EventKind.ReceiveForced:
        return Event(k, (parse_forced(p["forced"]),))
    if k is EventKind.UpdateBlacklist:
        return Event(k, (BlacklistPolicy(frozenset(int(i) for i in p["policy"])),))
    if k is EventKind.UpgradeInit:
        return Event(k, (parse_announcement(p["announcement"]),))
    if k is EventKind.AdminSetBlacklist:
        return Event(k, (frozenset(int(i) for i in p["blacklist"]),))
    return Event(k)


def render_trace(trace: Trace) -> list[dict]:
    """Steps of a trace; the first step has no event and holds the initial state."""
    steps = [{"event": None, "state": render_state(trace.states[0])}]
    for e, s in zip(trace.events, trace.states[1:]):
        steps.append({"event": render_event(e), "state": render_state(s)})
    return steps


def parse_trace(steps: list[dict], lasso_to: Optional[int] = None) -> Trace:
    if not steps or steps[0].get("event") is not None:
        raise ValueError("a trace starts with an event-free step")
    states = tuple(parse_state(st["state"]) for st in steps)
    events = tuple(parse_event(st["event"]) for st in steps[1:])
    return Trace(states, events, lasso_to)


def replay(trace: Trace, variant: VariantConfig, start: Optional[L1State] = None) -> Trace:
    """Re-derive every state of `trace` from its events; raise on any mismatch."""
    s = trace.states[0] if start is None else start
    if s != trace.states[0]:
        raise ReplayError("trace does not start at the expected state")
    for n, (e, expected) in enumerate(zip(trace.events, trace.states[1:])):
        t = apply_event(s, e, variant)
        if t is None:
            raise ReplayError(f"event {n} ({e!r}) is not enabled")
        if t != expected:
            raise ReplayError(f"event {n} ({e!r}) leads to a different state than recorded")
        s = t
    return trace


def render_variant(v: VariantConfig) -> dict:
    return {
        "name": v.name,
        "forced_queue_enabled": v.forced_queue_enabled,
        "blacklist_via_queue": v.blacklist_via_queue,
        "upgradeability": v.upgradeability,
        "flaw": v.flaw.value,
        "blacklist_update_during_upgrade": v.blacklist_update_during_upgrade,
        "mutations": sorted(v.mutations),
    }


def parse_variant(data) -> VariantConfig:
    if isinstance(data, str):
        return VARIANTS[data]
    return VariantConfig(
        forced_queue_enabled=bool(data["forced_queue_enabled"]),
        blacklist_via_queue=bool(data["blacklist_via_queue"]),
        upgradeability=bool(data["upgradeability"]),
        flaw=Flaw(data["flaw"]),
        blacklist_update_during_upgrade=bool(data.get("blacklist_update_during_upgrade", False)),
        mutations=frozenset(data.get("mutations", ())),
        name=data.get("name", "custom"),
    )


def render_scope(sc: ScopeConfig) -> dict:
    return {
        "max_inputs": sc.max_inputs,
        "max_block_size": sc.max_block_size,
        "max_steps": sc.max_steps,
        "max_pending_claims": sc.max_pending_claims,
        "max_queue_length": sc.queue_bound,
    }


def parse_scope(data: dict) -> ScopeConfig:
    return ScopeConfig(**{k: int(v) for k, v in data.items()})
