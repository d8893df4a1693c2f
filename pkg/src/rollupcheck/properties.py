"""Catalog of the rollup properties, each as a named temporal formula.

Every property is ``Always(body)`` for the body built here, except SRP1,
which is structural: the body asserts that each step is produced by exactly
one event.  The explorer does not evaluate these formulas while searching
(it uses compiled monitors, see `rollupcheck.engine`); the formulas are the
reference reading used to confirm counterexamples, by the fuzzer, and by
the brute-force oracle in the tests.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

from rollupcheck.domain import (
    BlacklistPolicy,
    ForcedInput,
    VariantConfig,
    all_finalized_inputs,
)
from rollupcheck.temporal import (
    Always,
    And,
    Atom,
    Eventually,
    Exists,
    ForAll,
    Formula,
    Historically,
    Implies,
    Let,
    Not,
    Once,
    Releases,
    Trace,
    first_violation,
)
from rollupcheck.transitions import EventKind, apply_event, is_frozen


class Kind(enum.Enum):
    SAFETY = "safety"
    LIVENESS = "liveness"


@dataclass(frozen=True)
class PropertySpec:
    name: str
    title: str
    kind: Kind
    applies: Callable[[VariantConfig], bool]
    build: Callable[[VariantConfig], Formula]

    def body(self, variant: VariantConfig) -> Formula:
        return self.build(variant)

    def formula(self, variant: VariantConfig) -> Formula:
        return Always(self.build(variant))

    def violation(self, trace: Trace, variant: VariantConfig) -> Optional[int]:
        """Position where the property first fails on `trace`, or None.

        Liveness properties are only refutable on lasso traces; on a plain
        trace they are reported as not violated.
        """
        if self.kind is Kind.LIVENESS and not trace.is_lasso:
            return None
        return first_violation(self.build(variant), trace)


# -- helpers over states -------------------------------------------------------

def _fin_inputs(s):
    return all_finalized_inputs(s)


def _head_tx(q) -> frozenset:
    """The head's transaction as a set: empty for a policy or an empty queue."""
    if q and isinstance(q[0], ForcedInput):
        return frozenset({q[0].tx})
    return frozenset()


def _added_inputs(s, t) -> frozenset:
    """Inputs of the (index, block) pairs of t's finalized state missing from s's."""
    old = set(enumerate(s.finalized_state))
    return frozenset(i for pair in enumerate(t.finalized_state) if pair not in old for i in pair[1].inputs)


def _forced_inputs_in(trace: Trace):
    seen = {}
    for s in trace.states:
        for f in s.forced_queue:
            if isinstance(f, ForcedInput):
                seen[f] = None
    return seen


def _finalized_blocks_in(trace: Trace):
    seen = {}
    for s in trace.states:
        for b in s.finalized_state:
            seen[b] = None
    return seen


def _announcements_in(trace: Trace):
    seen = {}
    for s in trace.states:
        if s.ongoing_upgrade is not None:
            seen[s.ongoing_upgrade] = None
    return seen


def step(fn, label):
    """Atom over (state, event, next state)."""
    return Atom(lambda v, p: fn(v.state(p), v.event(p), v.next_state(p)), primed=True, label=label)


def now(fn, label):
    return Atom(lambda v, p: fn(v.state(p)), label=label)


def _not_queue_update(e):
    return e.kind is not EventKind.UpdateBlacklist


# -- bodies ---------------------------------------------------------------------

def _srp1(variant):
    return step(lambda s, e, t: apply_event(s, e, variant) == t, "one_event_per_step")


def _srp2(variant):
    return step(
        lambda s, e, t: t.finalized_state[: len(s.finalized_state)] == s.finalized_state
        and len(t.finalized_state) >= len(s.finalized_state),
        "finalized_state in finalized_state'",
    )


def _srp3(variant):
    def justified(b):
        def atom(s):
            return any(c.diff == b and c.state == s.finalized_state for c in s.commitments) and any(
                p.diff == b for p in s.proofs
            )
        return atom

    return ForAll(
        lambda v: v.domain("blocks", _finalized_blocks_in),
        lambda b: Implies(
            now(lambda s: b in s.finalized_state, f"{b!r} finalized"),
            Once(now(justified(b), f"pair for {b!r} on current state")),
        ),
        past_depth=1,
    )


def _srp4(variant):
    def ok(s, e, t):
        if e.kind is not EventKind.RollupProcess:
            return True
        n = len(s.finalized_state)
        return all(len(c.state) >= n for c in e.args)

    return step(ok, "no stale claim processed")


def _fqp1(variant):
    def ok(s, e, t):
        if not (s.forced_queue and set(enumerate(t.finalized_state)) - set(enumerate(s.finalized_state))):
            return True
        head = _head_tx(s.forced_queue)
        return head <= _added_inputs(s, t) and head != _head_tx(t.forced_queue)

    return step(ok, "head processed")


def _fqp2(variant):
    return step(
        lambda s, e, t: t.finalized_state != s.finalized_state or len(t.forced_queue) >= len(s.forced_queue),
        "queue did not shrink",
    )


def _fqp2_policy(variant):
    def ok(s, e, t):
        if t.finalized_state != s.finalized_state or len(t.forced_queue) >= len(s.forced_queue):
            return True
        q = s.forced_queue
        return bool(q) and isinstance(q[0], BlacklistPolicy) and t.forced_queue == q[1:]

    return step(ok, "queue shrank only by applying its head policy")


def _fqp3(variant):
    return step(
        lambda s, e, t: not (s.forced_queue and t.forced_queue == s.forced_queue)
        or t.finalized_state == s.finalized_state,
        "stuck queue freezes state",
    )


def _fqp4(variant):
    def ok(s, e, t):
        q, r = s.forced_queue, t.forced_queue
        if not (q and len(s.finalized_state) < len(t.finalized_state)):
            return True
        return all(r.index(x) < q.index(x) for x in q if x in r)

    return step(ok, "survivors move forward")


def _fqp5(variant):
    def ok(s, e, t):
        q, r = s.forced_queue, t.forced_queue
        both = [x for x in q if x in r]
        return all(r.index(x) < r.index(y) for n, x in enumerate(both) for y in both[n + 1:])

    return step(ok, "relative order kept")


def _fqp6(variant):
    return ForAll(
        lambda v: v.domain("forced", _forced_inputs_in),
        lambda fi: Implies(
            now(lambda s: fi in s.forced_queue, f"{fi!r} queued"),
            Always(Implies(
                now(lambda s: fi not in s.forced_queue, f"{fi!r} gone"),
                now(lambda s: fi.tx in _fin_inputs(s), f"i{fi.tx} finalized"),
            )),
        ),
    )


def _bp1(variant):
    return step(
        lambda s, e, t: not ((_fin_inputs(t) - _fin_inputs(s)) & s.blacklist),
        "newly finalized inputs are not blacklisted",
    )


def _bp2(variant):
    return Implies(
        now(is_frozen, "censored head"),
        Always(step(lambda s, e, t: t.finalized_state == s.finalized_state, "finalized unchanged")),
    )


def _bp3(variant):
    return Not(now(is_frozen, "head blacklisted"))


def _bp4(variant):
    def ok(s):
        q = s.forced_queue
        return all(
            not (isinstance(x, BlacklistPolicy) and isinstance(y, ForcedInput) and y.tx in x.predicate)
            for a, x in enumerate(q)
            for y in q[a + 1:]
        )

    return now(ok, "later inputs respect queued policies")


def _bp5(variant):
    def ok(s):
        q = s.forced_queue
        if any(isinstance(f, BlacklistPolicy) for f in q):
            return True
        return all(f.tx not in s.blacklist for f in q if isinstance(f, ForcedInput))

    return now(ok, "queued inputs respect active policy")


def _changed(upgrade_only):
    def fn(s, e, t):
        return s.blacklist != t.blacklist and (not upgrade_only or _not_queue_update(e))
    return fn


def _up1(upgrade_only):
    def build(variant):
        def announced(x, is_):
            return Once(And(
                now(lambda s: s.ongoing_upgrade is None, "no upgrade"),
                step(lambda s, e, t: t.ongoing_upgrade == x, f"{x!r} announced"),
                now(lambda s: s.blacklist == is_, "blacklist = is"),
                now(lambda s: x not in s.timed_out, f"{x!r} not timed out"),
                Releases(
                    now(lambda s: x in s.timed_out, f"{x!r} timed out"),
                    now(lambda s: s.blacklist == is_, "blacklist = is"),
                ),
            ))

        return Let(
            lambda v, p: v.state(p).blacklist,
            lambda is_: Implies(
                step(_changed(upgrade_only), "blacklist changes"),
                Exists(
                    lambda v: v.domain("announcements", _announcements_in),
                    lambda x: And(now(lambda s: s.ongoing_upgrade == x, f"{x!r} ongoing"), announced(x, is_)),
                    past_depth=1,
                ),
            ),
            primed=True,
            past_depth=1,
        )
    return build


def _up2(upgrade_only):
    def build(variant):
        return Implies(
            step(_changed(upgrade_only), "blacklist changes"),
            Historically(ForAll(
                lambda v: v.domain("forced", _forced_inputs_in),
                lambda f: Implies(
                    now(lambda s: f in s.forced_queue, f"{f!r} queued"),
                    Eventually(now(lambda s: f.tx in _fin_inputs(s), f"i{f.tx} finalized")),
                ),
            )),
        )
    return build


def _up3(variant):
    return step(
        lambda s, e, t: s.blacklist == t.blacklist or t.ongoing_upgrade is None,
        "policy change ends the upgrade",
    )


def _up4(variant):
    return step(
        lambda s, e, t: s.ongoing_upgrade is None or t.ongoing_upgrade is None or s.blacklist == t.blacklist,
        "blacklist constant during upgrade",
    )


def _freeze(variant):
    return Not(now(is_frozen, "frozen"))


# -- applicability --------------------------------------------------------------

def _any(v):
    return True


def _forced(v):
    return v.forced_queue_enabled


def _forced_pure(v):
    return v.forced_queue_enabled and not v.blacklist_via_queue


def _queue_policies(v):
    return v.blacklist_via_queue


def _blacklisting(v):
    return v.forced_queue_enabled and v.has_blacklist


def _upgrade(v):
    return v.upgradeability


def _upgrade_pure(v):
    return v.upgradeability and not v.blacklist_via_queue


def _upgrade_policies(v):
    return v.upgradeability and v.blacklist_via_queue


S, L = Kind.SAFETY, Kind.LIVENESS

_CATALOG = [
    PropertySpec("SRP1", "event granularity", S, _any, _srp1),
    PropertySpec("SRP2", "monotonic state", S, _any, _srp2),
    PropertySpec("SRP3", "justified state", S, _any, _srp3),
    PropertySpec("SRP4", "state progression validity", S, _any, _srp4),
    PropertySpec("FQP1", "guaranteed processing", S, _forced, _fqp1),
    PropertySpec("FQP2", "forced queue stable", S, _forced_pure, _fqp2),
    PropertySpec("FQP2'", "forced queue stable except head policies", S, _queue_policies, _fqp2_policy),
    PropertySpec("FQP3", "state invariant", S, _forced, _fqp3),
    PropertySpec("FQP4", "forced inputs progress", S, _forced, _fqp4),
    PropertySpec("FQP5", "order preservation", S, _forced, _fqp5),
    PropertySpec("FQP6", "finalization confirmation", S, _forced, _fqp6),
    PropertySpec("BP1", "non-blacklisted finalization", S, _blacklisting, _bp1),
    PropertySpec("BP2", "forced queue integrity under censorship", S, _blacklisting, _bp2),
    PropertySpec("BP3", "head position security", S, _blacklisting, _bp3),
    PropertySpec("BP4", "future policy compliance", S, _blacklisting, _bp4),
    PropertySpec("BP5", "following active policy", S, _blacklisting, _bp5),
    PropertySpec("UP1", "announcement, timeout and enforcement consistency", S, _upgrade_pure, _up1(False)),
    PropertySpec("UP1'", "UP1 for upgrade-driven policy changes", S, _upgrade_policies, _up1(True)),
    PropertySpec("UP2", "forced inputs finalized before the upgrade", L, _upgrade_pure, _up2(False)),
    PropertySpec("UP2'", "UP2 for upgrade-driven policy changes", L, _upgrade_policies, _up2(True)),
    PropertySpec("UP3", "post-upgrade integrity", S, _upgrade, _up3),
    PropertySpec("UP4", "blacklist constant during an upgrade", S, _upgrade, _up4),
    PropertySpec("FREEZE", "no frozen state is reachable", S, _forced, _freeze),
]

CATALOG: dict[str, PropertySpec] = {p.name: p for p in _CATALOG}


def catalog() -> list[PropertySpec]:
    return list(_CATALOG)


def get_property(name: str) -> PropertySpec:
    """Look up a property; a trailing ``p`` stands for a prime (``UP1p``)."""
    key = name.strip().upper()
    if key.endswith("P") and key[:-1] + "'" in CATALOG and key not in CATALOG:
        key = key[:-1] + "'"
    try:
        return CATALOG[key]
    except KeyError:
        raise KeyError(f"unknown property {name!r}") from None


def applicable(variant: VariantConfig) -> list[PropertySpec]:
    return [p for p in _CATALOG if p.applies(variant)]
