"""Guarded transition functions of the L1 contract and successor enumeration.

Each event function returns the successor state, or ``None`` when one of
its guards fails (the event is simply not enabled).  Nothing here mutates
its arguments.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from rollupcheck.domain import (
    BlacklistPolicy,
    Block,
    Claim,
    Flaw,
    ForcedEvent,
    ForcedInput,
    InputId,
    L1State,
    ScopeConfig,
    UpgradeAnnouncement,
    VariantConfig,
)


class EventKind(enum.Enum):
    # declaration order is the canonical enumeration order
    ReceiveCommitment = "ReceiveCommitment"
    ReceiveProof = "ReceiveProof"
    RollupProcess = "RollupProcess"
    ReceiveForced = "ReceiveForced"
    UpdateBlacklist = "UpdateBlacklist"
    UpgradeInit = "UpgradeInit"
    UpgradeTimeout = "UpgradeTimeout"
    UpgradeDeploy = "UpgradeDeploy"
    AdminSetBlacklist = "AdminSetBlacklist"
    Stutter = "Stutter"


_KIND_RANK = {k: n for n, k in enumerate(EventKind)}


@dataclass(frozen=True, slots=True)
class Event:
    """One named transition with its parameters.

    ``args`` holds: a Claim for ReceiveCommitment/ReceiveProof, a
    (commitment, proof) pair for RollupProcess, a ForcedEvent for
    ReceiveForced, the head policy for UpdateBlacklist, an announcement for
    UpgradeInit, a frozenset of inputs for AdminSetBlacklist, and nothing
    for the rest.
    """

    kind: EventKind
    args: tuple = ()

    def sort_key(self):
        return (_KIND_RANK[self.kind], tuple(_arg_key(a) for a in self.args))

    def __repr__(self):
        inner = ", ".join(repr(a) if not isinstance(a, frozenset) else _set_repr(a) for a in self.args)
        return f"{self.kind.value}({inner})"


def _set_repr(s):
    return "{" + ",".join(f"i{i}" for i in sorted(s)) + "}"


def _arg_key(a):
    if isinstance(a, frozenset):
        return (len(a), tuple(sorted(a)))
    return a.sort_key()


STUTTER = Event(EventKind.Stutter)
TIMEOUT = Event(EventKind.UpgradeTimeout)
DEPLOY = Event(EventKind.UpgradeDeploy)


def _prefix_ok(s: L1State, c: Claim) -> bool:
    n = len(s.finalized_state)
    return c.state[:n] == s.finalized_state and len(c.state) >= n


def receive_commitment(s: L1State, c: Claim) -> Optional[L1State]:
    if c in s.commitments or not _prefix_ok(s, c):
        return None
    return replace(s, commitments=s.commitments | {c})


def receive_proof(s: L1State, p: Claim) -> Optional[L1State]:
    if p in s.proofs or not _prefix_ok(s, p):
        return None
    return replace(s, proofs=s.proofs | {p})


def compact_queue(queue: tuple[ForcedEvent, ...], diff: Block) -> tuple[ForcedEvent, ...]:
    """Drop every queued forced input whose transaction the block includes."""
    included = set(diff.inputs)
    return tuple(f for f in queue if not (isinstance(f, ForcedInput) and f.tx in included))


def queue_constraints_hold(
    before: tuple[ForcedEvent, ...], after: tuple[ForcedEvent, ...], diff: Block
) -> bool:
    """Literal check of the four constraints a processing step puts on the queue.

    Independent of `compact_queue`: it never builds a queue, it only judges
    a proposed one.
    """
    included = set(diff.inputs)

    def idx(q, x):
        return q.index(x) if x in q else None

    # processed transactions are gone
    if any(isinstance(f, ForcedInput) and f.tx in included for f in after):
        return False
    # unprocessed forced inputs survive, strictly closer to the head
    for x in before:
        if isinstance(x, ForcedInput) and x.tx not in included:
            j = idx(after, x)
            if j is None or not j < before.index(x):
                return False
    # relative order is kept
    for x in after:
        for y in after:
            ix, iy = idx(before, x), idx(before, y)
            if ix is not None and iy is not None and ix < iy and not after.index(x) < after.index(y):
                return False
    # nothing new appears
    return all(x in before for x in after)


def rollup_process(
    s: L1State, c: Claim, p: Claim, variant: VariantConfig
) -> Optional[L1State]:
    mutations = variant.mutations
    if c not in s.commitments:
        return None
    if p not in s.proofs and "unproven_finalization" not in mutations:
        return None
    if c.state != p.state or c.diff != p.diff:
        return None
    if c.state != s.finalized_state or c.diff in s.finalized_state:
        return None
    queue = s.forced_queue
    diff_inputs = set(c.diff.inputs)
    if variant.forced_queue_enabled and queue and "skip_head_guard" not in mutations:
        head = queue[0]
        if not isinstance(head, ForcedInput) or head.tx not in diff_inputs:
            return None
    if variant.has_blacklist and s.blacklist & diff_inputs:
        return None
    if variant.blacklist_via_queue:
        policy_pos = [n for n, f in enumerate(queue) if isinstance(f, BlacklistPolicy)]
        if policy_pos:
            first_policy = policy_pos[0]
            for n, f in enumerate(queue):
                if isinstance(f, ForcedInput) and f.tx in diff_inputs and n > first_policy:
                    return None
    if variant.upgradeability and s.ongoing_upgrade is not None and not queue:
        # only forced-queue work may be finalized while an upgrade is pending
        return None
    if not variant.forced_queue_enabled or "no_compaction" in mutations:
        new_queue = queue
    elif "lossy_queue" in mutations:
        new_queue = ()
    else:
        new_queue = compact_queue(queue, c.diff)
    n = len(s.finalized_state)
    return replace(
        s,
        finalized_state=s.finalized_state + (c.diff,),
        commitments=frozenset(q for q in s.commitments if q != c and len(q.state) >= n),
        proofs=frozenset(q for q in s.proofs if q != p and len(q.state) >= n),
        forced_queue=new_queue,
    )


def receive_forced(s: L1State, f: ForcedEvent, variant: VariantConfig) -> Optional[L1State]:
    if not variant.forced_queue_enabled or f in s.forced_queue:
        return None
    if isinstance(f, BlacklistPolicy):
        if not variant.blacklist_via_queue:
            return None
    else:
        if variant.has_blacklist and f.tx in s.blacklist:
            return None
        if variant.blacklist_via_queue and any(
            isinstance(g, BlacklistPolicy) and f.tx in g.predicate for g in s.forced_queue
        ):
            return None
    if variant.upgradeability and s.ongoing_upgrade is not None and s.ongoing_upgrade in s.timed_out:
        return None
    return replace(s, forced_queue=s.forced_queue + (f,))


def update_blacklist(
    s: L1State, f: BlacklistPolicy, variant: VariantConfig
) -> Optional[L1State]:
    if not variant.blacklist_via_queue or not s.forced_queue or s.forced_queue[0] != f:
        return None
    if (
        variant.upgradeability
        and s.ongoing_upgrade is not None
        and not variant.blacklist_update_during_upgrade
    ):
        return None
    return replace(s, blacklist=f.predicate, forced_queue=s.forced_queue[1:])


def upgrade_init(
    s: L1State, a: UpgradeAnnouncement, variant: VariantConfig
) -> Optional[L1State]:
    if not variant.upgradeability or s.ongoing_upgrade is not None or a in s.timed_out:
        return None
    return replace(s, ongoing_upgrade=a)


def upgrade_timeout(s: L1State) -> Optional[L1State]:
    a = s.ongoing_upgrade
    if a is None or a in s.timed_out:
        return None
    return replace(s, timed_out=s.timed_out | {a})


def upgrade_deploy(s: L1State, variant: VariantConfig) -> Optional[L1State]:
    a = s.ongoing_upgrade
    if a is None or a not in s.timed_out:
        return None
    if variant.flaw is not Flaw.TIMEOUT_ONLY_UPGRADE and s.forced_queue:
        return None
    return replace(s, blacklist=a.policy.predicate, ongoing_upgrade=None)


def admin_set_blacklist(
    s: L1State, bl: frozenset[InputId], variant: VariantConfig
) -> Optional[L1State]:
    if variant.flaw is not Flaw.ON_THE_SPOT_BLACKLIST:
        return None
    return replace(s, blacklist=frozenset(bl))


def apply_event(s: L1State, e: Event, variant: VariantConfig) -> Optional[L1State]:
    """Successor of `s` under `e`, or None when `e` is not enabled."""
    k = e.kind
    if k is EventKind.ReceiveCommitment:
        return receive_commitment(s, *e.args)
    if k is EventKind.ReceiveProof:
        return receive_proof(s, *e.args)
    if k is EventKind.RollupProcess:
        return rollup_process(s, *e.args, variant)
    if k is EventKind.ReceiveForced:
        return receive_forced(s, *e.args, variant)
    if k is EventKind.UpdateBlacklist:
        return update_blacklist(s, *e.args, variant)
    if k is EventKind.UpgradeInit:
        return upgrade_init(s, *e.args, variant) if variant.upgradeability else None
    if k is EventKind.UpgradeTimeout:
        return upgrade_timeout(s) if variant.upgradeability else None
    if k is EventKind.UpgradeDeploy:
        return upgrade_deploy(s, variant) if variant.upgradeability else None
    if k is EventKind.AdminSetBlacklist:
        return admin_set_blacklist(s, *e.args, variant)
    if k is EventKind.Stutter:
        return s
    raise ValueError(f"unknown event kind {k}")


def is_frozen(s: L1State) -> bool:
    """True when the queue head is a blacklisted forced input.

    No block can both include the head (forced-queue guard) and avoid it
    (blacklist guard), so nothing can ever be finalized again.
    """
    if not s.forced_queue:
        return False
    head = s.forced_queue[0]
    return isinstance(head, ForcedInput) and head.tx in s.blacklist


class Universe:
    """All candidate event parameters for one scope, precomputed once."""

    def __init__(self, scope: ScopeConfig):
        self.scope = scope
        self.blocks = scope.blocks()
        self.input_sets = scope.input_sets()
        self.policies = [BlacklistPolicy(p) for p in self.input_sets]
        self.forced_events: list[ForcedEvent] = [ForcedInput(i) for i in scope.inputs]
        self.forced_events += self.policies
        self.announcements = [UpgradeAnnouncement(p) for p in self.policies]


_universes: dict[ScopeConfig, Universe] = {}


def universe(scope: ScopeConfig) -> Universe:
    u = _universes.get(scope)
    if u is None:
        u = _universes[scope] = Universe(scope)
    return u


def enumerate_events(
    s: L1State, scope: ScopeConfig, variant: VariantConfig
) -> list[tuple[Event, L1State]]:
    """Every enabled event at `s` paired with its successor, in canonical order.

    Fresh claims are built on exactly the current finalized state; the
    number of pending claims (commitments plus proofs) is capped by the
    scope, as is the queue length.  Stutter is always last.
    """
    u = universe(scope)
    out: list[tuple[Event, L1State]] = []
    fin = s.finalized_state
    room = len(s.commitments) + len(s.proofs) < scope.max_pending_claims
    if room:
        claims = [Claim(fin, b) for b in u.blocks if b not in fin]
        for c in claims:
            if c not in s.commitments:
                out.append((Event(EventKind.ReceiveCommitment, (c,)), replace(s, commitments=s.commitments | {c})))
        for c in claims:
            if c not in s.proofs:
                out.append((Event(EventKind.ReceiveProof, (c,)), replace(s, proofs=s.proofs | {c})))
    ready = s.commitments if "unproven_finalization" in variant.mutations else s.commitments & s.proofs
    for c in sorted(ready, key=Claim.sort_key):
        t = rollup_process(s, c, c, variant)
        if t is not None:
            out.append((Event(EventKind.RollupProcess, (c, c)), t))
    if variant.forced_queue_enabled and len(s.forced_queue) < scope.queue_bound:
        for f in u.forced_events:
            t = receive_forced(s, f, variant)
            if t is not None:
                out.append((Event(EventKind.ReceiveForced, (f,)), t))
    if variant.blacklist_via_queue and s.forced_queue and isinstance(s.forced_queue[0], BlacklistPolicy):
        head = s.forced_queue[0]
        t = update_blacklist(s, head, variant)
        if t is not None:
            out.append((Event(EventKind.UpdateBlacklist, (head,)), t))
    if variant.upgradeability:
        if s.ongoing_upgrade is None:
            for a in u.announcements:
                if a not in s.timed_out:
                    out.append((Event(EventKind.UpgradeInit, (a,)), replace(s, ongoing_upgrade=a)))
        else:
            t = upgrade_timeout(s)
            if t is not None:
                out.append((TIMEOUT, t))
            t = upgrade_deploy(s, variant)
            if t is not None:
                out.append((DEPLOY, t))
    if variant.flaw is Flaw.ON_THE_SPOT_BLACKLIST:
        for bl in u.input_sets:
            out.append((Event(EventKind.AdminSetBlacklist, (bl,)), replace(s, blacklist=bl)))
    out.append((STUTTER, s))
    return out
