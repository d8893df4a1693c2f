"""Value types of the rollup L1 state machine.

Every type here is an immutable value: two objects with equal fields are
the same object as far as the model is concerned.  Sets are frozensets and
sequences are tuples, so states can be hashed and shared freely.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

InputId = int

MAX_STEPS_CAP = 20


class InvariantError(ValueError):
    """A value violates one of its structural invariants."""


@dataclass(frozen=True, slots=True)
class Block:
    inputs: tuple[InputId, ...]

    def __post_init__(self):
        if len(set(self.inputs)) != len(self.inputs):
            raise InvariantError(f"duplicate input in block {self.inputs}")

    def sort_key(self):
        return (len(self.inputs), self.inputs)

    def __repr__(self):
        return "B(" + ",".join(f"i{i}" for i in self.inputs) + ")"


@dataclass(frozen=True, slots=True)
class Claim:
    """A commitment or a proof: a base state plus the block that extends it."""

    state: tuple[Block, ...]
    diff: Block

    def __post_init__(self):
        if len(set(self.state)) != len(self.state):
            raise InvariantError("claim state contains a duplicate block")
        if self.diff in self.state:
            raise InvariantError("claim diff already occurs in its state")

    def sort_key(self):
        return (len(self.state), tuple(b.sort_key() for b in self.state), self.diff.sort_key())

    def __repr__(self):
        return f"Claim({list(self.state)}, {self.diff!r})"


@dataclass(frozen=True, slots=True)
class ForcedInput:
    tx: InputId

    def sort_key(self):
        return (0, (self.tx,))

    def __repr__(self):
        return f"F(i{self.tx})"


@dataclass(frozen=True, slots=True)
class BlacklistPolicy:
    predicate: frozenset[InputId]

    def sort_key(self):
        return (1, (len(self.predicate),) + tuple(sorted(self.predicate)))

    def __repr__(self):
        return "P({" + ",".join(f"i{i}" for i in sorted(self.predicate)) + "})"


ForcedEvent = Union[ForcedInput, BlacklistPolicy]


@dataclass(frozen=True, slots=True)
class UpgradeAnnouncement:
    """An announced upgrade; the only kind modeled replaces the blacklist."""

    policy: BlacklistPolicy

    def sort_key(self):
        return self.policy.sort_key()

    def __repr__(self):
        return f"A({self.policy!r})"


@dataclass(frozen=True, slots=True)
class L1State:
    finalized_state: tuple[Block, ...] = ()
    commitments: frozenset[Claim] = frozenset()
    proofs: frozenset[Claim] = frozenset()
    forced_queue: tuple[ForcedEvent, ...] = ()
    blacklist: frozenset[InputId] = frozenset()
    ongoing_upgrade: Optional[UpgradeAnnouncement] = None
    timed_out: frozenset[UpgradeAnnouncement] = frozenset()

    def __post_init__(self):
        if len(set(self.finalized_state)) != len(self.finalized_state):
            raise InvariantError("finalized_state contains a duplicate block")
        if len(set(self.forced_queue)) != len(self.forced_queue):
            raise InvariantError("forced_queue contains a duplicate event")


def validate_state(s: L1State, scope: Optional["ScopeConfig"] = None) -> None:
    """Raise InvariantError unless `s` satisfies every L1State invariant.

    With a scope, also checks that all inputs come from its pool and that
    blocks respect the size bound.
    """
    if len(set(s.finalized_state)) != len(s.finalized_state):
        raise InvariantError("finalized_state contains a duplicate block")
    if len(set(s.forced_queue)) != len(s.forced_queue):
        raise InvariantError("forced_queue contains a duplicate event")
    for c in s.commitments | s.proofs:
        # re-run the claim constructor checks
        Claim(c.state, c.diff)
    if scope is None:
        return
    blocks = list(s.finalized_state)
    for c in s.commitments | s.proofs:
        blocks.extend(c.state)
        blocks.append(c.diff)
    for b in blocks:
        if len(b.inputs) > scope.max_block_size:
            raise InvariantError(f"{b!r} exceeds max_block_size")
    pool = set(range(scope.max_inputs))
    used = {i for b in blocks for i in b.inputs} | set(s.blacklist)
    for f in s.forced_queue:
        used |= {f.tx} if isinstance(f, ForcedInput) else set(f.predicate)
    for a in s.timed_out | ({s.ongoing_upgrade} if s.ongoing_upgrade else set()):
        used |= set(a.policy.predicate)
    if not used <= pool:
        raise InvariantError(f"inputs {sorted(used - pool)} outside the scope pool")


def all_finalized_inputs(s: L1State) -> frozenset[InputId]:
    return frozenset(i for b in s.finalized_state for i in b.inputs)


def new_finalized_inputs(prev: L1State, nxt: L1State) -> frozenset[InputId]:
    """Inputs of the blocks `nxt` finalized beyond `prev`."""
    n = len(prev.finalized_state)
    if nxt.finalized_state[:n] != prev.finalized_state:
        raise ValueError("previous finalized state is not a prefix of the next one")
    return frozenset(i for b in nxt.finalized_state[n:] for i in b.inputs)


@dataclass(frozen=True)
class ScopeConfig:
    max_inputs: int = 3
    max_block_size: int = 2
    max_steps: int = 8
    max_pending_claims: int = 4
    # values are unbounded, so the queue needs its own cap;
    # None means "same as max_inputs".
    max_queue_length: Optional[int] = None

    def __post_init__(self):
        for name in ("max_inputs", "max_block_size", "max_steps", "max_pending_claims"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.max_steps > MAX_STEPS_CAP:
            raise ValueError(f"max_steps is capped at {MAX_STEPS_CAP}")
        if self.max_queue_length is not None and self.max_queue_length < 1:
            raise ValueError("max_queue_length must be at least 1")

    @property
    def queue_bound(self) -> int:
        return self.max_inputs if self.max_queue_length is None else self.max_queue_length

    @property
    def inputs(self) -> range:
        return range(self.max_inputs)

    def blocks(self) -> list[Block]:
        """Every non-empty block over the pool, in canonical order."""
        out = []
        for size in range(1, self.max_block_size + 1):
            out.extend(Block(p) for p in itertools.permutations(self.inputs, size))
        return out

    def input_sets(self) -> list[frozenset[InputId]]:
        return [
            frozenset(c)
            for size in range(self.max_inputs + 1)
            for c in itertools.combinations(self.inputs, size)
        ]


MUTATIONS = frozenset({
    "skip_head_guard",        # finalize without including the queue head
    "lossy_queue",            # processing a block empties the whole queue
    "no_compaction",          # processing a block leaves the queue untouched
    "unproven_finalization",  # finalize a commitment without a matching proof
})


class Flaw(enum.Enum):
    NONE = "none"
    ON_THE_SPOT_BLACKLIST = "on_the_spot_blacklist"
    TIMEOUT_ONLY_UPGRADE = "timeout_only_upgrade"


@dataclass(frozen=True)
class VariantConfig:
    forced_queue_enabled: bool = False
    blacklist_via_queue: bool = False
    upgradeability: bool = False
    flaw: Flaw = Flaw.NONE
    # whether a queued policy may be applied while an upgrade is in flight
    blacklist_update_during_upgrade: bool = False
    # deliberately broken guards, for exercising the property checkers only
    mutations: frozenset[str] = frozenset()
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        unknown = set(self.mutations) - MUTATIONS
        if unknown:
            raise ValueError(f"unknown mutations {sorted(unknown)}")
        if (self.blacklist_via_queue or self.upgradeability) and not self.forced_queue_enabled:
            raise ValueError("blacklisting and upgrades need the forced queue")
        if self.flaw is Flaw.ON_THE_SPOT_BLACKLIST and not self.forced_queue_enabled:
            raise ValueError("on-the-spot blacklisting needs the forced queue")
        if self.flaw is Flaw.TIMEOUT_ONLY_UPGRADE and not self.upgradeability:
            raise ValueError("timeout-only upgrades need upgradeability")

    @property
    def has_blacklist(self) -> bool:
        """True when some event can make the blacklist non-empty."""
        return (
            self.blacklist_via_queue
            or self.upgradeability
            or self.flaw is Flaw.ON_THE_SPOT_BLACKLIST
        )

    @property
    def is_safe(self) -> bool:
        return self.flaw is Flaw.NONE


VARIANTS: dict[str, VariantConfig] = {
    "strawman": VariantConfig(name="strawman"),
    "forced": VariantConfig(forced_queue_enabled=True, name="forced"),
    "blacklist": VariantConfig(
        forced_queue_enabled=True, blacklist_via_queue=True, name="blacklist"
    ),
    "upgrade": VariantConfig(forced_queue_enabled=True, upgradeability=True, name="upgrade"),
    "upgrade-blacklist": VariantConfig(
        forced_queue_enabled=True,
        blacklist_via_queue=True,
        upgradeability=True,
        name="upgrade-blacklist",
    ),
    "naive-blacklist": VariantConfig(
        forced_queue_enabled=True,
        blacklist_via_queue=True,
        flaw=Flaw.ON_THE_SPOT_BLACKLIST,
        name="naive-blacklist",
    ),
    "naive-upgrade": VariantConfig(
        forced_queue_enabled=True,
        upgradeability=True,
        flaw=Flaw.TIMEOUT_ONLY_UPGRADE,
        name="naive-upgrade",
    ),
}

SAFE_VARIANTS = ("strawman", "forced", "blacklist", "upgrade", "upgrade-blacklist")


def variant(name: str) -> VariantConfig:
    try:
        return VARIANTS[name]
    except KeyError:
        raise KeyError(f"unknown variant {name!r}; known: {', '.join(VARIANTS)}") from None


def iter_blocks(s: L1State) -> Iterator[Block]:
    yield from s.finalized_state
    for c in itertools.chain(s.commitments, s.proofs):
        yield from c.state
        yield c.diff


# -- canonical rendering -----------------------------------------------------
#
# Stable field order, sorted set members, integers for identifiers.  The CLI
# JSON schema and the trace reader in `traceio` are built on these.

def render_block(b: Block) -> list[int]:
    return list(b.inputs)


def render_claim(c: Claim) -> dict:
    return {"state": [render_block(b) for b in c.state], "diff": render_block(c.diff)}


def render_forced(f: ForcedEvent) -> dict:
    if isinstance(f, ForcedInput):
        return {"type": "ForcedInput", "tx": f.tx}
    return {"type": "BlacklistPolicy", "predicate": sorted(f.predicate)}


def render_announcement(a: UpgradeAnnouncement) -> dict:
    return {"policy": sorted(a.policy.predicate)}


def render_state(s: L1State) -> dict:
    return {
        "finalized_state": [render_block(b) for b in s.finalized_state],
        "commitments": [render_claim(c) for c in sorted(s.commitments, key=Claim.sort_key)],
        "proofs": [render_claim(c) for c in sorted(s.proofs, key=Claim.sort_key)],
        "forced_queue": [render_forced(f) for f in s.forced_queue],
        "blacklist": sorted(s.blacklist),
        "ongoing_upgrade": (
            None if s.ongoing_upgrade is None else render_announcement(s.ongoing_upgrade)
        ),
        "timed_out": [
            render_announcement(a) for a in sorted(s.timed_out, key=UpgradeAnnouncement.sort_key)
        ],
    }


def parse_block(data) -> Block:
    return Block(tuple(int(i) for i in data))


def parse_claim(data: dict) -> Claim:
    return Claim(tuple(parse_block(b) for b in data["state"]), parse_block(data["diff"]))


def parse_forced(data: dict) -> ForcedEvent:
    if data["type"] == "ForcedInput":
        return ForcedInput(int(data["tx"]))
    if data["type"] == "BlacklistPolicy":
        return BlacklistPolicy(frozenset(int(i) for i in data["predicate"]))
    raise ValueError(f"unknown forced event type {data['type']!r}")


def parse_announcement(data: dict) -> UpgradeAnnouncement:
    return UpgradeAnnouncement(BlacklistPolicy(frozenset(int(i) for i in data["policy"])))


def parse_state(data: dict) -> L1State:
    ongoing = data.get("ongoing_upgrade")
    return L1State(
        finalized_state=tuple(parse_block(b) for b in data["finalized_state"]),
        commitments=frozenset(parse_claim(c) for c in data["commitments"]),
        proofs=frozenset(parse_claim(c) for c in data["proofs"]),
        forced_queue=tuple(parse_forced(f) for f in data["forced_queue"]),
        blacklist=frozenset(int(i) for i in data["blacklist"]),
        ongoing_upgrade=None if ongoing is None else parse_announcement(ongoing),
        timed_out=frozenset(parse_announcement(a) for a in data["timed_out"]),
    )
