"""Bounded exhaustive exploration: ``check`` for counterexamples, ``run`` for witnesses.

The search itself runs in `rollupcheck.engine`.  This module sets it up
from a scope and variant, turns the packed results back into `L1State`
values and `Event`s, and re-verifies every trace it reports: the trace is
replayed through `rollupcheck.transitions` and the property (or scenario
goal) is evaluated with the reference temporal evaluator.
"""
from __future__ import annotations

import enum
import struct
import time
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from rollupcheck import engine as E
from rollupcheck.domain import (
    Block,
    Claim,
    Flaw,
    ForcedInput,
    L1State,
    ScopeConfig,
    UpgradeAnnouncement,
    VariantConfig,
    all_finalized_inputs,
)
from rollupcheck.properties import PropertySpec, applicable, get_property
from rollupcheck.temporal import (
    And,
    Atom,
    Eventually,
    Exists,
    Formula,
    Outcome,
    PropertyVerdict,
    Trace,
    eval_at,
)
from rollupcheck.transitions import (
    DEPLOY,
    STUTTER,
    TIMEOUT,
    Event,
    EventKind,
    apply_event,
    is_frozen,
    universe,
)

DEFAULT_MAX_STATES = 40_000_000


class ResourceLimitExceeded(RuntimeError):
    """The search needed more states than the configured cap."""

    def __init__(self, message: str, stats: dict):
        super().__init__(message)
        self.stats = stats


class Mode(enum.Enum):
    CHECK = "check"
    RUN = "run"


# -- scenarios ---------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    description: str
    goal: Formula
    monitor: str


def _now(fn, label):
    return Atom(lambda v, p: fn(v.state(p)), label=label)


def _blacklisted_inputs(trace):
    seen = {}
    for s in trace.states:
        for i in sorted(s.blacklist):
            seen[i] = None
    return seen


_SCENARIOS = [
    ScenarioSpec(
        "finalize-one",
        "some block gets finalized",
        Eventually(_now(lambda s: len(s.finalized_state) > 0, "finalized non-empty")),
        "goal:finalize-one",
    ),
    ScenarioSpec(
        "frozen",
        "the queue head becomes a blacklisted input",
        Eventually(_now(is_frozen, "frozen")),
        "goal:frozen",
    ),
    ScenarioSpec(
        "double-blacklist",
        "an input is blacklisted while unfinalized and is finalized later",
        Exists(
            lambda v: v.domain("blacklisted", _blacklisted_inputs),
            lambda x: Eventually(And(
                _now(lambda s: x in s.blacklist and x not in all_finalized_inputs(s), f"i{x} blocked"),
                Eventually(_now(lambda s: x in all_finalized_inputs(s), f"i{x} finalized")),
            )),
        ),
        "goal:double-blacklist",
    ),
]

SCENARIOS: dict[str, ScenarioSpec] = {s.name: s for s in _SCENARIOS}


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None


@dataclass(frozen=True)
class CheckRequest:
    variant: VariantConfig
    scope: ScopeConfig
    target: str
    mode: Mode = Mode.CHECK
    max_states: int = DEFAULT_MAX_STATES

    def __post_init__(self):
        if self.mode is Mode.CHECK:
            prop = get_property(self.target)
            if not prop.applies(self.variant):
                raise ValueError(f"{prop.name} does not apply to variant {self.variant.name}")
        else:
            get_scenario(self.target)


# -- setup ---------------------------------------------------------------------------

_MEMO_FIELDS = {
    "SRP3": ("J",),
    "FQP6": ("S",),
    "BP2": ("BPF",),
    "UP1": ("A", "OK"),
    "UP1'": ("A", "OK"),
    "UP2": ("U", "P"),
    "UP2'": ("U", "P"),
    "goal:double-blacklist": ("WB",),
}


class _Setup:
    """Kernel configuration and the value tables of one search."""

    def __init__(self, scope: ScopeConfig, variant: VariantConfig, monitors: Iterable[str]):
        monitors = [m for m in monitors if m != "SRP1"]
        if "UP2" in monitors and "UP2'" in monitors:
            raise ValueError("UP2 and UP2' cannot be monitored together")
        self.scope, self.variant = scope, variant
        self.u = universe(scope)
        n = scope.max_inputs
        if n > 5:
            raise ValueError("the compiled explorer supports at most 5 inputs")
        nb = len(self.u.blocks)
        if nb > 62:
            raise ValueError("too many blocks for the compiled explorer; lower max_block_size")
        nsets = 1 << n
        per_block = 2 if "unproven_finalization" in variant.mutations else 3
        lmax = max(1, min(nb, scope.max_steps // per_block))
        memo = {f for m in monitors for f in _MEMO_FIELDS.get(m, ())}
        lay = E.Layout(n, nb, scope.queue_bound, lmax, memo)
        self.layout = lay
        self.blockmask = np.array([sum(1 << i for i in b.inputs) for b in self.u.blocks], dtype=np.int64)
        self.setmask = np.array([sum(1 << i for i in s) for s in self.u.input_sets], dtype=np.int64)
        cfg = np.zeros(E.C_SIZE, dtype=np.int64)
        cfg[E.C_N], cfg[E.C_NB], cfg[E.C_NSETS] = n, nb, nsets
        cfg[E.C_QB], cfg[E.C_CAP], cfg[E.C_LMAX] = scope.queue_bound, scope.max_pending_claims, lmax
        cfg[E.C_FQ] = variant.forced_queue_enabled
        cfg[E.C_BVQ] = variant.blacklist_via_queue
        cfg[E.C_UPG] = variant.upgradeability
        cfg[E.C_HASBL] = variant.has_blacklist
        cfg[E.C_FLAW] = {Flaw.NONE: E.FLAW_NONE, Flaw.ON_THE_SPOT_BLACKLIST: E.FLAW_SPOT,
                         Flaw.TIMEOUT_ONLY_UPGRADE: E.FLAW_TIMEOUT}[variant.flaw]
        cfg[E.C_UPD] = variant.blacklist_update_during_upgrade
        mut = 0
        for name, bit in (("skip_head_guard", E.MUT_SKIP_HEAD), ("lossy_queue", E.MUT_LOSSY),
                          ("no_compaction", E.MUT_NOCOMP), ("unproven_finalization", E.MUT_UNPROVEN)):
            if name in variant.mutations:
                mut |= bit
        cfg[E.C_MUT] = mut
        active = 0
        for m in monitors:
            active |= 1 << E.BIT[m]
        cfg[E.C_ACTIVE] = active
        cfg[E.C_NF], cfg[E.C_W] = lay.nfields, lay.nwords
        cfg[E.C_MAXSUCC] = 3 * nb + n + 3 * nsets + 4
        off = lay.offsets
        for slot, name in ((E.I_FL, "FL"), (E.I_FB, "FB"), (E.I_CC, "CC"), (E.I_CS, "CS"),
                           (E.I_PC, "PC"), (E.I_PS, "PS"), (E.I_QL, "QL"), (E.I_Q, "Q"),
                           (E.I_BL, "BL"), (E.I_ONG, "ONG"), (E.I_TOUT, "TOUT"), (E.I_J, "J"),
                           (E.I_S, "S"), (E.I_BPF, "BPF"), (E.I_A, "A"), (E.I_OK, "OK"),
                           (E.I_U, "U"), (E.I_P, "P"), (E.I_WB, "WB")):
            cfg[slot] = off[name]
        self.cfg = cfg
        self.monitors = monitors

    # -- decoding

    def fields(self, words: np.ndarray) -> np.ndarray:
        lay = self.layout
        return (words[lay.word] >> lay.shift) & lay.mask

    def decode_state(self, words: np.ndarray) -> L1State:
        f = self.fields(words)
        off, u, n = self.layout.offsets, self.u, self.scope.max_inputs
        fin = tuple(u.blocks[f[off["FB"] + j]] for j in range(f[off["FL"]]))
        stale = fin[:-1]

        def claims(cur, old):
            out = [Claim(fin, b) for k, b in enumerate(u.blocks) if (int(f[off[cur]]) >> k) & 1]
            out += [Claim(stale, b) for k, b in enumerate(u.blocks) if (int(f[off[old]]) >> k) & 1]
            return frozenset(out)

        queue = tuple(u.forced_events[f[off["Q"] + j] - 1] for j in range(f[off["QL"]]))
        bl = frozenset(i for i in range(n) if (int(f[off["BL"]]) >> i) & 1)
        ong = int(f[off["ONG"]])
        tout = int(f[off["TOUT"]])
        return L1State(
            finalized_state=fin,
            commitments=claims("CC", "CS"),
            proofs=claims("PC", "PS"),
            forced_queue=queue,
            blacklist=bl,
            ongoing_upgrade=None if ong == 0 else u.announcements[ong - 1],
            timed_out=frozenset(a for k, a in enumerate(u.announcements) if (tout >> k) & 1),
        )

    def decode_event(self, code: int, s: L1State) -> Event:
        kind, arg = code >> E.EV_SHIFT, code & ((1 << E.EV_SHIFT) - 1)
        u = self.u
        if kind == E.K_RC:
            return Event(EventKind.ReceiveCommitment, (Claim(s.finalized_state, u.blocks[arg]),))
        if kind == E.K_RP:
            return Event(EventKind.ReceiveProof, (Claim(s.finalized_state, u.blocks[arg]),))
        if kind == E.K_ROLLUP:
            c = Claim(s.finalized_state, u.blocks[arg])
            return Event(EventKind.RollupProcess, (c, c))
        if kind == E.K_FORCED:
            return Event(EventKind.ReceiveForced, (u.forced_events[arg],))
        if kind == E.K_UPDATE:
            return Event(EventKind.UpdateBlacklist, (u.policies[arg],))
        if kind == E.K_INIT:
            return Event(EventKind.UpgradeInit, (u.announcements[arg],))
        if kind == E.K_TIMEOUT:
            return TIMEOUT
        if kind == E.K_DEPLOY:
            return DEPLOY
        if kind == E.K_ADMIN:
            return Event(EventKind.AdminSetBlacklist, (u.input_sets[arg],))
        return STUTTER


@dataclass
class SearchResult:
    setup: _Setup
    states: np.ndarray
    parent: np.ndarray
    event: np.ndarray
    count: int
    level_starts: list
    found: dict          # monitor name -> (source state index, event code)
    exhausted: bool
    seconds: float

    def depth_of(self, idx: int) -> int:
        for d in range(len(self.level_starts) - 1):
            if idx < self.level_starts[d + 1]:
                return d
        return len(self.level_starts) - 1

    def path(self, idx: int) -> list[int]:
        out = []
        while idx >= 0:
            out.append(idx)
            idx = int(self.parent[idx])
        return out[::-1]

    def trace_to(self, src: int, code: Optional[int] = None) -> Trace:
        """Trace along the parent chain to `src`, then through event `code`.

        The trace is rebuilt by replaying the decoded events with the
        reference transitions, and each state is compared with the packed
        one.  A stutter appended this way closes the trace into a lasso.
        """
        idxs = self.path(src)
        st = self.setup
        states = [st.decode_state(self.states[idxs[0]])]
        events = []
        for a, b in zip(idxs, idxs[1:]):
            e = st.decode_event(int(self.event[b]), states[-1])
            t = apply_event(states[-1], e, st.variant)
            if t is None or t != st.decode_state(self.states[b]):
                raise AssertionError(f"explorer edge {e!r} disagrees with the reference transitions")
            states.append(t)
            events.append(e)
        lasso = None
        if code is not None:
            e = st.decode_event(code, states[-1])
            t = apply_event(states[-1], e, st.variant)
            if t is None:
                raise AssertionError(f"explorer event {e!r} is not enabled in the reference model")
            if e.kind is EventKind.Stutter:
                lasso = len(states) - 1
            states.append(t)
            events.append(e)
        return Trace(tuple(states), tuple(events), lasso)


def search(
    scope: ScopeConfig,
    variant: VariantConfig,
    monitors: Iterable[str] = (),
    *,
    max_states: int = DEFAULT_MAX_STATES,
    store_last: bool = False,
    stop_when_found: bool = True,
) -> SearchResult:
    """Breadth-first search of the product of the state graph and the monitors.

    With `stop_when_found`, stops after the first level in which every
    monitor has fired.
    """
    st = _Setup(scope, variant, monitors)
    t0 = time.perf_counter()
    W = st.layout.nwords
    maxsucc = int(st.cfg[E.C_MAXSUCC])
    cap = min(1 << 16, max_states + maxsucc)
    states = np.zeros((cap, W), dtype=np.int64)
    parent = np.full(cap, -1, dtype=np.int32)
    event = np.zeros(cap, dtype=np.int32)
    table = np.full(_table_size(cap), -1, dtype=np.int32)
    counters = np.zeros(2, dtype=np.int64)
    viol_src = np.full(E.NMON, -1, dtype=np.int64)
    viol_ev = np.zeros(E.NMON, dtype=np.int64)
    # the all-zero initial state
    E.rehash(states, 1, table)
    counters[0] = 1
    levels = [0, 1]
    exhausted = False
    wanted = [E.BIT[m] for m in st.monitors]

    def stats():
        return {"states": int(counters[0]), "depth": len(levels) - 2,
                "seconds": round(time.perf_counter() - t0, 3)}

    for d in range(scope.max_steps):
        lo, hi = levels[d], levels[d + 1]
        store = d + 1 < scope.max_steps or store_last
        p = lo
        while p < hi:
            p = E.expand(st.cfg, st.layout.word, st.layout.shift, st.layout.mask, st.blockmask,
                         st.setmask, states, parent, event, table, counters, viol_src, viol_ev,
                         p, hi, store)
            if p < hi:
                if cap >= max_states:
                    raise ResourceLimitExceeded(
                        f"state cap of {max_states} reached at depth {d + 1}", stats())
                cap = min(2 * cap, max_states + maxsucc)
                states = _grow(states, cap)
                parent = _grow(parent, cap, -1)
                event = _grow(event, cap)
                table = np.full(_table_size(cap), -1, dtype=np.int32)
                E.rehash(states, int(counters[0]), table)
        if counters[1]:
            raise AssertionError("finalized state outgrew its packed bound")
        levels.append(int(counters[0]))
        if stop_when_found and wanted and all(viol_src[b] >= 0 for b in wanted):
            break
        if store and levels[-1] == hi:
            exhausted = True
            break
    found = {m: (int(viol_src[E.BIT[m]]), int(viol_ev[E.BIT[m]]))
             for m in st.monitors if viol_src[E.BIT[m]] >= 0}
    n = int(counters[0])
    return SearchResult(st, states, parent, event, n, levels, found, exhausted,
                        time.perf_counter() - t0)


def _table_size(cap: int) -> int:
    return 1 << max(4, (2 * cap - 1).bit_length())


def _grow(a: np.ndarray, cap: int, fill=0) -> np.ndarray:
    shape = (cap,) + a.shape[1:]
    out = np.full(shape, fill, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


# -- public API -------------------------------------------------------------------------

def initial_state() -> L1State:
    return L1State()


def _stats(res: SearchResult) -> dict:
    return {
        "states": res.count,
        "depth": len(res.level_starts) - 2,
        "exhausted": res.exhausted,
        "seconds": round(res.seconds, 3),
    }


def _verdict_for(prop: PropertySpec, res: SearchResult, variant: VariantConfig) -> PropertyVerdict:
    hit = res.found.get(prop.name)
    if hit is None:
        return PropertyVerdict(Outcome.NO_COUNTEREXAMPLE, target=prop.name, stats=_stats(res))
    trace = res.trace_to(*hit)
    idx = prop.violation(trace, variant)
    if idx is None:
        raise AssertionError(f"{prop.name}: counterexample not confirmed by the reference evaluator")
    return PropertyVerdict(Outcome.VIOLATED, idx, trace, prop.name, _stats(res))


def check(req: CheckRequest) -> PropertyVerdict:
    """Shortest counterexample to `req.target` within the bound, if any."""
    if req.mode is not Mode.CHECK:
        raise ValueError("check needs mode=check")
    prop = get_property(req.target)
    res = search(req.scope, req.variant, [prop.name], max_states=req.max_states)
    return _verdict_for(prop, res, req.variant)


def check_all(
    variant: VariantConfig,
    scope: ScopeConfig,
    names: Optional[Iterable[str]] = None,
    *,
    max_states: int = DEFAULT_MAX_STATES,
) -> dict[str, PropertyVerdict]:
    """Check several properties in one search over the variant's state space."""
    if names is None:
        props = applicable(variant)
    else:
        props = [get_property(n) for n in names]
        for p in props:
            if not p.applies(variant):
                raise ValueError(f"{p.name} does not apply to variant {variant.name}")
    res = search(scope, variant, [p.name for p in props], max_states=max_states)
    return {p.name: _verdict_for(p, res, variant) for p in props}


def run(req: CheckRequest) -> PropertyVerdict:
    """Shortest trace reaching the scenario goal.

    HOLDS carries the witness; NoCounterexampleWithinBound means no witness.
    """
    if req.mode is not Mode.RUN:
        raise ValueError("run needs mode=run")
    sc = get_scenario(req.target)
    res = search(req.scope, req.variant, [sc.monitor], max_states=req.max_states)
    hit = res.found.get(sc.monitor)
    if hit is None:
        return PropertyVerdict(Outcome.NO_COUNTEREXAMPLE, target=sc.name, stats=_stats(res))
    trace = res.trace_to(*hit)
    if not eval_at(sc.goal, trace, 0):
        raise AssertionError(f"{sc.name}: witness does not satisfy the goal")
    return PropertyVerdict(Outcome.HOLDS, None, trace, sc.name, _stats(res))


def reachable_states(
    scope: ScopeConfig, variant: VariantConfig, *, max_states: int = DEFAULT_MAX_STATES
) -> set[L1State]:
    """Every state reachable in at most `scope.max_steps` events."""
    res = search(scope, variant, (), max_states=max_states, store_last=True)
    return {res.setup.decode_state(res.states[i]) for i in range(res.count)}


# -- canonical encoding -------------------------------------------------------------------

def _u16(x: int) -> bytes:
    return struct.pack(">H", x)


def _seq(items: list[bytes]) -> bytes:
    return _u16(len(items)) + b"".join(items)


def _enc_block(b: Block) -> bytes:
    return _seq([_u16(i) for i in b.inputs])


def _enc_claim(c: Claim) -> bytes:
    return _seq([_enc_block(b) for b in c.state]) + _enc_block(c.diff)


def _enc_inputs(xs) -> bytes:
    return _seq([_u16(i) for i in sorted(xs)])


def _enc_forced(f) -> bytes:
    if isinstance(f, ForcedInput):
        return b"\x00" + _u16(f.tx)
    return b"\x01" + _enc_inputs(f.predicate)


def canonical_encode(s: L1State) -> bytes:
    """Injective, platform-independent byte encoding of a state."""
    claims = lambda cs: _seq([_enc_claim(c) for c in sorted(cs, key=Claim.sort_key)])
    ong = b"\x00" if s.ongoing_upgrade is None else b"\x01" + _enc_inputs(s.ongoing_upgrade.policy.predicate)
    return b"".join([
        _seq([_enc_block(b) for b in s.finalized_state]),
        claims(s.commitments),
        claims(s.proofs),
        _seq([_enc_forced(f) for f in s.forced_queue]),
        _enc_inputs(s.blacklist),
        ong,
        _seq([_enc_inputs(a.policy.predicate)
              for a in sorted(s.timed_out, key=UpgradeAnnouncement.sort_key)]),
    ])
