import dataclasses

import pytest
from hypothesis import given

from conftest import SMALL, A, B, C, F, P, choices, mutated, variant_names, walk
from rollupcheck.domain import L1State, ScopeConfig, validate_state, variant
from rollupcheck.transitions import (
    STUTTER,
    Event,
    EventKind,
    admin_set_blacklist,
    apply_event,
    compact_queue,
    enumerate_events,
    is_frozen,
    queue_constraints_hold,
    receive_commitment,
    receive_forced,
    receive_proof,
    rollup_process,
    update_blacklist,
    upgrade_deploy,
    upgrade_init,
    upgrade_timeout,
)

FORCED = variant("forced")
BLACKLIST = variant("blacklist")
UPGRADE = variant("upgrade")
UB = variant("upgrade-blacklist")


def test_receive_commitment():
    c = C([], B(0))
    assert receive_commitment(L1State(), c).commitments == {c}
    s = L1State(finalized_state=(B(0),))
    c1 = C([B(0)], B(1))
    assert receive_commitment(s, c1).commitments == {c1}
    s2 = L1State(finalized_state=(B(0), B(1)))
    assert receive_commitment(s2, C([B(0)], B(2))) is None
    assert receive_commitment(L1State(commitments=frozenset({c})), c) is None


def test_receive_proof():
    p = C([], B(0))
    assert receive_proof(L1State(), p).proofs == {p}
    assert receive_proof(L1State(proofs=frozenset({p})), p) is None
    assert receive_proof(L1State(finalized_state=(B(0),)), C([], B(1))) is None


def _ready(diff, **kw):
    c = C([], diff)
    return c, L1State(commitments=frozenset({c}), proofs=frozenset({c}), **kw)


def test_rollup_base_case():
    c, s = _ready(B(0))
    t = rollup_process(s, c, c, variant("strawman"))
    assert t.finalized_state == (B(0),)
    assert t.commitments == frozenset() and t.proofs == frozenset()


def test_rollup_drops_stale_claims():
    c = C([], B(0))
    keep = C([], B(1))
    s = L1State(commitments=frozenset({c, keep}), proofs=frozenset({c}))
    t = rollup_process(s, c, c, variant("strawman"))
    assert t.commitments == {keep}
    # a second finalization drops claims built two states back
    c2 = C([B(0)], B(1))
    t2 = dataclasses.replace(t, commitments=t.commitments | {c2}, proofs=frozenset({c2}))
    t3 = rollup_process(t2, c2, c2, variant("strawman"))
    assert t3.commitments == frozenset()


def test_rollup_requires_matching_pair():
    c = C([], B(0))
    s = L1State(commitments=frozenset({c}))
    assert rollup_process(s, c, c, FORCED) is None
    assert rollup_process(s, c, c, mutated("forced", "unproven_finalization")) is not None
    d = C([], B(1))
    s2 = L1State(commitments=frozenset({c}), proofs=frozenset({d}))
    assert rollup_process(s2, c, d, FORCED) is None


def test_rollup_head_guard():
    c, s = _ready(B(1), forced_queue=(F(0),))
    assert rollup_process(s, c, c, FORCED) is None
    assert rollup_process(s, c, c, mutated("forced", "skip_head_guard")) is not None


def test_rollup_compacts_queue():
    c, s = _ready(B(0, 1), forced_queue=(F(0), F(1)))
    assert rollup_process(s, c, c, FORCED).forced_queue == ()
    c, s = _ready(B(0), forced_queue=(F(0), F(1), F(2)))
    assert rollup_process(s, c, c, FORCED).forced_queue == (F(1), F(2))


def test_rollup_blacklist_guards():
    c, s = _ready(B(0), blacklist=frozenset({0}))
    assert rollup_process(s, c, c, BLACKLIST) is None
    c, s = _ready(B(0, 1), forced_queue=(F(0), P(2), F(1)))
    assert rollup_process(s, c, c, BLACKLIST) is None
    c, s = _ready(B(1), forced_queue=(F(0), P(2), F(1)))
    assert rollup_process(s, c, c, BLACKLIST) is None
    c, s = _ready(B(0), forced_queue=(F(0), P(2), F(1)))
    assert rollup_process(s, c, c, BLACKLIST).forced_queue == (P(2), F(1))


def test_rollup_upgrade_guard():
    c, s = _ready(B(0), ongoing_upgrade=A(1))
    assert rollup_process(s, c, c, UPGRADE) is None
    c, s = _ready(B(0), ongoing_upgrade=A(1), forced_queue=(F(0),))
    assert rollup_process(s, c, c, UPGRADE).forced_queue == ()


def test_receive_forced():
    assert receive_forced(L1State(), F(0), FORCED).forced_queue == (F(0),)
    assert receive_forced(L1State(forced_queue=(F(0),)), F(0), FORCED) is None
    assert receive_forced(L1State(forced_queue=(P(1),)), F(1), BLACKLIST) is None
    assert receive_forced(L1State(blacklist=frozenset({1})), F(1), BLACKLIST) is None
    assert receive_forced(L1State(), P(1), FORCED) is None
    closed = L1State(ongoing_upgrade=A(0), timed_out=frozenset({A(0)}))
    assert receive_forced(closed, F(0), UPGRADE) is None
    assert receive_forced(L1State(ongoing_upgrade=A(0)), F(0), UPGRADE) is not None
    assert receive_forced(L1State(), F(0), variant("strawman")) is None


def test_update_blacklist():
    t = update_blacklist(L1State(forced_queue=(P(0), F(1))), P(0), BLACKLIST)
    assert t.blacklist == {0} and t.forced_queue == (F(1),)
    assert update_blacklist(L1State(forced_queue=(F(1), P(0))), P(0), BLACKLIST) is None
    t = update_blacklist(L1State(forced_queue=(P(),), blacklist=frozenset({1})), P(), BLACKLIST)
    assert t.blacklist == frozenset() and t.forced_queue == ()


def test_update_blacklist_during_upgrade_is_switchable():
    s = L1State(forced_queue=(P(0),), ongoing_upgrade=A(1))
    assert update_blacklist(s, P(0), UB) is None
    permitted = dataclasses.replace(UB, blacklist_update_during_upgrade=True)
    assert update_blacklist(s, P(0), permitted).blacklist == {0}


def test_upgrade_init():
    assert upgrade_init(L1State(), A(0), UPGRADE).ongoing_upgrade == A(0)
    assert upgrade_init(L1State(ongoing_upgrade=A(1)), A(0), UPGRADE) is None
    assert upgrade_init(L1State(timed_out=frozenset({A(0)})), A(0), UPGRADE) is None
    assert upgrade_init(L1State(), A(0), FORCED) is None


def test_upgrade_timeout():
    t = upgrade_timeout(L1State(ongoing_upgrade=A(0)))
    assert t.timed_out == {A(0)}
    assert upgrade_timeout(L1State()) is None
    assert upgrade_timeout(t) is None


def test_upgrade_deploy():
    done = L1State(ongoing_upgrade=A(0), timed_out=frozenset({A(0)}))
    t = upgrade_deploy(done, UPGRADE)
    assert t.blacklist == {0} and t.ongoing_upgrade is None
    queued = dataclasses.replace(done, forced_queue=(F(0),))
    assert upgrade_deploy(queued, UPGRADE) is None
    naive = L1State(ongoing_upgrade=A(1), timed_out=frozenset({A(1)}), forced_queue=(F(1),))
    t = upgrade_deploy(naive, variant("naive-upgrade"))
    assert t is not None and is_frozen(t)
    assert upgrade_deploy(L1State(ongoing_upgrade=A(0)), UPGRADE) is None


def test_admin_set_blacklist():
    nb = variant("naive-blacklist")
    t = admin_set_blacklist(L1State(forced_queue=(F(0),)), frozenset({0}), nb)
    assert is_frozen(t)
    assert admin_set_blacklist(L1State(blacklist=frozenset({0})), frozenset(), nb).blacklist == frozenset()
    assert admin_set_blacklist(L1State(), frozenset({0}), BLACKLIST) is None


def test_is_frozen():
    assert is_frozen(L1State(forced_queue=(F(0),), blacklist=frozenset({0})))
    assert not is_frozen(L1State(blacklist=frozenset({0})))
    assert not is_frozen(L1State(forced_queue=(F(0),)))
    assert not is_frozen(L1State(forced_queue=(P(0),), blacklist=frozenset({0})))


def test_enumerate_initial_strawman():
    sc = ScopeConfig(max_inputs=1, max_block_size=1)
    kinds = {e.kind for e, _ in enumerate_events(L1State(), sc, variant("strawman"))}
    assert kinds == {EventKind.ReceiveCommitment, EventKind.ReceiveProof, EventKind.Stutter}


def test_enumerate_offers_rollup():
    c, s = _ready(B(0))
    kinds = [e.kind for e, _ in enumerate_events(s, SMALL, variant("strawman"))]
    assert EventKind.RollupProcess in kinds


def test_enumerate_frozen_only_stutters():
    sc = ScopeConfig(max_inputs=1, max_block_size=1, max_pending_claims=2)
    c = C([], B(0))
    s = L1State(commitments=frozenset({c}), proofs=frozenset({c}),
                forced_queue=(F(0),), blacklist=frozenset({0}))
    assert [e for e, _ in enumerate_events(s, sc, BLACKLIST)] == [STUTTER]


def test_enumeration_order_is_canonical():
    sc = ScopeConfig(max_inputs=2)
    evs = [e for e, _ in enumerate_events(L1State(), sc, variant("naive-blacklist"))]
    assert evs == sorted(evs, key=Event.sort_key)
    assert evs[-1] == STUTTER


@given(choices, variant_names)
def test_successors_are_valid_and_match_apply(cs, name):
    v = variant(name)
    trace = walk(cs, SMALL, v)
    for s in trace.states:
        for e, t in enumerate_events(s, SMALL, v):
            validate_state(t, SMALL)
            assert apply_event(s, e, v) == t


FRAME = {
    EventKind.ReceiveCommitment: {"commitments"},
    EventKind.ReceiveProof: {"proofs"},
    EventKind.RollupProcess: {"finalized_state", "commitments", "proofs", "forced_queue"},
    EventKind.ReceiveForced: {"forced_queue"},
    EventKind.UpdateBlacklist: {"blacklist", "forced_queue"},
    EventKind.UpgradeInit: {"ongoing_upgrade"},
    EventKind.UpgradeTimeout: {"timed_out"},
    EventKind.UpgradeDeploy: {"blacklist", "ongoing_upgrade"},
    EventKind.AdminSetBlacklist: {"blacklist"},
    EventKind.Stutter: set(),
}


@given(choices, variant_names)
def test_frame_conditions(cs, name):
    v = variant(name)
    trace = walk(cs, SMALL, v)
    for s in trace.states:
        for e, t in enumerate_events(s, SMALL, v):
            for f in dataclasses.fields(L1State):
                if f.name not in FRAME[e.kind]:
                    assert getattr(s, f.name) == getattr(t, f.name), (e, f.name)
            if e.kind is EventKind.Stutter:
                assert t == s


@given(choices, variant_names)
def test_compaction_matches_literal_constraints(cs, name):
    v = variant(name)
    trace = walk(cs, SMALL, v)
    for s, e, t in zip(trace.states, trace.events, trace.states[1:]):
        if e.kind is EventKind.RollupProcess and v.forced_queue_enabled:
            assert queue_constraints_hold(s.forced_queue, t.forced_queue, e.args[0].diff)


@given(choices)
def test_safe_deploy_needs_empty_queue(cs):
    for name in ("upgrade", "upgrade-blacklist"):
        v = variant(name)
        trace = walk(cs, SMALL, v)
        for s in trace.states:
            for e, _ in enumerate_events(s, SMALL, v):
                if e.kind is EventKind.UpgradeDeploy:
                    assert s.forced_queue == ()


def test_literal_queue_checker_rejects_bad_queues():
    q = (F(0), P(1), F(2))
    d = B(0)
    assert queue_constraints_hold(q, compact_queue(q, d), d)
    assert not queue_constraints_hold(q, (), d)                 # lost F(2)
    assert not queue_constraints_hold(q, q, d)                  # F(0) kept, no progress
    assert not queue_constraints_hold(q, (F(2), P(1)), d)       # reordered
    assert not queue_constraints_hold(q, (P(1), F(2), F(1)), d)  # addition
