import dataclasses

import pytest
from hypothesis import given

from conftest import SMALL, ALL_VARIANTS, A, B, C, F, P, choices, mutated, variant_names, walk
from oracle import enumerate_paths, reachable_bfs
from rollupcheck.domain import L1State, ScopeConfig, variant
from rollupcheck.explorer import (
    CheckRequest,
    Mode,
    ResourceLimitExceeded,
    canonical_encode,
    check,
    check_all,
    get_scenario,
    initial_state,
    reachable_states,
    run,
)
from rollupcheck.properties import applicable, get_property
from rollupcheck.temporal import Outcome, eval_at
from rollupcheck.traceio import replay
from rollupcheck.transitions import DEPLOY, TIMEOUT, Event, EventKind as K

MICRO = ScopeConfig(max_inputs=1, max_block_size=1, max_steps=4)


def test_initial_state_is_empty():
    assert initial_state() == L1State()


def test_srp2_strawman_tiny_scope():
    v = check(CheckRequest(variant("strawman"), ScopeConfig(max_inputs=2, max_steps=4), "SRP2"))
    assert v.outcome is Outcome.NO_COUNTEREXAMPLE


def test_bp3_on_the_spot_blacklist():
    v = check(CheckRequest(variant("naive-blacklist"), ScopeConfig(max_inputs=1, max_steps=4), "BP3"))
    assert v.outcome is Outcome.VIOLATED
    assert v.witness.events == (
        Event(K.ReceiveForced, (F(0),)),
        Event(K.AdminSetBlacklist, (frozenset({0}),)),
    )


def test_freeze_timeout_only_upgrade():
    v = check(CheckRequest(variant("naive-upgrade"), ScopeConfig(max_inputs=1, max_steps=6), "FREEZE"))
    assert v.outcome is Outcome.VIOLATED
    assert v.witness.events == (Event(K.ReceiveForced, (F(0),)), Event(K.UpgradeInit, (A(0),)), TIMEOUT, DEPLOY)
    assert v.violation_index == 4


def test_run_finalize_one_strawman():
    v = run(CheckRequest(variant("strawman"), ScopeConfig(), "finalize-one", Mode.RUN))
    assert v.outcome is Outcome.HOLDS
    c = C((), B(0))
    assert v.witness.events == (Event(K.ReceiveCommitment, (c,)), Event(K.ReceiveProof, (c,)),
                                Event(K.RollupProcess, (c, c)))


def test_run_without_witness():
    v = run(CheckRequest(variant("forced"), MICRO, "frozen", Mode.RUN))
    assert v.outcome is Outcome.NO_COUNTEREXAMPLE and v.witness is None


def test_request_validation():
    with pytest.raises(KeyError):
        CheckRequest(variant("forced"), MICRO, "NOPE")
    with pytest.raises(ValueError):
        CheckRequest(variant("strawman"), MICRO, "FQP1")
    with pytest.raises(KeyError):
        CheckRequest(variant("forced"), MICRO, "nope", Mode.RUN)
    with pytest.raises(ValueError):
        check(CheckRequest(variant("forced"), MICRO, "finalize-one", Mode.RUN))


def test_state_cap_is_reported():
    with pytest.raises(ResourceLimitExceeded) as exc:
        check(CheckRequest(variant("blacklist"), ScopeConfig(), "FQP1", max_states=5000))
    assert exc.value.stats["states"] > 0


def test_exhausted_search_still_reports_bound():
    v = check(CheckRequest(variant("strawman"), ScopeConfig(max_inputs=1, max_block_size=1, max_steps=12), "SRP2"))
    assert v.outcome is Outcome.NO_COUNTEREXAMPLE
    assert v.stats["exhausted"]


def test_witnesses_replay_and_confirm():
    sc = ScopeConfig(max_inputs=2, max_steps=6)
    for v in [variant("naive-blacklist"), variant("naive-upgrade"), mutated("forced", "skip_head_guard"),
              mutated("blacklist", "lossy_queue"), mutated("forced", "unproven_finalization")]:
        for name, verdict in check_all(v, sc).items():
            if verdict.outcome is Outcome.VIOLATED:
                replay(verdict.witness, v)
                assert get_property(name).violation(verdict.witness, v) == verdict.violation_index


def test_double_blacklist_small():
    sc = ScopeConfig(max_inputs=1, max_block_size=1, max_steps=10)
    v = run(CheckRequest(variant("upgrade-blacklist"), sc, "double-blacklist", Mode.RUN))
    assert v.outcome is Outcome.HOLDS
    assert eval_at(get_scenario("double-blacklist").goal, v.witness, 0)
    replay(v.witness, variant("upgrade-blacklist"))


def test_canonical_encoding():
    s1 = L1State(commitments=frozenset([C((), B(0)), C((), B(1))]), blacklist=frozenset([2, 1]))
    s2 = L1State(commitments=frozenset([C((), B(1)), C((), B(0))]), blacklist=frozenset([1, 2]))
    assert canonical_encode(s1) == canonical_encode(s2)
    assert canonical_encode(s1) != canonical_encode(L1State(commitments=s1.commitments))
    assert canonical_encode(initial_state()) == canonical_encode(L1State())
    assert canonical_encode(L1State(forced_queue=(F(0),))) != canonical_encode(L1State(forced_queue=(P(0),)))
    assert canonical_encode(L1State(ongoing_upgrade=A())) != canonical_encode(L1State(timed_out=frozenset({A()})))


@given(choices, choices, variant_names)
def test_canonical_encoding_is_injective(c1, c2, name):
    v = variant(name)
    xs = set(walk(c1, SMALL, v).states) | set(walk(c2, SMALL, v).states)
    assert len({canonical_encode(s) for s in xs}) == len(xs)


# -- agreement with the brute-force reference -------------------------------------------

ORACLE_CASES = [(name, ()) for name in ALL_VARIANTS] + [
    (base, (m,))
    for base in ("forced", "blacklist", "upgrade-blacklist")
    for m in ("skip_head_guard", "lossy_queue", "no_compaction", "unproven_finalization")
]


def _case(name, muts):
    return mutated(name, *muts) if muts else variant(name)


@pytest.mark.parametrize("name,muts", ORACLE_CASES)
@pytest.mark.parametrize("scope", [
    MICRO,
    ScopeConfig(max_inputs=2, max_block_size=1, max_steps=4, max_pending_claims=2, max_queue_length=2),
], ids=["micro", "two-inputs"])
def test_matches_path_enumeration(name, muts, scope):
    v = _case(name, muts)
    if scope.max_inputs == 2 and name in ("upgrade-blacklist", "naive-blacklist") and not muts:
        scope = dataclasses.replace(scope, max_steps=3)
    props = applicable(v)
    reach, best, _ = enumerate_paths(scope, v, props, check_compaction=not muts)
    assert reachable_states(scope, v) == reach
    verdicts = check_all(v, scope)
    for p in props:
        got = verdicts[p.name]
        if best[p.name] is None:
            assert got.outcome is Outcome.NO_COUNTEREXAMPLE, p.name
        else:
            assert got.outcome is Outcome.VIOLATED, p.name
            assert len(got.witness) == best[p.name], p.name


def test_permitted_update_during_upgrade_matches_oracle():
    v = dataclasses.replace(variant("upgrade-blacklist"), blacklist_update_during_upgrade=True)
    scope = ScopeConfig(max_inputs=1, max_block_size=1, max_steps=4)
    props = applicable(v)
    reach, best, _ = enumerate_paths(scope, v, props)
    assert reachable_states(scope, v) == reach
    verdicts = check_all(v, scope)
    assert best["UP4"] is not None
    for p in props:
        found = verdicts[p.name].witness
        assert (found is None and best[p.name] is None) or len(found) == best[p.name]


@pytest.mark.parametrize("name", ALL_VARIANTS)
def test_reachable_sets_match_reference_bfs(name):
    scope = ScopeConfig(max_inputs=2, max_block_size=2, max_steps=6, max_pending_claims=3, max_queue_length=2)
    assert reachable_states(scope, variant(name)) == reachable_bfs(scope, variant(name))


@pytest.mark.parametrize("name", ["forced", "upgrade", "naive-upgrade"])
def test_larger_path_enumeration(name):
    scope = ScopeConfig(max_inputs=1, max_block_size=1, max_steps=6)
    v = variant(name)
    props = applicable(v)
    _, best, steps = enumerate_paths(scope, v, props)
    assert steps > 0
    verdicts = check_all(v, scope)
    for p in props:
        found = verdicts[p.name].witness
        assert (found is None and best[p.name] is None) or len(found) == best[p.name], p.name
