import pytest
from hypothesis import given

from conftest import SMALL, B, C, F, P, A, choices, variant_names, walk
from rollupcheck.domain import (
    Flaw,
    InvariantError,
    L1State,
    ScopeConfig,
    VariantConfig,
    all_finalized_inputs,
    new_finalized_inputs,
    parse_state,
    render_state,
    validate_state,
    variant,
)


def test_all_finalized_inputs():
    assert all_finalized_inputs(L1State()) == frozenset()
    assert all_finalized_inputs(L1State(finalized_state=(B(0),))) == {0}
    assert all_finalized_inputs(L1State(finalized_state=(B(0, 1), B(2)))) == {0, 1, 2}


def test_new_finalized_inputs():
    s0 = L1State(finalized_state=(B(0),))
    assert new_finalized_inputs(s0, s0) == frozenset()
    assert new_finalized_inputs(L1State(), s0) == {0}
    s1 = L1State(finalized_state=(B(0), B(1, 2)))
    assert new_finalized_inputs(s0, s1) == {1, 2}


def test_new_finalized_inputs_needs_prefix():
    with pytest.raises(ValueError):
        new_finalized_inputs(L1State(finalized_state=(B(1),)), L1State(finalized_state=(B(0), B(1))))


def test_block_rejects_duplicate_inputs():
    with pytest.raises(InvariantError):
        B(0, 0)


def test_claim_invariants():
    with pytest.raises(InvariantError):
        C([B(0), B(0)], B(1))
    with pytest.raises(InvariantError):
        C([B(0)], B(0))
    assert C([B(0)], B(1)) == C((B(0),), B(1))
    assert len({C([], B(0)), C([], B(0))}) == 1


def test_state_invariants():
    with pytest.raises(InvariantError):
        L1State(finalized_state=(B(0), B(0)))
    with pytest.raises(InvariantError):
        L1State(forced_queue=(F(0), F(0)))


def test_validate_state_scope():
    validate_state(L1State(finalized_state=(B(0, 1),)), SMALL)
    with pytest.raises(InvariantError):
        validate_state(L1State(finalized_state=(B(0, 2),)), SMALL)
    with pytest.raises(InvariantError):
        validate_state(L1State(blacklist=frozenset({5})), SMALL)
    with pytest.raises(InvariantError):
        validate_state(L1State(commitments=frozenset({C([], B(0, 1))})), ScopeConfig(max_block_size=1))


def test_scope_bounds():
    with pytest.raises(ValueError):
        ScopeConfig(max_inputs=0)
    with pytest.raises(ValueError):
        ScopeConfig(max_steps=21)
    sc = ScopeConfig()
    assert len(sc.blocks()) == 9
    assert len(sc.input_sets()) == 8
    assert sc.queue_bound == 3
    assert sc.blocks()[:4] == [B(0), B(1), B(2), B(0, 1)]


def test_variant_invariants():
    with pytest.raises(ValueError):
        VariantConfig(blacklist_via_queue=True)
    with pytest.raises(ValueError):
        VariantConfig(upgradeability=True)
    with pytest.raises(ValueError):
        VariantConfig(flaw=Flaw.ON_THE_SPOT_BLACKLIST)
    with pytest.raises(ValueError):
        VariantConfig(forced_queue_enabled=True, flaw=Flaw.TIMEOUT_ONLY_UPGRADE)
    with pytest.raises(ValueError):
        VariantConfig(mutations=frozenset({"nonsense"}))
    with pytest.raises(KeyError):
        variant("nope")


def test_variant_table():
    assert not variant("strawman").forced_queue_enabled
    assert not variant("forced").has_blacklist
    assert variant("upgrade").has_blacklist
    assert variant("naive-blacklist").flaw is Flaw.ON_THE_SPOT_BLACKLIST
    assert variant("naive-upgrade").flaw is Flaw.TIMEOUT_ONLY_UPGRADE
    assert not variant("naive-upgrade").is_safe


def test_render_state_layout():
    s = L1State(
        finalized_state=(B(1, 0),),
        commitments=frozenset({C([B(1, 0)], B(2)), C([B(1, 0)], B(0))}),
        forced_queue=(P(2, 1), F(0)),
        blacklist=frozenset({2, 0}),
        ongoing_upgrade=A(1),
        timed_out=frozenset({A(1), A()}),
    )
    r = render_state(s)
    assert list(r) == ["finalized_state", "commitments", "proofs", "forced_queue",
                       "blacklist", "ongoing_upgrade", "timed_out"]
    assert r["finalized_state"] == [[1, 0]]
    assert [c["diff"] for c in r["commitments"]] == [[0], [2]]
    assert r["forced_queue"] == [{"type": "BlacklistPolicy", "predicate": [1, 2]},
                                 {"type": "ForcedInput", "tx": 0}]
    assert r["blacklist"] == [0, 2]
    assert r["ongoing_upgrade"] == {"policy": [1]}
    assert r["timed_out"] == [{"policy": []}, {"policy": [1]}]
    assert parse_state(r) == s


@given(choices, variant_names)
def test_render_round_trip(cs, name):
    trace = walk(cs, SMALL, variant(name))
    for s in trace.states:
        assert parse_state(render_state(s)) == s


@given(choices, variant_names)
def test_finalized_inputs_monotone(cs, name):
    trace = walk(cs, SMALL, variant(name))
    for a, b in zip(trace.states, trace.states[1:]):
        assert all_finalized_inputs(a) <= all_finalized_inputs(b)
