import json

import pytest

from conftest import SMALL, mutated
from rollupcheck.domain import ScopeConfig, variant
from rollupcheck.fuzz import FuzzConfig, fuzz, minimal_prefix, random_trace, replay_events, shrink
from rollupcheck.properties import get_property
from rollupcheck.temporal import Trace
from rollupcheck.traceio import replay
from rollupcheck.transitions import DEPLOY, TIMEOUT, enumerate_events

SCOPE = ScopeConfig(max_inputs=2, max_steps=6)


def _enabled_throughout(trace: Trace, scope, v) -> bool:
    return all((e, t) in enumerate_events(s, scope, v)
               for s, e, t in zip(trace.states, trace.events, trace.states[1:]))


def test_config_validation():
    v = variant("forced")
    with pytest.raises(ValueError):
        FuzzConfig(0, 0, 5, v)
    with pytest.raises(ValueError):
        FuzzConfig(0, 10, 0, v)
    with pytest.raises(ValueError):
        FuzzConfig(-1, 10, 5, v)


def test_property_must_apply():
    with pytest.raises(ValueError):
        fuzz(FuzzConfig(0, 5, 4, variant("strawman")), ["FQP1"])


def test_liveness_is_not_fuzzed():
    report = fuzz(FuzzConfig(0, 5, 4, variant("naive-upgrade"), SCOPE), ["UP2", "UP1"])
    assert report.properties == ["UP1"]


def test_random_traces_are_valid_and_seeded_per_index():
    cfg = FuzzConfig(7, 20, 8, variant("upgrade-blacklist"), SMALL)
    t = random_trace(cfg, 3)
    assert len(t) == 8 and _enabled_throughout(t, SMALL, cfg.variant)
    assert random_trace(cfg, 3) == t
    assert random_trace(FuzzConfig(7, 99, 8, cfg.variant, SMALL), 3) == t
    assert any(random_trace(cfg, n) != t for n in range(4, 10))


def test_replay_events_rejects_disabled_events():
    v = variant("forced")
    t = random_trace(FuzzConfig(1, 1, 6, v, SCOPE), 0)
    assert replay_events(t.events, SCOPE, v) == t
    assert replay_events([DEPLOY], SCOPE, v) is None
    assert replay_events(list(t.events) + [TIMEOUT], SCOPE, v) is None
    assert replay_events([], SCOPE, v).states == (t.states[0],)


def test_minimal_prefix_is_shortest():
    v = variant("naive-blacklist")
    p = get_property("BP3")
    for n in range(200):
        t = random_trace(FuzzConfig(3, 200, 8, v, SCOPE), n)
        if p.violation(t, v) is None:
            continue
        m = minimal_prefix(p, t, v)
        assert p.violation(m, v) is not None
        assert p.violation(m.prefix(len(m) - 1), v) is None
        return
    pytest.fail("no violating trace sampled")


@pytest.mark.parametrize("name,prop,length", [("naive-blacklist", "BP3", 2), ("naive-blacklist", "FREEZE", 2),
                                              ("naive-upgrade", "FREEZE", 4)])
def test_shrinks_to_shortest_counterexample(name, prop, length):
    v = variant(name)
    sc = ScopeConfig(max_inputs=1, max_steps=8)
    report = fuzz(FuzzConfig(42, 2000, 8, v, sc), [prop])
    (f,) = report.findings
    assert len(f.shrunk) == length
    assert f.original_length >= length
    replay(f.shrunk, v)
    assert _enabled_throughout(f.shrunk, sc, v)
    assert get_property(prop).violation(f.shrunk, v) == f.violation_index == length


def test_shrink_keeps_violation_for_mutants():
    v = mutated("forced", "skip_head_guard")
    report = fuzz(FuzzConfig(5, 500, 6, v, SCOPE))
    assert report.findings
    for f in report.findings:
        p = get_property(f.prop)
        assert p.violation(f.shrunk, v) is not None
        assert _enabled_throughout(f.shrunk, SCOPE, v)
        assert shrink(p, f.shrunk, SCOPE, v) == f.shrunk


def test_reports_are_deterministic():
    cfg = FuzzConfig(11, 300, 6, variant("naive-upgrade"), SCOPE)
    a = json.dumps(fuzz(cfg).to_json(), sort_keys=False)
    b = json.dumps(fuzz(cfg).to_json(), sort_keys=False)
    assert a == b


def test_safe_variant_is_clean():
    report = fuzz(FuzzConfig(42, 500, 8, variant("upgrade-blacklist"), SMALL))
    assert report.clean and report.to_json()["outcome"] == "Clean"
