import dataclasses

import pytest
from hypothesis import strategies as st

from rollupcheck.domain import (
    BlacklistPolicy,
    Block,
    Claim,
    ForcedInput,
    L1State,
    ScopeConfig,
    UpgradeAnnouncement,
    variant,
)
from rollupcheck.temporal import Trace
from rollupcheck.transitions import enumerate_events


def B(*inputs):
    return Block(tuple(inputs))


def F(i):
    return ForcedInput(i)


def P(*inputs):
    return BlacklistPolicy(frozenset(inputs))


def A(*inputs):
    return UpgradeAnnouncement(P(*inputs))


def C(state, diff):
    return Claim(tuple(state), diff)


def walk(choices, scope, v):
    """Trace that follows `choices` (taken modulo the number of enabled events)."""
    s = L1State()
    states, events = [s], []
    for c in choices:
        options = enumerate_events(s, scope, v)
        e, s = options[c % len(options)]
        states.append(s)
        events.append(e)
    return Trace(tuple(states), tuple(events))


def mutated(name, *mutations):
    return dataclasses.replace(variant(name), mutations=frozenset(mutations))


SMALL = ScopeConfig(max_inputs=2, max_block_size=2, max_steps=8, max_pending_claims=3, max_queue_length=2)
ALL_VARIANTS = ["strawman", "forced", "blacklist", "upgrade", "upgrade-blacklist", "naive-blacklist", "naive-upgrade"]

choices = st.lists(st.integers(min_value=0, max_value=10_000), max_size=12)
variant_names = st.sampled_from(ALL_VARIANTS)


@pytest.fixture
def small_scope():
    return SMALL
