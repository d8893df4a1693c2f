"""Temporal connectives over finite traces and lasso traces.

Formulas are small trees of `Formula` nodes.  Atoms are Python callables of
``(view, position)``; an atom that reads the next state (a primed
expression) or the event leaving a position must say so with
``primed=True``.

Plain finite traces use the bounded reading: ``Always`` quantifies up to the
end, ``Eventually`` needs a witness inside the trace, ``Releases`` is weak.
Primed sub-formulas are only defined strictly before the last position.

A lasso trace stands for the infinite word ``s0 .. s(j-1) (sj .. s(n-2))^w``
where ``states[n-1] == states[j]``.  It is evaluated on a window that
unrolls the loop a few times, so past operators see long enough histories
and every value is periodic on the last copy of the loop.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from rollupcheck.domain import L1State
from rollupcheck.transitions import Event


class MalformedFormula(ValueError):
    """A primed expression was evaluated where no next state exists."""


@dataclass(frozen=True)
class Trace:
    states: tuple[L1State, ...]
    events: tuple[Event, ...] = ()
    lasso_to: Optional[int] = None

    def __post_init__(self):
        if not self.states:
            raise ValueError("a trace has at least one state")
        if len(self.states) != len(self.events) + 1:
            raise ValueError("a trace has exactly one event between consecutive states")
        if self.lasso_to is not None:
            if not 0 <= self.lasso_to < len(self.states) - 1:
                raise ValueError("lasso_to must point before the last state")
            if self.states[-1] != self.states[self.lasso_to]:
                raise ValueError("the last state of a lasso must equal states[lasso_to]")

    def __len__(self):
        """Number of transitions."""
        return len(self.events)

    @property
    def is_lasso(self) -> bool:
        return self.lasso_to is not None

    @property
    def last(self) -> L1State:
        return self.states[-1]

    def prefix(self, n: int) -> "Trace":
        """The first `n` transitions, as a plain trace."""
        return Trace(self.states[: n + 1], self.events[:n])


class Outcome(enum.Enum):
    HOLDS = "Holds"
    VIOLATED = "Violated"
    NO_COUNTEREXAMPLE = "NoCounterexampleWithinBound"


@dataclass
class PropertyVerdict:
    """Result of a check or run.

    For ``check``, HOLDS means the whole reachable graph was exhausted before
    the step bound.  For ``run``, HOLDS means a witness was found and is
    carried in `witness`.
    """

    outcome: Outcome
    violation_index: Optional[int] = None
    witness: Optional[Trace] = None
    target: str = ""
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome is Outcome.VIOLATED and (self.violation_index is None or self.witness is None):
            raise ValueError("a violation needs an index and a witness trace")


# -- formulas ----------------------------------------------------------------

class Formula:
    primed = False
    past_depth = 0

    def __invert__(self):
        return Not(self)

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __rshift__(self, other):
        return Implies(self, other)


class Atom(Formula):
    def __init__(self, fn: Callable[["TraceView", int], bool], primed: bool = False, label: str = ""):
        self.fn = fn
        self.primed = primed
        self.label = label or getattr(fn, "__name__", "atom")

    def __repr__(self):
        return self.label


class Not(Formula):
    def __init__(self, arg: Formula):
        self.arg = arg
        self.primed = arg.primed
        self.past_depth = arg.past_depth


class _Binary(Formula):
    def __init__(self, *args: Formula):
        self.args = args
        self.primed = any(a.primed for a in args)
        self.past_depth = max(a.past_depth for a in args)


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Implies(_Binary):
    def __init__(self, lhs: Formula, rhs: Formula):
        super().__init__(lhs, rhs)


class _Unary(Formula):
    def __init__(self, arg: Formula):
        self.arg = arg
        # a temporal operator is defined everywhere; it ranges only over the
        # positions where its argument is
        self.primed = False
        self.past_depth = arg.past_depth


class Always(_Unary):
    pass


class Eventually(_Unary):
    pass


class Once(_Unary):
    def __init__(self, arg):
        super().__init__(arg)
        self.past_depth = arg.past_depth + 1


class Historically(_Unary):
    def __init__(self, arg):
        super().__init__(arg)
        self.past_depth = arg.past_depth + 1


class Releases(Formula):
    """``trigger releases held``: `held` holds up to and including the first
    position where `trigger` holds; if `trigger` never holds, `held` holds
    at every remaining position."""

    def __init__(self, trigger: Formula, held: Formula):
        self.trigger = trigger
        self.held = held
        self.past_depth = max(trigger.past_depth, held.past_depth)


class _Binder(Formula):
    def __init__(self, body: Callable[[Any], Formula], primed: bool, past_depth: int):
        self.body = body
        self.primed = primed
        self.past_depth = past_depth
        self._cache: dict = {}

    def instance(self, x) -> Formula:
        f = self._cache.get(x)
        if f is None:
            f = self._cache[x] = self.body(x)
        return f


class ForAll(_Binder):
    def __init__(self, domain: Callable[["TraceView"], Iterable], body, primed=False, past_depth=0):
        super().__init__(body, primed, past_depth)
        self.domain = domain


class Exists(_Binder):
    def __init__(self, domain: Callable[["TraceView"], Iterable], body, primed=False, past_depth=0):
        super().__init__(body, primed, past_depth)
        self.domain = domain


class Let(_Binder):
    """Bind the value of an expression at the current position."""

    def __init__(self, value: Callable[["TraceView", int], Any], body, primed=False, past_depth=0):
        super().__init__(body, primed, past_depth)
        self.value = value


# -- evaluation ----------------------------------------------------------------

class TraceView:
    """Position-indexed access to a (possibly unrolled) trace."""

    def __init__(self, trace: Trace, unroll: int = 4):
        self.trace = trace
        n = len(trace.states)
        self.n = n
        if trace.lasso_to is None:
            self.loop = 0
            self.horizon = n
        else:
            self.loop = n - 1 - trace.lasso_to
            self.horizon = (n - 1) + unroll * self.loop
        self._domains: dict = {}

    def index(self, p: int) -> int:
        if p < self.n - 1 or self.loop == 0:
            return p
        return self.trace.lasso_to + (p - (self.n - 1)) % self.loop

    def state(self, p: int) -> L1State:
        return self.trace.states[self.index(p)]

    def has_next(self, p: int) -> bool:
        return self.loop > 0 or p < self.n - 1

    def next_state(self, p: int) -> L1State:
        if not self.has_next(p):
            raise MalformedFormula(f"no next state at final position {p}")
        return self.state(p + 1)

    def event(self, p: int) -> Event:
        if not self.has_next(p):
            raise MalformedFormula(f"no event leaves final position {p}")
        return self.trace.events[self.index(p)]

    def domain(self, key, compute):
        """Memoized quantifier domain over the whole trace."""
        if key not in self._domains:
            self._domains[key] = tuple(compute(self.trace))
        return self._domains[key]

    def defined(self, f: Formula, p: int) -> bool:
        return not f.primed or self.has_next(p)

    def future(self, p: int) -> Iterable[int]:
        if self.loop == 0:
            return range(p, self.horizon)
        # positions past the window repeat the last copy of the loop
        return list(range(p, self.horizon)) + list(range(self.horizon - self.loop, self.horizon))


class Evaluator:
    def __init__(self, trace: Trace, unroll: int = 4):
        self.view = TraceView(trace, unroll)
        self.memo: dict = {}

    def __call__(self, f: Formula, p: int) -> bool:
        key = (id(f), p)
        r = self.memo.get(key)
        if r is None:
            r = self.memo[key] = self._eval(f, p)
        return r

    def _eval(self, f: Formula, p: int) -> bool:
        v = self.view
        if isinstance(f, Atom):
            if f.primed and not v.has_next(p):
                raise MalformedFormula(f"{f!r} is primed and {p} is the final position")
            return bool(f.fn(v, p))
        if isinstance(f, Not):
            return not self(f.arg, p)
        if isinstance(f, And):
            return all(self(a, p) for a in f.args)
        if isinstance(f, Or):
            return any(self(a, p) for a in f.args)
        if isinstance(f, Implies):
            lhs, rhs = f.args
            return (not self(lhs, p)) or self(rhs, p)
        if isinstance(f, Always):
            return all(self(f.arg, q) for q in v.future(p) if v.defined(f.arg, q))
        if isinstance(f, Eventually):
            return any(self(f.arg, q) for q in v.future(p) if v.defined(f.arg, q))
        if isinstance(f, Once):
            return any(self(f.arg, q) for q in range(p, -1, -1) if v.defined(f.arg, q))
        if isinstance(f, Historically):
            return all(self(f.arg, q) for q in range(p, -1, -1) if v.defined(f.arg, q))
        if isinstance(f, Releases):
            for q in v.future(p):
                if not (v.defined(f.held, q) and v.defined(f.trigger, q)):
                    break
                if not self(f.held, q):
                    return False
                if self(f.trigger, q):
                    return True
            return True
        if isinstance(f, ForAll):
            return all(self(f.instance(x), p) for x in f.domain(v))
        if isinstance(f, Exists):
            return any(self(f.instance(x), p) for x in f.domain(v))
        if isinstance(f, Let):
            return self(f.instance(f.value(v, p)), p)
        raise TypeError(f"not a formula: {f!r}")


def eval_at(formula: Formula, trace: Trace, i: int, unroll: int = 4) -> bool:
    if not 0 <= i < len(trace.states):
        raise IndexError(f"position {i} outside the trace")
    return Evaluator(trace, unroll)(formula, i)


def first_violation(body: Formula, trace: Trace, unroll: int = 4) -> Optional[int]:
    """Smallest position where ``body`` fails, i.e. where ``Always(body)`` breaks.

    On a lasso the position may lie in an unrolled copy of the loop.
    """
    ev = Evaluator(trace, unroll)
    seen = set()
    for q in ev.view.future(0):
        if q in seen or not ev.view.defined(body, q):
            continue
        seen.add(q)
        if not ev(body, q):
            return q
    return None
