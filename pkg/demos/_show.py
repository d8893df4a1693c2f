"""Shared printing helper for the demo scripts."""
from rollupcheck.temporal import Trace


def show(trace: Trace, mark=None) -> None:
    print(f"  0. (initial)  {trace.states[0]!r}")
    for n, (e, s) in enumerate(zip(trace.events, trace.states[1:]), 1):
        flag = "  <-- property fails at this position" if n == mark else ""
        print(f"  {n}. {e!r}{flag}\n       -> {s!r}")
    if trace.lasso_to is not None:
        print(f"  (loops back to position {trace.lasso_to})")
