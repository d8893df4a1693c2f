"""Why an admin must not edit the blacklist directly.

A user forces input i0 into the queue; the admin then blacklists i0 on the
spot. The queue head can now never be processed, so the rollup is frozen.
The same two steps break BP3 (a queued input is never retroactively
blacklisted). The safe design routes policy changes through the queue, and
there no such trace exists.
"""
from _show import show

from rollupcheck.domain import ScopeConfig, variant
from rollupcheck.explorer import CheckRequest, check

scope = ScopeConfig(max_inputs=1, max_steps=6)
for name in ("naive-blacklist", "blacklist"):
    for prop in ("BP3", "FREEZE"):
        v = check(CheckRequest(variant(name), scope, prop))
        print(f"{prop} on {name}: {v.outcome.value}")
        if v.witness is not None:
            show(v.witness, v.violation_index)
