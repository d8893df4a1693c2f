"""Why an upgrade needs more than a timeout.

An upgrade announced while a forced input waits in the queue installs a
blacklist that covers it. If the only protection is a waiting period, the
upgrade deploys after the timeout with the input still queued and now
blacklisted, and the rollup freezes. The safe design blocks deployment
until the queue no longer holds inputs the new policy would censor.
"""
from _show import show

from rollupcheck.domain import ScopeConfig, variant
from rollupcheck.explorer import CheckRequest, Mode, check, run

scope = ScopeConfig(max_inputs=1, max_steps=6)
v = check(CheckRequest(variant("naive-upgrade"), scope, "FREEZE"))
print(f"FREEZE on naive-upgrade: {v.outcome.value}")
show(v.witness, v.violation_index)

v = check(CheckRequest(variant("naive-upgrade"), scope, "UP2"))
print(f"\nUP2 (liveness) on naive-upgrade: {v.outcome.value}")
show(v.witness, v.violation_index)

v = run(CheckRequest(variant("upgrade"), scope, "frozen", Mode.RUN))
print(f"\nreach a frozen state on upgrade: {v.outcome.value}")
