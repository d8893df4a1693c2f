"""Blacklisting is not permanent in the safe design.

Policy updates travel through the forced queue, so a later policy can lift
an earlier one. Here an input is blacklisted by one queued policy, cleared
by a second, and then finalized. The search returns the shortest trace in
which a blacklisted input ends up finalized.
"""
from _show import show

from rollupcheck.domain import ScopeConfig, variant
from rollupcheck.explorer import CheckRequest, Mode, run

scope = ScopeConfig(max_inputs=1, max_block_size=1, max_steps=10)
v = run(CheckRequest(variant("upgrade-blacklist"), scope, "double-blacklist", Mode.RUN))
print(f"double-blacklist on upgrade-blacklist: {v.outcome.value} ({v.stats['states']} states)")
show(v.witness)
