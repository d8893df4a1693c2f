"""Random testing against deliberately broken queue processing.

Each mutation disables one safeguard of the queue. Fuzzing finds a
violation, shrinks it, and the explorer confirms the shrunk length is the
shortest possible.
"""
import dataclasses

from _show import show

from rollupcheck.domain import ScopeConfig, variant
from rollupcheck.explorer import CheckRequest, check
from rollupcheck.fuzz import FuzzConfig, fuzz

scope = ScopeConfig(max_inputs=2, max_steps=6)
for mutation in ("skip_head_guard", "lossy_queue", "no_compaction"):
    v = dataclasses.replace(variant("forced"), mutations=frozenset({mutation}))
    report = fuzz(FuzzConfig(seed=1, num_traces=2000, max_len=6, variant=v, scope=scope))
    print(f"\n== forced with {mutation}: {len(report.findings)} properties violated")
    for f in report.findings:
        best = check(CheckRequest(v, scope, f.prop))
        print(f"{f.prop}: {f.count} traces, shrunk {f.original_length} -> {len(f.shrunk)} "
              f"(shortest possible {len(best.witness)})")
    if report.findings:
        show(report.findings[0].shrunk, report.findings[0].violation_index)
