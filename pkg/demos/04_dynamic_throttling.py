#!/usr/bin/env python3
"""Watch the two-level throttling controller react to cache contention.

Every sampling period the controller classifies the stalled fraction of
slice cycles, steps the gear (which fixes how many of the fastest cores are
held back), and the throttled cores then tune their own concurrent-block cap
each sub-period from memory-wait and idle counters.
"""

from llcsim import (OperatorShape, SimConfig, build_logit_mapping,
                    generate_traces, run_simulation)

shape = OperatorShape(num_groups=8, group_size=8, seq_len=2048, head_dim=128)
mapping = build_logit_mapping(shape, 16)
traces = generate_traces(shape, mapping)

runs = {}
for throttle in ("none", "dyncta", "dynmg"):
    cfg = SimConfig(arbiter="fcfs", throttle=throttle)
    runs[throttle] = run_simulation(cfg, [list(b) for b in traces])

base = runs["none"].total_cycles
print(f"{'throttle':8s} {'cycles':>9s} {'speedup':>8s} {'mshr_hit':>9s} {'stall':>6s}")
for name, rec in runs.items():
    print(f"{name:8s} {rec.total_cycles:9d} {base / rec.total_cycles:8.3f} "
          f"{rec.derived['mshr_hit_rate']:9.4f} "
          f"{rec.derived['stall_fraction']:6.3f}")

rec = runs["dynmg"]
print("\ncontention and gear over the first 30 sampling periods (dynmg):")
tcs = rec.throttle["tcs_series"][:30]
gear = rec.throttle["gear_trace"][:30]
print("  t_cs:", " ".join(f"{t:.2f}" for t in tcs))
print("  gear:", "    ".join(str(g) for g in gear))
print("\ngear scale: 0 = free running, 1-4 = throttle 1/8, 1/4, 1/2, 3/4 of cores")
