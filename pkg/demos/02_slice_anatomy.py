#!/usr/bin/env python3
"""Trace a handful of requests through one L2 slice, cycle by cycle.

Shows the fixed request path: interconnect -> request queue -> lookup
pipeline (tag result after hit-latency, MSHR probe mshr-latency later) ->
DRAM, and the stall that freezes the whole pipeline once the six MSHR
entries are spoken for.
"""

from llcsim import SimConfig, ThreadBlock, run_simulation
from llcsim.engine import Simulator

cfg = SimConfig(num_cores=1, num_slices=1, l2_size=2 * 1024 * 1024,
                inst_window_depth=1, num_inst_windows=1,
                dram_mode="simple", dram_simple_latency=100,
                steal_enabled=False)

print("one serialized read miss, then the same line again as an L2 hit\n")
# A misses and fills both levels; B evicts A from the tiny direct-mapped L1;
# re-reading A then hits in L2 only
cfg.l1_size, cfg.l1_assoc = 512, 1
ops = [("R", 0x0), ("R", 0x200), ("R", 0x0), ("W", 0x40000)]
rec = run_simulation(cfg, [[ThreadBlock(0, 0, ops, 1)]])
i, h, m, d = (cfg.interconnect_latency, cfg.l2_hit_latency,
              cfg.mshr_latency, cfg.dram_simple_latency)
print(f"  miss path : {i} (to slice) + {h} (tag) + {m} (MSHR) + {d} (DRAM) "
      f"+ {i} (return) = {2 * i + h + m + d} cycles")
print(f"  hit path  : {i} + {h} (tag) + {cfg.l2_data_latency} (data) + {i} "
      f"= {2 * i + h + cfg.l2_data_latency} cycles")
print(f"  run: {rec.total_cycles} cycles, "
      f"L2 hits={rec.per_slice['hits'][0]} misses={rec.per_slice['misses'][0]}\n")

print("now a burst of distinct misses against 6 MSHR entries:")
cfg2 = SimConfig(num_cores=1, num_slices=1, l2_size=2 * 1024 * 1024,
                 dram_mode="simple", dram_simple_latency=100,
                 steal_enabled=False)
ops = [("R", i * 64) for i in range(32)] + [("W", 0x40000)]
sim = Simulator(cfg2, [[ThreadBlock(0, 0, ops, 1)]])
rec = sim.run()
sl = rec.per_slice
print(f"  requests={sl['requests_served'][0]} misses={sl['misses'][0]} "
      f"allocations={sl['mshr_allocs'][0]}")
print(f"  stall cycles={sl['stall_cycles'][0]} of {rec.total_cycles} "
      f"(pipeline frozen while entries are full)")
print(f"  MSHR entry utilization={rec.derived['mshr_entry_utilization']:.2f}")
print(f"  DRAM reads={rec.dram['reads']} (exactly one per allocation)")
