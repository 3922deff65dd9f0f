"""Probe criterion-8d knobs; prints full diagnostics per run."""
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from llcsim.workload import OperatorShape, build_logit_mapping, generate_traces
from llcsim import SimConfig, run_simulation

shape = OperatorShape(8, 8, 8192, 128)
mapping = build_logit_mapping(shape, 16)
TRACES = generate_traces(shape, mapping)


def one(job):
    tag, arb, thr, l2, extra = job
    t0 = time.time()
    cfg = SimConfig(arbiter=arb, throttle=thr, l2_size=l2, **extra)
    rec = run_simulation(cfg, [list(b) for b in TRACES])
    d = rec.derived
    return (f"{tag:14s} l2={l2 >> 20:2d}MB {arb:4s}/{thr:5s} cycles={rec.total_cycles:8d} "
            f"dram_rd={rec.dram['reads']:6d} rowhit={d['dram_row_hit_rate']:.3f} "
            f"stall={d['stall_fraction']:.3f} util={d['mshr_entry_utilization']:.3f} "
            f"mshr_hit={d['mshr_hit_rate']:.4f} hit={d['cache_hit_rate']:.3f} "
            f"[{time.time() - t0:.0f}s]")


CL32 = {"t_rcd": 32, "t_rp": 32, "t_cas": 32}

jobs = [
    ("dq16cl32", "fcfs", "none", 4 << 20, dict(dram_queue_depth=16, **CL32)),
    ("dq16cl32", "BMA", "dynmg", 4 << 20, dict(dram_queue_depth=16, **CL32)),
    ("dq16cl32", "fcfs", "none", 16 << 20, dict(dram_queue_depth=16, **CL32)),
    ("dq16cl32", "BMA", "dynmg", 16 << 20, dict(dram_queue_depth=16, **CL32)),
    ("dq8", "fcfs", "none", 4 << 20, {"dram_queue_depth": 8}),
    ("dq8", "BMA", "dynmg", 4 << 20, {"dram_queue_depth": 8}),
    ("dq8", "fcfs", "none", 16 << 20, {"dram_queue_depth": 8}),
    ("dq8", "BMA", "dynmg", 16 << 20, {"dram_queue_depth": 8}),
]

with ProcessPoolExecutor(max_workers=2) as pool:
    for line in pool.map(one, jobs):
        print(line, flush=True)
