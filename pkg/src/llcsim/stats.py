"""Run statistics: raw cycle-resolution counters and every derived metric.

Raw counters and derived values are emitted together so reports never
re-derive anything from rounded numbers; finalize() is a pure function of the
raw dump and is re-runnable bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


@dataclass
class StatsRecord:
    total_cycles: int = 0
    config: dict = field(default_factory=dict)
    per_slice: dict = field(default_factory=dict)    # name -> list per slice
    per_core: dict = field(default_factory=dict)     # name -> list per core
    dram: dict = field(default_factory=dict)
    throttle: dict = field(default_factory=dict)     # tcs_series, gear_trace
    derived: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "total_cycles": self.total_cycles,
            "config": self.config,
            "per_slice": self.per_slice,
            "per_core": self.per_core,
            "dram": self.dram,
            "throttle": self.throttle,
            "derived": self.derived,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "StatsRecord":
        doc = json.loads(text)
        return StatsRecord(
            total_cycles=doc["total_cycles"], config=doc.get("config", {}),
            per_slice=doc["per_slice"], per_core=doc["per_core"],
            dram=doc["dram"], throttle=doc.get("throttle", {}),
            derived=doc["derived"])

    def csv_row(self, extra: dict | None = None) -> dict:
        row = {
            "cycles": self.total_cycles,
            "arbiter": self.config.get("arbiter", ""),
            "throttle": self.config.get("throttle", ""),
            "l2_size": self.config.get("l2_size", ""),
        }
        row.update(self.derived)
        if extra:
            row.update(extra)
        return row


def finalize(cycles: int, cfg, slices, cores, dram, controller=None,
             occupancy_integral: int = 0, tcs_series=None) -> StatsRecord:
    rec = StatsRecord(total_cycles=cycles, config=cfg.to_dict())

    hits = [sl.hits for sl in slices]
    misses = [sl.misses for sl in slices]
    merges = [sl.mshr_merges for sl in slices]
    allocs = [sl.mshr_allocs for sl in slices]
    stalls = [sl.stall_cycles for sl in slices]
    rec.per_slice = {
        "hits": hits,
        "misses": misses,
        "mshr_merges": merges,
        "mshr_allocs": allocs,
        "stall_cycles": stalls,
        "requests_served": [sl.requests_served for sl in slices],
        "writebacks": [sl.writebacks for sl in slices],
        "progress_counters": [list(sl.arbiter.counters) for sl in slices],
        "occupancy_integral": occupancy_integral,
    }
    rec.per_core = {
        "c_mem": [c.c_mem_total + c.c_mem for c in cores],
        "c_idle": [c.c_idle_total + c.c_idle for c in cores],
        "reqs_issued": [c.reqs_issued for c in cores],
        "l1_hits": [c.l1.hits for c in cores],
        "blocks_executed": [c.blocks_done for c in cores],
        "steals": [c.steals for c in cores],
        "final_max_tb": [c.max_tb for c in cores],
        "last_block_cycle": [c.last_block_cycle for c in cores],
    }
    rec.dram = dram.stats()
    rec.throttle = {
        "tcs_series": list(tcs_series) if tcs_series is not None else [],
        "gear_trace": list(controller.gear_trace) if controller is not None else [],
    }

    total_hits = sum(hits)
    total_misses = sum(misses)
    lookups = total_hits + total_misses
    total_merges = sum(merges)
    dram_ops = rec.dram["reads"] + rec.dram["writes"]
    seconds = cycles / (cfg.frequency_ghz * 1e9) if cycles else 0.0
    rec.derived = {
        "cache_hit_rate": total_hits / lookups if lookups else 0.0,
        "mshr_hit_rate": total_merges / total_misses if total_misses else 0.0,
        "mshr_entry_utilization": (
            occupancy_integral / (cycles * cfg.mshr_num_entry * cfg.num_slices)
            if cycles else 0.0),
        "dram_bandwidth_bytes_per_s": (
            dram_ops * cfg.line_size / seconds if seconds else 0.0),
        "dram_row_hit_rate": (
            rec.dram["row_hits"] / (rec.dram["row_hits"] + rec.dram["row_misses"])
            if rec.dram["row_hits"] + rec.dram["row_misses"] else 0.0),
        "l1_hit_total": sum(rec.per_core["l1_hits"]),
        "stall_fraction": (
            sum(stalls) / (cycles * cfg.num_slices) if cycles else 0.0),
    }
    return rec


def geomean(values: list[float]) -> float:
    if not values:
        return 0.0
    prod = 1.0
    for v in values:
        prod *= v
    return prod ** (1.0 / len(values))


def speedup_table(records: dict[str, StatsRecord], baseline: str) -> list[dict]:
    """Per-run speedup over the named baseline, plus a geomean row."""
    if baseline not in records:
        raise KeyError(f"baseline run {baseline!r} not among {sorted(records)}")
    base_cycles = records[baseline].total_cycles
    rows = []
    speedups = []
    for name in sorted(records):
        rec = records[name]
        sp = base_cycles / rec.total_cycles if rec.total_cycles else 0.0
        if name != baseline:
            speedups.append(sp)
        rows.append({"run": name, "cycles": rec.total_cycles, "speedup": sp,
                     "mshr_hit_rate": rec.derived.get("mshr_hit_rate", 0.0),
                     "cache_hit_rate": rec.derived.get("cache_hit_rate", 0.0)})
    rows.append({"run": "geomean", "cycles": "",
                 "speedup": geomean(speedups) if speedups else 1.0,
                 "mshr_hit_rate": "", "cache_hit_rate": ""})
    return rows
