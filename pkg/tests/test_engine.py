import pytest

from llcsim.config import SimConfig
from llcsim.engine import DeadlockError, Simulator, run_simulation, slice_for
from llcsim.workload import (OperatorShape, ThreadBlock, build_logit_mapping,
                             generate_traces)


def small_workload(seq_len=256, cores=8, groups=4, group_size=4):
    shape = OperatorShape(groups, group_size, seq_len, 128)
    mapping = build_logit_mapping(shape, cores)
    return generate_traces(shape, mapping)


class TestSliceFor:
    def test_address_zero(self):
        assert slice_for(0x0, SimConfig()) == 0

    def test_consecutive_lines_round_robin(self):
        cfg = SimConfig()
        hist = [0] * cfg.num_slices
        for i in range(64):
            hist[slice_for(i * 64, cfg)] += 1
        assert hist == [8] * 8

    def test_equal_set_index_same_slice(self):
        cfg = SimConfig()
        stride = cfg.l2_total_sets * 64
        assert slice_for(0x40, cfg) == slice_for(0x40 + stride, cfg)


class TestLatencyArithmetic:
    def test_single_miss_completion_sum(self):
        # issue -> interconnect -> tag -> MSHR -> fixed DRAM -> interconnect back
        cfg = SimConfig(num_cores=1, num_slices=1, l2_size=2 * 1024 * 1024,
                        inst_window_depth=1, num_inst_windows=1,
                        dram_mode="simple", dram_simple_latency=100,
                        steal_enabled=False)
        blocks = [[ThreadBlock(0, 0, [("R", 0x0), ("W", 0x40000)], 1)]]
        rec = run_simulation(cfg, blocks)
        miss_path = 2 * cfg.interconnect_latency + cfg.l2_hit_latency + \
            cfg.mshr_latency + cfg.dram_simple_latency          # = 128
        # read completes at 128, write issues then and completes 128 later;
        # termination is detected at the next cycle boundary
        assert rec.total_cycles == 2 * miss_path + 1

    def test_hit_completion_sum(self):
        cfg = SimConfig(num_cores=1, num_slices=1, l2_size=2 * 1024 * 1024,
                        l1_size=512, l1_assoc=1, inst_window_depth=1,
                        num_inst_windows=1, dram_mode="simple",
                        dram_simple_latency=100, steal_enabled=False)
        # A misses, B evicts A from L1, A again hits in L2
        blocks = [[ThreadBlock(0, 0, [("R", 0x0), ("R", 0x200), ("R", 0x0),
                                      ("W", 0x40000)], 1)]]
        rec = run_simulation(cfg, blocks)
        assert rec.per_slice["hits"] == [1]
        miss_path = 128
        hit_path = 2 * cfg.interconnect_latency + cfg.l2_hit_latency + \
            cfg.l2_data_latency                                  # = 48
        assert rec.total_cycles == 3 * miss_path + hit_path + 1


class TestTermination:
    def test_empty_traces_zero_cycles(self):
        cfg = SimConfig(num_cores=2, num_slices=1, steal_enabled=False)
        rec = run_simulation(cfg, [[], []])
        assert rec.total_cycles == 0
        assert rec.per_slice["hits"] == [0]
        assert rec.dram["reads"] == 0

    def test_everything_drains(self):
        cfg = SimConfig(num_cores=8, num_slices=4, l2_size=4 * 1024 * 1024)
        sim = Simulator(cfg, small_workload())
        sim.run()
        assert sim.inflight == 0
        assert sim.blocks_left == 0
        assert all(sl.drained() for sl in sim.slices)
        assert not sim.dram.busy()

    def test_request_conservation(self):
        cfg = SimConfig(num_cores=8, num_slices=4, l2_size=4 * 1024 * 1024)
        rec = run_simulation(cfg, small_workload())
        issued = sum(rec.per_core["reqs_issued"])
        served = sum(rec.per_slice["requests_served"])
        looked_up = sum(rec.per_slice["hits"]) + sum(rec.per_slice["misses"])
        assert issued == served == looked_up
        assert rec.dram["reads"] == sum(rec.per_slice["mshr_allocs"])
        assert sum(rec.per_slice["mshr_merges"]) + sum(rec.per_slice["mshr_allocs"]) \
            == sum(rec.per_slice["misses"])

    def test_deadlock_detector_aborts_with_dump(self):
        cfg = SimConfig(num_cores=1, num_slices=1, l2_size=2 * 1024 * 1024,
                        deadlock_cycles=2000, steal_enabled=False)
        sim = Simulator(cfg, [[ThreadBlock(0, 0, [("R", 0x0)], 1)]])

        class BlackHoleDram:
            def enqueue(self, addr, is_write, slice_id):
                return True

            def tick(self, cycle):
                return []

            def busy(self):
                return True

            def stats(self):
                return {"reads": 0, "writes": 0, "row_hits": 0,
                        "row_misses": 0, "busy_cycles": 0}

        hole = BlackHoleDram()
        sim.dram = hole
        for sl in sim.slices:
            sl.dram = hole
        with pytest.raises(DeadlockError, match="no progress"):
            sim.run()


class TestDeterminism:
    def test_identical_runs_identical_json(self):
        cfg = SimConfig(num_cores=8, num_slices=4, arbiter="BMA",
                        throttle="dynmg", l2_size=4 * 1024 * 1024)
        traces = small_workload()
        a = run_simulation(cfg, traces).to_json()
        cfg2 = SimConfig(num_cores=8, num_slices=4, arbiter="BMA",
                         throttle="dynmg", l2_size=4 * 1024 * 1024)
        b = run_simulation(cfg2, small_workload()).to_json()
        assert a == b

    def test_seed_field_recorded(self):
        cfg = SimConfig(num_cores=2, num_slices=1, seed=42, steal_enabled=False)
        rec = run_simulation(cfg, [[], []])
        assert rec.config["seed"] == 42


class TestThrottleIntegration:
    def test_dyncta_marks_all_cores(self):
        cfg = SimConfig(num_cores=4, num_slices=2, throttle="dyncta",
                        l2_size=1024 * 1024)
        sim = Simulator(cfg, small_workload(cores=4, seq_len=128))
        assert all(c.throttled for c in sim.cores)
        assert sim.controller is None
        sim.run()

    def test_dynmg_produces_gear_trace(self):
        cfg = SimConfig(num_cores=8, num_slices=4, throttle="dynmg",
                        l2_size=4 * 1024 * 1024, mshr_num_entry=2)
        rec = run_simulation(cfg, small_workload(seq_len=512))
        assert len(rec.throttle["gear_trace"]) == len(rec.throttle["tcs_series"])
        assert all(0 <= g <= 4 for g in rec.throttle["gear_trace"])

    def test_none_mode_keeps_full_parallelism(self):
        cfg = SimConfig(num_cores=8, num_slices=4, throttle="none",
                        l2_size=4 * 1024 * 1024)
        sim = Simulator(cfg, small_workload())
        sim.run()
        assert all(c.max_tb == cfg.num_inst_windows for c in sim.cores)


class TestStealingIntegration:
    def test_skewed_load_narrows_finish_spread_with_stealing(self):
        # one core holds half the blocks; stealing narrows the per-core
        # finish-time spread (last-block completion cycles)
        shape = OperatorShape(8, 2, 256, 128)
        mapping = build_logit_mapping(shape, 4)
        traces = generate_traces(shape, mapping, num_cores=4)
        skewed = [traces[0] + traces[1], traces[2], [], traces[3]]
        base = SimConfig(num_cores=4, num_slices=2, l2_size=2 * 1024 * 1024)
        with_steal = run_simulation(base, [list(b) for b in skewed])
        base2 = SimConfig(num_cores=4, num_slices=2, l2_size=2 * 1024 * 1024,
                          steal_enabled=False)
        without = run_simulation(base2, [list(b) for b in skewed])

        def spread(rec):
            finishes = [c for c, n in zip(rec.per_core["last_block_cycle"],
                                          rec.per_core["blocks_executed"]) if n]
            return max(finishes) - min(finishes)

        assert spread(with_steal) < spread(without)
        assert sum(with_steal.per_core["steals"]) > 0
        assert sum(with_steal.per_core["blocks_executed"]) == \
            sum(without.per_core["blocks_executed"])
        # a block never executes twice even when migrated
        assert sum(with_steal.per_core["blocks_executed"]) == sum(map(len, skewed))
