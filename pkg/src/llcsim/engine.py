"""Deterministic cycle engine: clock, component wiring, and termination.

Tick order within one cycle is fixed:

    throttle controllers -> cores (id order) -> L2 slices (id order,
    arrivals pulled at tick start) -> DRAM channels -> stats sampling

All cross-component traffic moves over fixed-latency channels: a message
sent at cycle t is visible to its receiver's tick at t + interconnect_latency
(or later if the slice request queue is full and exerts backpressure), so no
component ever observes a same-cycle write by a later-ticking peer. DRAM
completions are handed to the owning slice within the DRAM phase - the slice
reacts the next cycle - and the forwarded core responses ride the return
channel like any hit response.

Runs are bit-deterministic: identical (config, traces) produce identical
StatsRecord contents. A run ends when every thread block has completed, every
request has been answered, and all queues, MSHRs, and in-flight fills or
write-backs have drained. If nothing makes progress for deadlock_cycles
while work remains, the engine aborts with a state dump.
"""

from __future__ import annotations

from collections import Counter
from heapq import heappush

from .arbiter import make_arbiter
from .cache import L2Slice, Request
from .config import SimConfig
from .core import Core, update_incore_throttle
from .dram import make_dram
from .stats import StatsRecord, finalize
from .throttle import GlobalThrottleController
from .workload import ThreadBlock


class DeadlockError(RuntimeError):
    pass


def slice_for(addr: int, cfg: SimConfig) -> int:
    """Owning slice of a line address: set index modulo the slice count."""
    return ((addr // cfg.line_size) % cfg.l2_total_sets) % cfg.num_slices


class Simulator:
    def __init__(self, cfg: SimConfig, per_core_blocks: list[list[ThreadBlock]],
                 record_responses: bool = False, check_invariants: bool = False):
        cfg.validate()
        if len(per_core_blocks) > cfg.num_cores:
            raise ValueError(f"traces cover {len(per_core_blocks)} cores but the "
                             f"configuration has {cfg.num_cores}")
        self.cfg = cfg
        self.record_responses = record_responses
        self.check_invariants = check_invariants

        self.cycle = 0
        self.inflight = 0          # requests sent minus responses retired
        self.blocks_left = sum(len(b) for b in per_core_blocks)
        self._progress = 0
        self._seq = 0

        self.dram = make_dram(cfg)
        self.slices = [L2Slice(i, cfg, make_arbiter(cfg.arbiter, cfg.num_cores, cfg),
                               self.send_response, self.dram)
                       for i in range(cfg.num_slices)]
        blocks = list(per_core_blocks) + [[] for _ in range(cfg.num_cores - len(per_core_blocks))]
        self.cores = [Core(i, cfg, blocks[i], self) for i in range(cfg.num_cores)]

        self.controller = GlobalThrottleController(cfg) if cfg.throttle == "dynmg" else None
        if cfg.throttle == "dyncta":
            for c in self.cores:
                c.throttled = True   # the all-cores baseline throttles everywhere

        self.occupancy_integral = 0
        self.tcs_series: list[float] = []
        self._tcs_snapshot = [0] * cfg.num_slices
        self.response_multiset: Counter | None = Counter() if record_responses else None

    # -- channel endpoints used by cores and slices ------------------------

    def send_request(self, cycle: int, core_id: int, window: int, addr: int,
                     is_write: bool) -> None:
        self._seq += 1
        req = Request(self._seq, core_id, window, addr, is_write, cycle)
        sid = ((addr // self.cfg.line_size) % self.cfg.l2_total_sets) % self.cfg.num_slices
        sl = self.slices[sid]
        sl.inbound[core_id].append((cycle + self.cfg.interconnect_latency, req))
        sl.inbound_count += 1
        self.inflight += 1
        self._progress += 1

    def send_response(self, send_cycle: int, core_id: int, addr: int,
                      is_write: bool, window: int) -> None:
        self._seq += 1
        heappush(self.cores[core_id].inbound,
                 (send_cycle + self.cfg.interconnect_latency, self._seq,
                  addr, is_write, window))

    def retire_request(self) -> None:
        self.inflight -= 1
        self._progress += 1

    def block_completed(self) -> None:
        self.blocks_left -= 1
        self._progress += 1

    # -- run loop -----------------------------------------------------------

    def run(self) -> StatsRecord:
        cfg = self.cfg
        cores = self.cores
        slices = self.slices
        dram = self.dram
        sub_period = cfg.sub_period
        sampling_period = cfg.sampling_period
        mode = cfg.throttle
        record = self.response_multiset
        check = self.check_invariants

        core_ticks = [c.tick for c in cores]
        slice_ticks = [sl.tick for sl in slices]
        mshr_views = [sl.mshr for sl in slices]
        dram_tick = dram.tick

        last_progress_marker = -1
        last_progress_cycle = 0
        next_boundary = sub_period
        occupancy = 0
        cycle = 0
        while True:
            if self.blocks_left == 0 and self.inflight == 0:
                if all(sl.drained() for sl in slices) and not dram.busy():
                    break

            if cycle == next_boundary:
                next_boundary += sub_period
                if mode == "dynmg":
                    for c in cores:
                        if c.throttled:
                            update_incore_throttle(c)
                elif mode == "dyncta":
                    for c in cores:
                        update_incore_throttle(c)
                for c in cores:
                    c.roll_subperiod()
                if cycle % sampling_period == 0:
                    self._record_tcs(cycle)
                    if self.controller is not None:
                        self.controller.sampling_tick(slices, cores)

            if record is None:
                for tick in core_ticks:
                    tick(cycle)
            else:
                for c in cores:
                    for e in c.inbound:
                        if e[0] <= cycle:
                            record[(c.core_id, e[2], e[3])] += 1
                    c.tick(cycle)

            for tick in slice_ticks:
                tick(cycle)
            if check:
                for sl in slices:
                    sl.check_invariants()

            for addr, is_write, slice_id in dram_tick(cycle):
                self._progress += 1
                if not is_write:
                    slices[slice_id].dram_fill(cycle, addr)

            for m in mshr_views:
                occupancy += len(m)

            cycle += 1
            if self._progress != last_progress_marker:
                last_progress_marker = self._progress
                last_progress_cycle = cycle
            elif cycle - last_progress_cycle >= cfg.deadlock_cycles:
                raise DeadlockError(self._dump_state(cycle))
        self.occupancy_integral = occupancy

        self.cycle = cycle
        return finalize(cycle, cfg, slices, cores, dram, self.controller,
                        self.occupancy_integral, self.tcs_series)

    def _record_tcs(self, cycle: int) -> None:
        deltas = []
        for i, sl in enumerate(self.slices):
            deltas.append(sl.stall_cycles - self._tcs_snapshot[i])
            self._tcs_snapshot[i] = sl.stall_cycles
        self.tcs_series.append(sum(deltas) / (self.cfg.num_slices * self.cfg.sampling_period))

    def _dump_state(self, cycle: int) -> str:
        lines = [f"no progress for {self.cfg.deadlock_cycles} cycles at cycle {cycle}",
                 f"blocks_left={self.blocks_left} inflight={self.inflight}"]
        for sl in self.slices:
            lines.append(
                f"slice {sl.slice_id}: req_q={len(sl.req_q)} resp_q={len(sl.resp_q)} "
                f"pre_tag={len(sl.pre_tag)} post_tag={len(sl.post_tag)} "
                f"mshr={len(sl.mshr)} stall={sl.stall} "
                f"dispatch_pending={len(sl.dispatch_pending)}")
        for c in self.cores:
            busy = [(w.state, w.outstanding) for w in c.windows]
            lines.append(f"core {c.core_id}: pending={len(c.pending)} windows={busy} "
                         f"responses_in_flight={len(c.inbound)}")
        lines.append(f"dram busy={self.dram.busy()}")
        return "\n".join(lines)


def run_simulation(cfg: SimConfig, per_core_blocks: list[list[ThreadBlock]],
                   record_responses: bool = False,
                   check_invariants: bool = False) -> StatsRecord:
    sim = Simulator(cfg, per_core_blocks, record_responses, check_invariants)
    return sim.run()
