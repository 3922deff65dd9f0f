"""Vector cores: instruction windows, thread-block scheduling, work stealing,
and the per-core throttling controller.

Each core owns num_inst_windows windows; a window runs one thread block at a
time and tracks its in-flight memory entries (bounded by inst_window_depth).
One op issues per cycle from the current window; if it cannot issue (window
full, or its block is drained but still waiting on responses) the core
switches round-robin to another active window with zero penalty. Reads probe
the private L1 first; misses to a line that is already outstanding merge
core-side. Writes are write-through and occupy an entry until the L2
acknowledges them.

max_tb caps how many windows may hold blocks; lowering it never preempts a
running block - surplus windows simply drain and stay empty. The in-core
controller (run each sub-period for throttled cores, or for every core in
the all-cores baseline mode) moves max_tb by one step based on how many
cycles the whole core spent waiting on memory (c_mem) or without any work
(c_idle).
"""

from __future__ import annotations

from collections import deque
from heapq import heappop

from .cache import L1Cache
from .config import SimConfig
from .workload import OP_COMPUTE, OP_READ, ThreadBlock


class InstructionWindow:
    __slots__ = ("block", "cursor", "outstanding", "bubble_left", "depth")

    def __init__(self, depth: int):
        self.block: ThreadBlock | None = None
        self.cursor = 0
        self.outstanding = 0
        self.bubble_left = 0
        self.depth = depth

    @property
    def state(self) -> str:
        if self.block is None:
            return "idle"
        if self.outstanding >= self.depth:
            return "full"
        if self.cursor >= len(self.block.ops):
            return "blocked"
        return "running"


class Core:
    def __init__(self, core_id: int, cfg: SimConfig, blocks: list[ThreadBlock], engine):
        self.core_id = core_id
        self.cfg = cfg
        self.engine = engine
        self.windows = [InstructionWindow(cfg.inst_window_depth)
                        for _ in range(cfg.num_inst_windows)]
        self.pending: deque[ThreadBlock] = deque(blocks)
        self.max_tb = cfg.num_inst_windows
        self.throttled = False
        self.cur_w = 0
        self.active_count = 0
        self.l1 = L1Cache(cfg)
        self.miss_table: dict[int, list[int]] = {}   # line addr -> waiting window idxs
        self.inbound: list = []                      # heap of (deliver_at, seq, addr, is_write, widx)
        self._depth = cfg.inst_window_depth
        self._steal = cfg.steal_enabled

        # sub-period counters plus lifetime totals
        self.c_mem = 0
        self.c_idle = 0
        self.c_mem_total = 0
        self.c_idle_total = 0
        self.reqs_issued = 0
        self.blocks_done = 0
        self.steals = 0
        self.last_block_cycle = 0

    # ------------------------------------------------------------------

    def tick(self, cycle: int) -> None:
        engine = self.engine
        windows = self.windows

        inbound = self.inbound
        if inbound and inbound[0][0] <= cycle:
            miss_table = self.miss_table
            while inbound and inbound[0][0] <= cycle:
                _, _, addr, is_write, widx = heappop(inbound)
                if is_write:
                    w = windows[widx]
                    w.outstanding -= 1
                    if w.outstanding == 0 and w.cursor >= len(w.block.ops):
                        self._finish(w, cycle)
                else:
                    for wi in miss_table.pop(addr):
                        w = windows[wi]
                        w.outstanding -= 1
                        if w.outstanding == 0 and w.cursor >= len(w.block.ops):
                            self._finish(w, cycle)
                    self.l1.fill(addr)
                engine.retire_request()

        # refill windows at block boundaries, stealing when starved
        if self.active_count < self.max_tb:
            if not self.pending and self._steal and self.active_count == 0:
                steal_thread_block(engine.cores, self.core_id)
            if self.pending:
                for w in windows:
                    if w.block is None:
                        w.block = self.pending.popleft()
                        w.cursor = 0
                        w.bubble_left = 0
                        self.active_count += 1
                        if not self.pending or self.active_count >= self.max_tb:
                            break

        # issue at most one op, round-robin from the current window
        n = len(windows)
        start = self.cur_w
        for k in range(n):
            wi = start + k
            if wi >= n:
                wi -= n
            w = windows[wi]
            block = w.block
            if block is None or w.cursor >= len(block.ops):
                continue
            kind, val = block.ops[w.cursor]
            if kind == OP_COMPUTE:
                if w.bubble_left == 0:
                    w.bubble_left = val
                w.bubble_left -= 1
                if w.bubble_left == 0:
                    w.cursor += 1
                    if w.cursor >= len(block.ops) and w.outstanding == 0:
                        self._finish(w, cycle)
            else:
                if w.outstanding >= self._depth:
                    continue   # window full: try the next one
                if kind == OP_READ:
                    if self.l1.read_probe(val):
                        w.cursor += 1
                        if w.cursor >= len(block.ops) and w.outstanding == 0:
                            self._finish(w, cycle)
                        self.cur_w = wi
                        return
                    w.outstanding += 1
                    waiters = self.miss_table.get(val)
                    if waiters is not None:
                        waiters.append(wi)   # merged with an outstanding line read
                    else:
                        self.miss_table[val] = [wi]
                        engine.send_request(cycle, self.core_id, wi, val, False)
                        self.reqs_issued += 1
                else:
                    self.l1.write_touch(val)
                    w.outstanding += 1
                    engine.send_request(cycle, self.core_id, wi, val, True)
                    self.reqs_issued += 1
                w.cursor += 1
            self.cur_w = wi
            return

        # nothing issued; an unissuable active window always waits on memory
        # (completed blocks are retired eagerly, bubbles always issue)
        if self.active_count:
            self.c_mem += 1
        elif not self.pending:
            self.c_idle += 1

    def _finish(self, w: InstructionWindow, cycle: int) -> None:
        w.block = None
        w.cursor = 0
        self.active_count -= 1
        self.blocks_done += 1
        self.last_block_cycle = cycle
        self.engine.block_completed()

    def has_work(self) -> bool:
        return bool(self.pending) or self.active_count > 0

    def roll_subperiod(self) -> None:
        self.c_mem_total += self.c_mem
        self.c_idle_total += self.c_idle
        self.c_mem = 0
        self.c_idle = 0


def update_incore_throttle(core: Core) -> int:
    """One sub-period decision: step max_tb by the memory-wait and idle counters.

    Counters are read before roll_subperiod resets them. Returns the new cap.
    """
    cfg = core.cfg
    max_windows = cfg.num_inst_windows
    if core.c_mem > cfg.cmem_high:
        core.max_tb = max(1, core.max_tb - 1)
    elif core.c_mem < cfg.cmem_low:
        core.max_tb = min(max_windows, core.max_tb + 1)
    if core.c_idle > cfg.cidle_high:
        core.max_tb = min(max_windows, core.max_tb + 1)
    return core.max_tb


def steal_thread_block(cores: list[Core], thief_id: int) -> bool:
    """Migrate the tail pending block of the most-loaded core to an idle one."""
    donor = None
    most = 0
    for c in cores:
        n = len(c.pending)
        if n > most:
            donor = c
            most = n
    if donor is None or donor.core_id == thief_id:
        return False
    block = donor.pending.pop()
    thief = cores[thief_id]
    thief.pending.append(block)
    thief.steals += 1
    return True
