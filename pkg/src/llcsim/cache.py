"""Set-associative caches and the shared-L2 slice pipeline.

A slice services one front-end event per cycle, responses first: if a DRAM
fill is queued it installs (alloc-on-fill, LRU victim, dirty write-back),
otherwise the arbiter picks one request from the request queue into the
lookup pipeline. A request's tag result is known hit_latency cycles after
entry; hits return on a direct path data_latency cycles later and never touch
the response queue. Misses probe the MSHR mshr_latency cycles after the tag
result: same-line entry with target headroom merges (an MSHR hit), a free
entry slot allocates and dispatches a line read to DRAM, and anything else
freezes the whole pipeline until the head's reservation succeeds - while
frozen, nothing leaves the request queue and no in-flight lookup advances,
so even would-hit requests wait behind the stall.

When DRAM returns a line, every merged requester is answered the same cycle
on the direct path, one fill record is queued for the array, and the MSHR
entry is freed immediately; the head of a stalled pipeline can therefore
re-reserve on the following cycle.

The private L1 is write-through / write-no-allocate / alloc-on-fill with
plain LRU; read misses to an already-outstanding line merge core-side so the
L2 never sees duplicate in-flight reads from one core.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .config import SimConfig


class ProtocolError(AssertionError):
    """Internal protocol violation (e.g. a DRAM response with no MSHR entry)."""


@dataclass
class CacheConfig:
    """Parameters of one cache level; policy fields are fixed per level in this model."""

    size_bytes: int
    associativity: int
    line_size: int
    hit_latency: int = 1
    data_latency: int = 0
    mshr_num_entry: int = 0
    mshr_num_target: int = 0
    mshr_latency: int = 0
    req_q_size: int = 1
    resp_q_size: int = 1
    alloc_on_fill: bool = True
    write_through: bool = False
    write_allocate: bool = True

    def __post_init__(self):
        if self.size_bytes % (self.associativity * self.line_size):
            raise ValueError("cache size must be divisible by associativity * line_size")
        if self.req_q_size < 1 or self.resp_q_size < 1:
            raise ValueError("queue sizes must be >= 1")

    @property
    def num_sets(self) -> int:
        return self.size_bytes // (self.associativity * self.line_size)


def l1_cache_config(cfg: SimConfig) -> CacheConfig:
    return CacheConfig(size_bytes=cfg.l1_size, associativity=cfg.l1_assoc,
                       line_size=cfg.line_size, hit_latency=cfg.l1_latency,
                       alloc_on_fill=True, write_through=True,
                       write_allocate=False)


def l2_cache_config(cfg: SimConfig) -> CacheConfig:
    return CacheConfig(size_bytes=cfg.l2_size, associativity=cfg.l2_assoc,
                       line_size=cfg.line_size, hit_latency=cfg.l2_hit_latency,
                       data_latency=cfg.l2_data_latency,
                       mshr_num_entry=cfg.mshr_num_entry,
                       mshr_num_target=cfg.mshr_num_target,
                       mshr_latency=cfg.mshr_latency,
                       req_q_size=cfg.req_q_size, resp_q_size=cfg.resp_q_size,
                       alloc_on_fill=True, write_through=False,
                       write_allocate=True)


class Request:
    """One cache-line read/write from a core, as seen by an L2 slice."""

    __slots__ = ("seq", "core", "window", "addr", "is_write", "issue_cycle")

    def __init__(self, seq, core, window, addr, is_write, issue_cycle):
        self.seq = seq
        self.core = core
        self.window = window
        self.addr = addr
        self.is_write = is_write
        self.issue_cycle = issue_cycle

    def __repr__(self):
        kind = "W" if self.is_write else "R"
        return f"Request({self.seq}, core={self.core}, {kind} {self.addr:#x})"


class LruSetArray:
    """Tag/dirty storage with per-set LRU; keys are full line addresses."""

    def __init__(self, num_sets: int, associativity: int, line_size: int,
                 set_of=None):
        self.assoc = associativity
        self.line_size = line_size
        self.sets = [dict() for _ in range(num_sets)]
        # set_of maps a line address to a local set index
        self._set_of = set_of or (lambda addr: (addr // line_size) % num_sets)

    def lookup(self, addr: int, touch: bool = True, set_dirty: bool = False) -> bool:
        s = self.sets[self._set_of(addr)]
        if addr not in s:
            return False
        dirty = s[addr] or set_dirty
        if touch:
            del s[addr]
            s[addr] = dirty
        elif set_dirty:
            s[addr] = dirty
        return True

    def fill(self, addr: int, dirty: bool = False):
        """Install a line; returns (victim_addr, victim_dirty) or None."""
        s = self.sets[self._set_of(addr)]
        if addr in s:
            d = s[addr] or dirty
            del s[addr]
            s[addr] = d
            return None
        victim = None
        if len(s) >= self.assoc:
            vaddr = next(iter(s))
            victim = (vaddr, s.pop(vaddr))
        s[addr] = dirty
        return victim

    def resident(self, addr: int) -> bool:
        return addr in self.sets[self._set_of(addr)]


class L1Cache:
    """Private core cache: write-through, write-no-allocate, fill on read response."""

    def __init__(self, cfg: SimConfig):
        self.ccfg = l1_cache_config(cfg)
        self.array = LruSetArray(self.ccfg.num_sets, self.ccfg.associativity,
                                 self.ccfg.line_size)
        self.hits = 0

    def read_probe(self, addr: int) -> bool:
        if self.array.lookup(addr):
            self.hits += 1
            return True
        return False

    def write_touch(self, addr: int) -> None:
        # write-through: update LRU if resident, never allocate
        self.array.lookup(addr)

    def fill(self, addr: int) -> None:
        self.array.fill(addr)   # write-through keeps L1 lines clean


class L2Slice:
    """One slice of the shared L2: request queue, lookup pipeline, MSHR, fill path."""

    def __init__(self, slice_id: int, cfg: SimConfig, arbiter, send_response, dram):
        self.slice_id = slice_id
        self.cfg = cfg
        self.ccfg = l2_cache_config(cfg)
        self.arbiter = arbiter
        self.send_response = send_response   # (send_cycle, core, addr, is_write, window)
        self.dram = dram

        num_slices = cfg.num_slices
        total_sets = cfg.l2_total_sets
        line = cfg.line_size

        def local_set(addr, _line=line, _total=total_sets, _n=num_slices):
            return ((addr // _line) % _total) // _n

        self.array = LruSetArray(cfg.l2_sets_per_slice, cfg.l2_assoc, line,
                                 set_of=local_set)
        # one FIFO channel per core, drained round-robin; under contention a
        # core's service share still wanders with queue timing - the baseline
        # imbalance that progress-counter policies push back against
        self.inbound: list[deque] = [deque() for _ in range(cfg.num_cores)]
        self._pull_rr = 0
        self.req_q: list[Request] = []
        self.resp_q: deque = deque()         # (addr, dirty) fill records
        self.deferred_fills: deque = deque()
        self.pre_tag: deque = deque()        # (Request, enter_pipe_time)
        self.post_tag: deque = deque()
        self.mshr: dict[int, list] = {}      # line addr -> [(core, window, is_write), ...]
        self.stall = False
        self.pipe_clock = 0
        self.dispatch_pending: deque = deque()   # (addr, is_write) awaiting DRAM queue space

        ccfg = self.ccfg
        self.tag_stage_depth = ccfg.hit_latency
        self.mshr_stage_depth = ccfg.hit_latency + ccfg.mshr_latency
        self.inbound_count = 0
        self._req_cap = ccfg.req_q_size
        self._resp_cap = ccfg.resp_q_size
        self._data_lat = ccfg.data_latency
        self._num_entry = ccfg.mshr_num_entry
        self._num_target = ccfg.mshr_num_target
        self._needs_age = arbiter.uses_speculation

        # counters
        self.hits = 0
        self.misses = 0
        self.mshr_merges = 0
        self.mshr_allocs = 0
        self.stall_cycles = 0
        self.requests_served = 0
        self.writebacks = 0
        self.classification_log: list | None = None   # enabled by tests

    # -- request-side ------------------------------------------------------

    def tick(self, cycle: int) -> None:
        # admit interconnect arrivals while the request queue has space
        req_q = self.req_q
        if self.inbound_count and len(req_q) < self._req_cap:
            inbound = self.inbound
            n = len(inbound)
            while len(req_q) < self._req_cap:
                picked = None
                start = self._pull_rr
                for k in range(n):
                    idx = start + k
                    if idx >= n:
                        idx -= n
                    ch = inbound[idx]
                    if ch and ch[0][0] <= cycle:
                        picked = ch
                        self._pull_rr = idx + 1 if idx + 1 < n else 0
                        break
                if picked is None:
                    break
                req_q.append(picked.popleft()[1])
                self.inbound_count -= 1

        if self._needs_age:
            self.arbiter.age(cycle)

        # head-of-pipeline MSHR reservation; a stalled head retries every cycle
        if self.stall:
            self._try_mshr_head(cycle)
        if not self.stall:
            self.pipe_clock += 1
            pc = self.pipe_clock
            if self.post_tag and pc - self.post_tag[0][1] >= self.mshr_stage_depth:
                self._try_mshr_head(cycle)
            if not self.stall and self.pre_tag and \
                    pc - self.pre_tag[0][1] >= self.tag_stage_depth:
                req, t_enter = self.pre_tag.popleft()
                if self.array.lookup(req.addr, touch=True, set_dirty=req.is_write):
                    self.hits += 1
                    if self.classification_log is not None:
                        self.classification_log.append((req.addr, req.is_write, "hit"))
                    self.arbiter.note_hit(req.addr)
                    self.send_response(cycle + self._data_lat,
                                       req.core, req.addr, req.is_write, req.window)
                else:
                    self.misses += 1
                    if self.classification_log is not None:
                        self.classification_log.append((req.addr, req.is_write, "miss"))
                    self.post_tag.append((req, t_enter))

        # front-end slot, responses first
        if self.deferred_fills and len(self.resp_q) < self._resp_cap:
            while self.deferred_fills and len(self.resp_q) < self._resp_cap:
                self.resp_q.append(self.deferred_fills.popleft())
        if self.resp_q:
            addr, dirty = self.resp_q.popleft()
            victim = self.array.fill(addr, dirty)
            if victim is not None and victim[1]:
                self.writebacks += 1
                self._dispatch(victim[0], True)
        elif req_q and not self.stall:
            idx = self.arbiter.select(req_q, self.mshr, cycle)
            req = req_q.pop(idx)
            self.arbiter.on_issue(req, cycle)
            self.requests_served += 1
            self.pre_tag.append((req, self.pipe_clock))

        # retry DRAM dispatches that found the channel queue full
        if self.dispatch_pending:
            while self.dispatch_pending:
                addr, is_write = self.dispatch_pending[0]
                if not self.dram.enqueue(addr, is_write, self.slice_id):
                    break
                self.dispatch_pending.popleft()

        if self.stall:
            self.stall_cycles += 1

    def _try_mshr_head(self, cycle: int) -> None:
        if not self.post_tag:
            self.stall = False
            return
        req = self.post_tag[0][0]
        targets = self.mshr.get(req.addr)
        if targets is not None:
            if len(targets) < self._num_target:
                targets.append((req.core, req.window, req.is_write))
                self.mshr_merges += 1
                self.post_tag.popleft()
                self.stall = False
            else:
                self.stall = True
        elif len(self.mshr) < self._num_entry:
            self.mshr[req.addr] = [(req.core, req.window, req.is_write)]
            self.mshr_allocs += 1
            self.post_tag.popleft()
            self.stall = False
            self._dispatch(req.addr, False)
        else:
            self.stall = True

    def _dispatch(self, addr: int, is_write: bool) -> None:
        if self.dispatch_pending or not self.dram.enqueue(addr, is_write, self.slice_id):
            self.dispatch_pending.append((addr, is_write))

    # -- response side -----------------------------------------------------

    def dram_fill(self, cycle: int, addr: int) -> None:
        """A line returned from DRAM: forward to all merged targets, free the entry."""
        targets = self.mshr.pop(addr, None)
        if targets is None:
            raise ProtocolError(
                f"slice {self.slice_id}: DRAM response for {addr:#x} with no MSHR entry")
        dirty = False
        for core, window, is_write in targets:
            dirty = dirty or is_write
            self.send_response(cycle, core, addr, is_write, window)
        record = (addr, dirty)
        if len(self.resp_q) < self.cfg.resp_q_size and not self.deferred_fills:
            self.resp_q.append(record)
        else:
            self.deferred_fills.append(record)

    # -- introspection -----------------------------------------------------

    def drained(self) -> bool:
        return not (any(self.inbound) or self.req_q or self.resp_q
                    or self.deferred_fills or self.pre_tag or self.post_tag
                    or self.mshr or self.dispatch_pending)

    def check_invariants(self) -> None:
        assert len(self.mshr) <= self.cfg.mshr_num_entry, \
            f"slice {self.slice_id}: {len(self.mshr)} MSHR entries > {self.cfg.mshr_num_entry}"
        for addr, targets in self.mshr.items():
            assert 1 <= len(targets) <= self.cfg.mshr_num_target, \
                f"slice {self.slice_id}: entry {addr:#x} has {len(targets)} targets"
        assert len(self.req_q) <= self.cfg.req_q_size
