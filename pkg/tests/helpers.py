"""Shared test fixtures: scripted-slice harness and an independent functional
cache reference.

The reference simulator processes one request to completion at a time with
its own list-based LRU (deliberately not reusing the package's array class),
modelling the same policies: L1 write-through/write-no-allocate/fill-on-read,
L2 write-allocate/write-back/alloc-on-fill, both LRU.
"""

from __future__ import annotations

from llcsim.arbiter import make_arbiter
from llcsim.cache import L2Slice
from llcsim.config import SimConfig


class FakeDram:
    """Accepts every dispatch and lets the test deliver fills by hand."""

    def __init__(self, accept=True):
        self.accept = accept
        self.queue = []
        self.reads = 0
        self.writes = 0
        self.row_hits = 0
        self.row_misses = 0
        self.busy_cycles = 0

    def enqueue(self, addr, is_write, slice_id):
        if not self.accept:
            return False
        self.queue.append((addr, is_write, slice_id))
        if is_write:
            self.writes += 1
        else:
            self.reads += 1
        return True

    def tick(self, cycle):
        return []

    def busy(self):
        return False

    def stats(self):
        return {"reads": self.reads, "writes": self.writes, "row_hits": 0,
                "row_misses": 0, "busy_cycles": 0}


def make_slice(cfg: SimConfig | None = None, arbiter_name: str = "fcfs"):
    """A standalone slice wired to a FakeDram and a response recorder."""
    cfg = cfg or SimConfig()
    responses = []

    def send_response(send_cycle, core, addr, is_write, window):
        responses.append((send_cycle, core, addr, is_write, window))

    dram = FakeDram()
    arb = make_arbiter(arbiter_name, cfg.num_cores, cfg)
    sl = L2Slice(0, cfg, arb, send_response, dram)
    return sl, dram, responses


class _RefLru:
    """Minimal LRU set array: per-set list ordered oldest-first."""

    def __init__(self, num_sets, assoc, line_size):
        self.sets = [[] for _ in range(num_sets)]
        self.assoc = assoc
        self.line_size = line_size
        self.num_sets = num_sets

    def _set(self, addr):
        return (addr // self.line_size) % self.num_sets

    def probe(self, addr, touch=True):
        s = self.sets[self._set(addr)]
        if addr in s:
            if touch:
                s.remove(addr)
                s.append(addr)
            return True
        return False

    def install(self, addr):
        s = self.sets[self._set(addr)]
        if addr in s:
            s.remove(addr)
            s.append(addr)
            return None
        victim = s.pop(0) if len(s) >= self.assoc else None
        s.append(addr)
        return victim


class FunctionalCacheRef:
    """One-request-at-a-time L1+L2 classification oracle (single core, single slice)."""

    def __init__(self, cfg: SimConfig):
        self.l1 = _RefLru(cfg.l1_size // (cfg.l1_assoc * cfg.line_size),
                          cfg.l1_assoc, cfg.line_size)
        self.l2 = _RefLru(cfg.l2_total_sets, cfg.l2_assoc, cfg.line_size)
        self.l1_hits = 0
        self.l2_log = []    # (addr, is_write, 'hit'|'miss') for each L2-visible request

    def access(self, addr: int, is_write: bool) -> None:
        if is_write:
            self.l1.probe(addr)                 # write-through touch, no allocate
            if self.l2.probe(addr):
                self.l2_log.append((addr, True, "hit"))
            else:
                self.l2_log.append((addr, True, "miss"))
                self.l2.install(addr)           # write-allocate
        else:
            if self.l1.probe(addr):
                self.l1_hits += 1
                return
            if self.l2.probe(addr):
                self.l2_log.append((addr, False, "hit"))
            else:
                self.l2_log.append((addr, False, "miss"))
                self.l2.install(addr)
            self.l1.install(addr)               # fill on read response
