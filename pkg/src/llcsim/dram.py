"""Banked multi-channel DRAM timing in the core clock domain.

Two interchangeable models behind one queue/tick interface:

  frfcfs  per-channel FR-FCFS scheduling over open-row bank state with a
          reduced timing set {t_rcd, t_rp, t_cas, t_burst}. Row hits cost
          t_cas + t_burst; activating an idle bank adds t_rcd; a row conflict
          adds t_rp + t_rcd. Data bursts on one channel never overlap, so a
          saturated row-hit stream sustains one line per t_burst cycles.
  simple  fixed service latency with bounded outstanding per channel, used in
          tests to isolate cache-policy effects from scheduling noise.

Addresses interleave channels at line granularity, then walk columns within
a row, then banks, then rows (the map is bijective over the line space).
Writes occupy the same bank timing as reads; their completions acknowledge
slice write-backs and are not forwarded anywhere.
"""

from __future__ import annotations

from heapq import heappush, heappop

from .config import SimConfig


def address_map(addr: int, cfg: SimConfig) -> tuple[int, int, int, int, int]:
    """line address -> (channel, rank, bank, row, column)."""
    x = addr // cfg.line_size
    nch = cfg.dram_channels
    cols = cfg.dram_row_bytes // cfg.line_size
    channel = x % nch
    x //= nch
    column = x % cols
    x //= cols
    bank = x % cfg.dram_banks_per_rank
    x //= cfg.dram_banks_per_rank
    rank = x % cfg.dram_ranks
    x //= cfg.dram_ranks
    return channel, rank, bank, x, column


class _Channel:
    __slots__ = ("pending", "service", "banks", "bus_free_at")

    def __init__(self, num_banks: int):
        self.pending: list = []          # [seq, addr, is_write, slice_id, row, bank_idx]
        self.service: list = []          # heap of (completion, seq, addr, is_write, slice_id)
        self.banks = [[-1, 0] for _ in range(num_banks)]   # [open_row, act_ok_at]
        self.bus_free_at = 0


class FrFcfsDram:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        nbanks = cfg.dram_ranks * cfg.dram_banks_per_rank
        self.channels = [_Channel(nbanks) for _ in range(cfg.dram_channels)]
        self._seq = 0
        self.reads = 0
        self.writes = 0
        self.row_hits = 0
        self.row_misses = 0
        self.busy_cycles = 0

    def enqueue(self, addr: int, is_write: bool, slice_id: int) -> bool:
        """Queue one line transfer; False when the channel queue is full."""
        ch_idx, rank, bank, row, _ = address_map(addr, self.cfg)
        ch = self.channels[ch_idx]
        if len(ch.pending) >= self.cfg.dram_queue_depth:
            return False
        self._seq += 1
        bank_idx = rank * self.cfg.dram_banks_per_rank + bank
        ch.pending.append([self._seq, addr, is_write, slice_id, row, bank_idx])
        return True

    def tick(self, cycle: int) -> list:
        """Advance one cycle; returns completed (addr, is_write, slice_id) transfers."""
        cfg = self.cfg
        done = []
        for ch in self.channels:
            service = ch.service
            while service and service[0][0] <= cycle:
                _, _, addr, is_write, slice_id = heappop(service)
                done.append((addr, is_write, slice_id))
            pending = ch.pending
            # hold issue once the bus backlog exceeds a full command chain, so
            # selection stays near service time while activates for the next
            # bank can still overlap the current bank's bursts
            if not pending or ch.bus_free_at > cycle + cfg.t_rp + cfg.t_rcd + cfg.t_cas:
                continue
            # FR-FCFS: oldest row hit, else oldest
            pick = 0
            for i, ent in enumerate(pending):
                if ch.banks[ent[5]][0] == ent[4]:
                    pick = i
                    break
            seq, addr, is_write, slice_id, row, bank_idx = pending.pop(pick)
            bank = ch.banks[bank_idx]
            if bank[0] == row:
                self.row_hits += 1
                data_start = cycle + cfg.t_cas
            elif bank[0] < 0:
                self.row_misses += 1
                act_at = max(cycle, bank[1])
                data_start = act_at + cfg.t_rcd + cfg.t_cas
            else:
                self.row_misses += 1
                pre_at = max(cycle, bank[1])
                data_start = pre_at + cfg.t_rp + cfg.t_rcd + cfg.t_cas
            if data_start < ch.bus_free_at:
                data_start = ch.bus_free_at
            completion = data_start + cfg.t_burst
            ch.bus_free_at = completion
            bank[0] = row
            bank[1] = data_start
            self.busy_cycles += cfg.t_burst
            if is_write:
                self.writes += 1
            else:
                self.reads += 1
            heappush(service, (completion, seq, addr, is_write, slice_id))
        return done

    def busy(self) -> bool:
        return any(ch.pending or ch.service for ch in self.channels)

    def stats(self) -> dict:
        return {"reads": self.reads, "writes": self.writes,
                "row_hits": self.row_hits, "row_misses": self.row_misses,
                "busy_cycles": self.busy_cycles}


class SimpleDram:
    """Fixed-latency pipe per channel with a bounded number of transfers in flight."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.pending = [[] for _ in range(cfg.dram_channels)]
        self.service = [[] for _ in range(cfg.dram_channels)]
        self._seq = 0
        self.reads = 0
        self.writes = 0
        self.row_hits = 0
        self.row_misses = 0
        self.busy_cycles = 0

    def enqueue(self, addr: int, is_write: bool, slice_id: int) -> bool:
        ch = (addr // self.cfg.line_size) % self.cfg.dram_channels
        if len(self.pending[ch]) >= self.cfg.dram_queue_depth:
            return False
        self._seq += 1
        self.pending[ch].append((self._seq, addr, is_write, slice_id))
        return True

    def tick(self, cycle: int) -> list:
        done = []
        latency = self.cfg.dram_simple_latency
        limit = self.cfg.dram_simple_outstanding
        for ch in range(self.cfg.dram_channels):
            service = self.service[ch]
            while service and service[0][0] <= cycle:
                _, _, addr, is_write, slice_id = heappop(service)
                done.append((addr, is_write, slice_id))
            pending = self.pending[ch]
            while pending and len(service) < limit:
                seq, addr, is_write, slice_id = pending.pop(0)
                if is_write:
                    self.writes += 1
                else:
                    self.reads += 1
                self.busy_cycles += 1
                heappush(service, (cycle + latency, seq, addr, is_write, slice_id))
        return done

    def busy(self) -> bool:
        return any(self.pending) or any(self.service)

    def stats(self) -> dict:
        return {"reads": self.reads, "writes": self.writes,
                "row_hits": self.row_hits, "row_misses": self.row_misses,
                "busy_cycles": self.busy_cycles}


def make_dram(cfg: SimConfig):
    return FrFcfsDram(cfg) if cfg.dram_mode == "frfcfs" else SimpleDram(cfg)
