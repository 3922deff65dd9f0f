"""Per-slice request-selection policies.

Four policies rank the request queue:

  fcfs  head of queue.
  B     the request whose core has been served least by this slice
        (per-core progress counters, reset at operator start).
  MA    speculate each queued address as an inferred cache hit (seen in a
        small FIFO of recent confirmed hits), an inferred MSHR-resident line
        (present in the live MSHR, or issued within the last
        hit_latency+mshr_latency cycles with a miss speculation), or neither;
        serve the highest class, FIFO among ties.
  BMA   same classes, but ties go to the least-served core first.

Speculation never affects correctness - a wrong guess only changes service
order. The sent_reqs FIFO bridges the window in which a just-issued request
is visible in neither the hit buffer nor the MSHR: each element carries the
hit-speculation bit from issue time and lives exactly
hit_latency + mshr_latency cycles, after which the real MSHR has caught up.
Elements whose bit says "cache hit" are masked out when estimating how many
MSHR entries are spoken for, since hits never involve the MSHR.

Progress counters advance on every issue regardless of policy; the global
throttle controller consumes their per-core sums.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass
class MergedView:
    """Snapshot the selector ranks against: per-address status plus entry estimate."""

    hit_addrs: set = field(default_factory=set)
    mshr_addrs: set = field(default_factory=set)
    est_entries: int = 0

    def status(self, addr: int) -> str | None:
        if addr in self.hit_addrs:
            return "inferred-cache-hit"
        if addr in self.mshr_addrs:
            return "inferred-mshr-resident"
        return None


def build_merged_view(hit_buffer, mshr_snapshot, sent_reqs) -> MergedView:
    """Combine hit buffer, live MSHR view, and in-flight issues into one list.

    mshr_snapshot is the slice MSHR keyed by line address (real-time view);
    sent_reqs holds (addr, spec_hit_bit, issue_cycle) tuples. Bit-1 elements
    are excluded from MSHR-entry estimation.
    """
    hit_addrs = set(hit_buffer)
    mshr_addrs = set(mshr_snapshot)
    est = len(mshr_snapshot)
    for addr, bit, _ in sent_reqs:
        if bit:
            continue
        if addr not in mshr_addrs:
            est += 1
        mshr_addrs.add(addr)
    return MergedView(hit_addrs, mshr_addrs, est)


class FcfsArbiter:
    name = "fcfs"
    uses_speculation = False

    def __init__(self, num_cores: int, cfg=None):
        self.counters = [0] * num_cores

    def select(self, queue, mshr, cycle) -> int:
        return 0

    def on_issue(self, req, cycle) -> None:
        self.counters[req.core] += 1

    def note_hit(self, addr) -> None:
        pass

    def age(self, cycle) -> None:
        pass

    def reset_counters(self) -> None:
        for i in range(len(self.counters)):
            self.counters[i] = 0


class BalancedArbiter(FcfsArbiter):
    name = "B"

    def select(self, queue, mshr, cycle) -> int:
        counters = self.counters
        best = 0
        best_c = counters[queue[0].core]
        for i in range(1, len(queue)):
            c = counters[queue[i].core]
            if c < best_c:
                best, best_c = i, c
        return best


class MshrAwareArbiter(FcfsArbiter):
    """MA, or BMA when balanced_ties is set."""

    uses_speculation = True

    def __init__(self, num_cores: int, cfg, balanced_ties: bool = False):
        super().__init__(num_cores)
        self.name = "BMA" if balanced_ties else "MA"
        self.balanced_ties = balanced_ties
        self.hit_buffer: deque = deque(maxlen=cfg.hit_buffer_capacity)
        self.sent_reqs: deque = deque()
        self.residency = cfg.l2_hit_latency + cfg.mshr_latency
        self.last_spec_hit = False

    def select(self, queue, mshr, cycle) -> int:
        view = build_merged_view(self.hit_buffer, mshr, self.sent_reqs)
        hit_addrs = view.hit_addrs
        mshr_addrs = view.mshr_addrs
        counters = self.counters
        best = 0
        req = queue[0]
        best_cls = 2 if req.addr in hit_addrs else 1 if req.addr in mshr_addrs else 0
        best_cnt = counters[req.core]
        for i in range(1, len(queue)):
            req = queue[i]
            cls = 2 if req.addr in hit_addrs else 1 if req.addr in mshr_addrs else 0
            if cls > best_cls:
                best, best_cls, best_cnt = i, cls, counters[req.core]
            elif cls == best_cls and self.balanced_ties:
                c = counters[req.core]
                if c < best_cnt:
                    best, best_cnt = i, c
        self.last_spec_hit = best_cls == 2
        return best

    def on_issue(self, req, cycle) -> None:
        self.counters[req.core] += 1
        self.sent_reqs.append((req.addr, 1 if self.last_spec_hit else 0, cycle))

    def note_hit(self, addr) -> None:
        self.hit_buffer.append(addr)   # bounded FIFO, oldest evicted at capacity

    def age(self, cycle) -> None:
        sent = self.sent_reqs
        residency = self.residency
        while sent and cycle - sent[0][2] >= residency:
            sent.popleft()


def make_arbiter(name: str, num_cores: int, cfg):
    if name == "fcfs":
        return FcfsArbiter(num_cores, cfg)
    if name == "B":
        return BalancedArbiter(num_cores, cfg)
    if name == "MA":
        return MshrAwareArbiter(num_cores, cfg, balanced_ties=False)
    if name == "BMA":
        return MshrAwareArbiter(num_cores, cfg, balanced_ties=True)
    raise ValueError(f"unknown arbiter policy {name!r}")
