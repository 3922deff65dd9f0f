import itertools
import random

from llcsim.arbiter import (BalancedArbiter, FcfsArbiter, MshrAwareArbiter,
                            build_merged_view, make_arbiter)
from llcsim.cache import Request
from llcsim.config import SimConfig


def req(core, addr, seq=0, is_write=False):
    return Request(seq, core, 0, addr, is_write, 0)


class TestMergedView:
    def test_worked_example(self):
        # two recent hits, one live MSHR line, one in-flight speculated hit and
        # one in-flight speculated miss
        hit_buffer = [0x00, 0xC0]
        snapshot = {0x40: [("c", 0, False)]}
        sent = [(0x00, 1, 90), (0x80, 0, 95)]
        view = build_merged_view(hit_buffer, snapshot, sent)
        assert view.hit_addrs == {0x00, 0xC0}
        assert view.mshr_addrs == {0x40, 0x80}
        assert view.est_entries == 2
        assert view.status(0x00) == "inferred-cache-hit"
        assert view.status(0x80) == "inferred-mshr-resident"
        assert view.status(0x140) is None

    def test_empty_structures(self):
        view = build_merged_view([], {}, [])
        assert view.hit_addrs == set() and view.mshr_addrs == set()
        assert view.est_entries == 0

    def test_snapshot_and_sent_overlap_counted_once(self):
        view = build_merged_view([], {0x80: []}, [(0x80, 0, 1)])
        assert view.est_entries == 1
        assert view.mshr_addrs == {0x80}

    def test_speculated_hits_not_counted(self):
        view = build_merged_view([0x40], {}, [(0x40, 1, 1), (0x40, 1, 2)])
        assert view.est_entries == 0


def reference_rank(queue, hit_addrs, mshr_addrs, counters, balanced):
    """Independent restatement of the priority rules for exhaustive checks."""
    def cls(r):
        return 2 if r.addr in hit_addrs else 1 if r.addr in mshr_addrs else 0
    best = 0
    for i in range(1, len(queue)):
        better = cls(queue[i]) > cls(queue[best])
        tie = cls(queue[i]) == cls(queue[best])
        if better or (tie and balanced and
                      counters[queue[i].core] < counters[queue[best].core]):
            best = i
    return best


class TestSelection:
    def test_fcfs_head(self):
        arb = FcfsArbiter(4)
        q = [req(2, 0x40), req(0, 0x80)]
        assert arb.select(q, {}, 0) == 0

    def test_balanced_picks_minimum_counter(self):
        arb = BalancedArbiter(2)
        arb.counters[0] = 5
        arb.counters[1] = 3
        q = [req(0, 0x40), req(1, 0x80)]
        assert arb.select(q, {}, 0) == 1

    def test_balanced_tie_fifo(self):
        arb = BalancedArbiter(2)
        q = [req(1, 0x40), req(0, 0x80)]
        assert arb.select(q, {}, 0) == 0

    def test_ma_priority_classes(self):
        cfg = SimConfig()
        arb = MshrAwareArbiter(4, cfg)
        arb.note_hit(0x100)
        mshr = {0x200: [("x", 0, False)]}
        q = [req(0, 0x300), req(1, 0x100), req(2, 0x200)]
        assert arb.select(q, mshr, 0) == 1          # inferred hit beats everything
        q = [req(0, 0x300), req(2, 0x200)]
        assert arb.select(q, mshr, 0) == 1          # then inferred MSHR-resident

    def test_bma_breaks_class_ties_by_counter(self):
        cfg = SimConfig()
        arb = MshrAwareArbiter(4, cfg, balanced_ties=True)
        arb.counters[0] = 7
        arb.counters[1] = 2
        mshr = {0x200: [], 0x240: []}
        q = [req(0, 0x200), req(1, 0x240)]
        assert arb.select(q, mshr, 0) == 1

    def test_exhaustive_orderings_match_reference(self):
        cfg = SimConfig()
        rng = random.Random(11)
        base = [(0, 0x100, "hit"), (1, 0x200, "mshr"), (2, 0x300, "other"),
                (3, 0x200, "mshr")]
        for balanced in (False, True):
            for perm in itertools.permutations(range(4)):
                arb = MshrAwareArbiter(4, cfg, balanced_ties=balanced)
                arb.note_hit(0x100)
                counters = [rng.randrange(10) for _ in range(4)]
                arb.counters[:] = counters
                mshr = {0x200: []}
                q = [req(*base[i][:2], seq=i) for i in perm]
                got = arb.select(q, mshr, 0)
                want = reference_rank(q, {0x100}, {0x200}, counters, balanced)
                assert got == want, (perm, balanced, counters)

    def test_counters_increment_on_issue_for_all_policies(self):
        cfg = SimConfig()
        for name in ("fcfs", "B", "MA", "BMA"):
            arb = make_arbiter(name, 4, cfg)
            arb.on_issue(req(3, 0x40), 0)
            assert arb.counters[3] == 1

    def test_selection_soundness_random_queues(self):
        # B: argmin counter; MA/BMA: selected class dominates every queued class
        cfg = SimConfig()
        rng = random.Random(77)
        for _ in range(300):
            n = rng.randrange(2, 13)
            queue = [req(rng.randrange(8), rng.randrange(64) * 64, seq=i)
                     for i, _ in enumerate(range(n))]
            counters = [rng.randrange(20) for _ in range(8)]

            b = BalancedArbiter(8)
            b.counters[:] = counters
            sel = queue[b.select(queue, {}, 0)]
            assert counters[sel.core] == min(counters[r.core] for r in queue)

            ma = MshrAwareArbiter(8, cfg, balanced_ties=rng.random() < 0.5)
            for _ in range(rng.randrange(5)):
                ma.note_hit(rng.randrange(64) * 64)
            ma.counters[:] = counters
            mshr = {rng.randrange(64) * 64: [] for _ in range(rng.randrange(4))}
            hit_set = set(ma.hit_buffer)

            def cls(r):
                return 2 if r.addr in hit_set else 1 if r.addr in mshr else 0

            sel = queue[ma.select(queue, mshr, 0)]
            assert cls(sel) == max(cls(r) for r in queue)


class TestSpeculationStructures:
    def test_sent_reqs_residency_is_exactly_eight_cycles(self):
        cfg = SimConfig()   # hit-latency 3 + mshr-latency 5
        arb = MshrAwareArbiter(1, cfg)
        arb.select([req(0, 0x40)], {}, 100)
        arb.on_issue(req(0, 0x40), 100)
        for cycle in range(100, 108):
            arb.age(cycle)
            assert len(arb.sent_reqs) == 1, cycle
        arb.age(108)
        assert len(arb.sent_reqs) == 0

    def test_hit_buffer_capacity_evicts_oldest(self):
        cfg = SimConfig(hit_buffer_capacity=16)
        arb = MshrAwareArbiter(1, cfg)
        for i in range(17):
            arb.note_hit(i * 64)
        assert len(arb.hit_buffer) == 16
        assert arb.hit_buffer[0] == 64   # first insert evicted

    def test_inferred_hit_issue_never_inflates_entry_estimate(self):
        cfg = SimConfig()
        arb = MshrAwareArbiter(1, cfg)
        arb.note_hit(0x40)
        q = [req(0, 0x40)]
        arb.select(q, {}, 0)
        arb.on_issue(q[0], 0)
        view = build_merged_view(arb.hit_buffer, {}, arb.sent_reqs)
        assert view.est_entries == 0

    def test_speculated_miss_tracked_until_mshr_catches_up(self):
        cfg = SimConfig()
        arb = MshrAwareArbiter(1, cfg)
        q = [req(0, 0x40)]
        arb.select(q, {}, 0)
        arb.on_issue(q[0], 0)
        assert arb.sent_reqs[0][1] == 0   # speculated miss
        view = build_merged_view(arb.hit_buffer, {}, arb.sent_reqs)
        assert view.est_entries == 1


class TestFairnessProperty:
    def test_counter_spread_bounded_under_continuous_backlog(self):
        # every core has a request queued at every selection point
        cfg = SimConfig()
        num_cores = 16
        arb = BalancedArbiter(num_cores)
        rng = random.Random(3)
        queue = [req(c, 0x1000 + 64 * c, seq=c) for c in range(num_cores)]
        rng.shuffle(queue)
        for step in range(10_000):
            idx = arb.select(queue, {}, step)
            chosen = queue.pop(idx)
            arb.on_issue(chosen, step)
            spread = max(arb.counters) - min(arb.counters)
            assert spread <= 1, (step, arb.counters)
            queue.insert(rng.randrange(len(queue) + 1),
                         req(chosen.core, rng.randrange(1 << 20) * 64, seq=step))
