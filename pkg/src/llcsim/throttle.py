"""Global multi-gear throttling: contention classification, gear stepping,
and selection of which cores to throttle.

The gear maps to a fraction of cores held back: 0 -> none, then 1/8, 1/4,
1/2, 3/4 of the core count (floored). The throttled set is always the cores
with the largest cumulative progress (requests served, summed across slice
arbiters), lowest id first on ties. Contention is the fraction of slice
cycles spent stalled over the sampling period.
"""

from __future__ import annotations

from enum import Enum

from .config import SimConfig

GEAR_FRACTIONS = (0.0, 1 / 8, 1 / 4, 1 / 2, 3 / 4)


class ContentionStatus(Enum):
    LOW = "low"
    NORMAL = "normal"
    HIGH = "high"
    EXTREMELY_HIGH = "extremely_high"


def classify_contention(t_cs: float, cfg: SimConfig | None = None) -> ContentionStatus:
    if not 0.0 <= t_cs <= 1.0:
        raise ValueError(f"stall fraction {t_cs} outside [0, 1]")
    low = cfg.tcs_low if cfg else 0.1
    high = cfg.tcs_high if cfg else 0.2
    extreme = cfg.tcs_extreme if cfg else 0.375
    if t_cs < low:
        return ContentionStatus.LOW
    if t_cs < high:
        return ContentionStatus.NORMAL
    if t_cs < extreme:
        return ContentionStatus.HIGH
    return ContentionStatus.EXTREMELY_HIGH


def step_gear(gear: int, status: ContentionStatus, max_gear: int = 4) -> int:
    if status is ContentionStatus.HIGH:
        if gear < max_gear:
            return gear + 1
    elif status is ContentionStatus.LOW:
        if gear > 0:
            return gear - 1
    elif status is ContentionStatus.EXTREMELY_HIGH:
        if gear <= max_gear - 2:
            return gear + 2
        return max_gear
    return gear   # NORMAL holds the gear


def select_throttled(gear: int, progress: list[int], num_cores: int) -> set[int]:
    """Cores to throttle at this gear: the floor(num_cores * fraction) fastest."""
    frac = GEAR_FRACTIONS[gear] if gear < len(GEAR_FRACTIONS) else GEAR_FRACTIONS[-1]
    k = int(num_cores * frac)
    if k == 0:
        return set()
    order = sorted(range(num_cores), key=lambda c: (-progress[c], c))
    return set(order[:k])


class GlobalThrottleController:
    """Samples slice stalls every sampling_period cycles and retargets the throttled set."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.gear = 0
        self._stall_snapshot: list[int] = []
        self.tcs_series: list[float] = []
        self.gear_trace: list[int] = []

    def measure_tcs(self, slices) -> float:
        if not self._stall_snapshot:
            self._stall_snapshot = [0] * len(slices)
        period = self.cfg.sampling_period
        deltas = []
        for i, sl in enumerate(slices):
            deltas.append(sl.stall_cycles - self._stall_snapshot[i])
            self._stall_snapshot[i] = sl.stall_cycles
        if self.cfg.tcs_aggregate == "max":
            return max(d / period for d in deltas)
        return sum(deltas) / (len(slices) * period)

    def sampling_tick(self, slices, cores) -> set[int]:
        cfg = self.cfg
        t_cs = self.measure_tcs(slices)
        self.tcs_series.append(t_cs)
        status = classify_contention(t_cs, cfg)
        self.gear = step_gear(self.gear, status, cfg.max_gear)
        self.gear_trace.append(self.gear)

        progress = [0] * len(cores)
        for sl in slices:
            for c, n in enumerate(sl.arbiter.counters):
                progress[c] += n
        throttled = select_throttled(self.gear, progress, len(cores))
        for core in cores:
            was = core.throttled
            core.throttled = core.core_id in throttled
            if was and not core.throttled and cfg.throttle_reset_max_tb:
                core.max_tb = cfg.num_inst_windows
        return throttled
