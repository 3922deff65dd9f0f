"""Simulation configuration: schema, defaults, and the flat key=value file format.

Every tunable of the simulated system lives here so that sweep runs can
override any of them by name. Unknown keys are rejected (catches typos in
sweep plans). Defaults reproduce the reference system: 1.96 GHz, 16 vector
cores with 4 instruction windows of depth 128, a 16 MB L2 split into 8
set-interleaved slices with 6 MSHR entries x 8 targets each, and a 4-channel
DDR5-3200-class DRAM whose timings are pre-converted to core cycles.

DRAM timing conversion used for the defaults:
    cycles = ceil(t_ns * frequency_ghz)
    t_rcd = t_rp = t_cas ~ 13.75 ns @ DDR5-3200 CL22  -> 27 core cycles @ 1.96 GHz
    t_burst = 64B line / 25.6 GB/s per channel = 2.5 ns -> 5 core cycles
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


ARBITER_POLICIES = ("fcfs", "B", "MA", "BMA")
THROTTLE_MODES = ("none", "dyncta", "dynmg")
DRAM_MODES = ("frfcfs", "simple")
TCS_AGGREGATES = ("mean", "max")


@dataclass
class SimConfig:
    # global
    frequency_ghz: float = 1.96
    num_cores: int = 16
    num_slices: int = 8
    line_size: int = 64
    interconnect_latency: int = 10
    seed: int = 0
    deadlock_cycles: int = 1_000_000

    # core
    inst_window_depth: int = 128
    num_inst_windows: int = 4
    vector_len_bytes: int = 128
    steal_enabled: bool = True

    # private L1 (write-through, write-no-allocate, alloc-on-fill, LRU)
    l1_size: int = 64 * 1024
    l1_assoc: int = 8
    l1_latency: int = 1

    # shared L2 slice (write-back, write-allocate, alloc-on-fill, LRU)
    l2_size: int = 16 * 1024 * 1024
    l2_assoc: int = 8
    l2_hit_latency: int = 3
    l2_data_latency: int = 25
    mshr_num_entry: int = 6
    mshr_num_target: int = 8
    mshr_latency: int = 5
    req_q_size: int = 12
    resp_q_size: int = 64

    # policies
    arbiter: str = "fcfs"
    hit_buffer_capacity: int = 16
    throttle: str = "none"
    sampling_period: int = 2000
    sub_period: int = 400
    max_gear: int = 4
    cmem_high: int = 250
    cmem_low: int = 180
    cidle_high: int = 4
    tcs_low: float = 0.1
    tcs_high: float = 0.2
    tcs_extreme: float = 0.375
    tcs_aggregate: str = "mean"
    throttle_reset_max_tb: bool = True

    # DRAM
    dram_mode: str = "frfcfs"
    dram_channels: int = 4
    dram_ranks: int = 4
    dram_banks_per_rank: int = 8
    dram_row_bytes: int = 2048
    t_rcd: int = 27
    t_rp: int = 27
    t_cas: int = 27
    t_burst: int = 5
    dram_queue_depth: int = 32
    dram_simple_latency: int = 100
    dram_simple_outstanding: int = 16

    def validate(self) -> None:
        if self.arbiter not in ARBITER_POLICIES:
            raise ConfigError(f"unknown arbiter policy {self.arbiter!r}; "
                              f"expected one of {ARBITER_POLICIES}")
        if self.throttle not in THROTTLE_MODES:
            raise ConfigError(f"unknown throttle mode {self.throttle!r}; "
                              f"expected one of {THROTTLE_MODES}")
        if self.dram_mode not in DRAM_MODES:
            raise ConfigError(f"unknown dram_mode {self.dram_mode!r}")
        if self.tcs_aggregate not in TCS_AGGREGATES:
            raise ConfigError(f"unknown tcs_aggregate {self.tcs_aggregate!r}")
        for name in ("num_cores", "num_slices", "line_size", "interconnect_latency",
                     "inst_window_depth", "num_inst_windows", "l1_latency",
                     "l2_hit_latency", "l2_data_latency", "mshr_num_entry",
                     "mshr_num_target", "mshr_latency", "req_q_size", "resp_q_size",
                     "sampling_period", "sub_period", "dram_channels",
                     "t_rcd", "t_rp", "t_cas", "t_burst", "dram_queue_depth",
                     "dram_simple_latency"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.l1_size % (self.l1_assoc * self.line_size):
            raise ConfigError("l1_size must be divisible by l1_assoc * line_size")
        if self.l2_size % (self.l2_assoc * self.line_size):
            raise ConfigError("l2_size must be divisible by l2_assoc * line_size")
        if self.l2_total_sets % self.num_slices:
            raise ConfigError(f"num_slices={self.num_slices} does not divide the "
                              f"L2 set count {self.l2_total_sets}")
        if self.dram_channels & (self.dram_channels - 1):
            raise ConfigError("dram_channels must be a power of two")
        if self.dram_row_bytes % self.line_size:
            raise ConfigError("dram_row_bytes must be a multiple of line_size")
        if self.sampling_period % self.sub_period:
            raise ConfigError("sub_period must divide sampling_period")
        if not 0.0 < self.tcs_low < self.tcs_high < self.tcs_extreme <= 1.0:
            raise ConfigError("contention thresholds must satisfy "
                              "0 < tcs_low < tcs_high < tcs_extreme <= 1")
        if self.max_gear < 1:
            raise ConfigError("max_gear must be >= 1")

    @property
    def l2_total_sets(self) -> int:
        return self.l2_size // (self.l2_assoc * self.line_size)

    @property
    def l2_sets_per_slice(self) -> int:
        return self.l2_total_sets // self.num_slices

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")
    if ftype == "int":
        try:
            return int(raw, 0)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected an integer, got {raw!r}") from None
    if ftype == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from None
    return raw


def parse_config(text: str, overrides: dict | None = None) -> SimConfig:
    """Parse flat `key = value` text into a validated SimConfig.

    Lines starting with '#' and blank lines are ignored. Unknown keys are an
    error. `overrides` (already-typed or raw strings) are applied on top.
    """
    cfg = SimConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        setattr(cfg, key, _parse_value(key, raw))
    if overrides:
        apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def apply_overrides(cfg: SimConfig, overrides: dict) -> SimConfig:
    for key, value in overrides.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r} in overrides")
        if isinstance(value, str):
            value = _parse_value(key, value)
        setattr(cfg, key, value)
    return cfg


def load_config(path, overrides: dict | None = None) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


def emit_config(cfg: SimConfig) -> str:
    """Render a config back to the key=value file format (sorted, reloadable)."""
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(SimConfig)]
    return "\n".join(lines) + "\n"
