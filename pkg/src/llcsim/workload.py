"""Attention-decode (score/Logit) workload lowering: operator shape -> loop-nest
mapping -> per-core, thread-block-structured memory traces.

The score operator multiplies a small per-group query tile against the full
key history: for every head group ``h``, query head ``g`` and sequence
position ``l`` it reads one query row and one key row (``head_dim`` elements
each) and produces one output element. Traces are written at cache-line
granularity as issued by width-128 vector cores, so one vector access covers
``128 * elem_bytes / line_size`` consecutive lines.

Two dataflow constraints are enforced rather than assumed:
  (a) the per-core fastest axis is the contiguous head dimension, so every
      vector access covers whole cache lines, and
  (b) at least one output line worth of sequence positions is mapped to the
      innermost temporal tile, so no two cores (or thread blocks) ever write
      the same output line.
An infeasible (shape, core-count) combination raises MappingError with a
diagnostic instead of silently degrading the mapping.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import product

AXES = ("H", "G", "L", "D")
BINDINGS = ("spatial", "tb", "window", "l1")

OP_COMPUTE = "C"
OP_READ = "R"
OP_WRITE = "W"


class MappingError(ValueError):
    """The requested shape/core combination cannot satisfy the dataflow constraints."""


class TraceFormatError(ValueError):
    """Malformed trace or mapping file."""


@dataclass(frozen=True)
class OperatorShape:
    """Score-operator extents: head groups x query heads per group x sequence x head dim."""

    num_groups: int          # H
    group_size: int          # G: query heads sharing one key head
    seq_len: int             # L
    head_dim: int            # D
    elem_bytes: int = 1

    def validate(self, line_size: int = 64) -> None:
        for name in ("num_groups", "group_size", "seq_len", "head_dim", "elem_bytes"):
            if getattr(self, name) < 1:
                raise MappingError(f"shape field {name} must be >= 1")
        if (self.head_dim * self.elem_bytes) % line_size:
            raise MappingError(
                f"head_dim * elem_bytes = {self.head_dim * self.elem_bytes} "
                f"must be a multiple of the line size {line_size}")

    def extent(self, axis: str) -> int:
        return {"H": self.num_groups, "G": self.group_size,
                "L": self.seq_len, "D": self.head_dim}[axis]


@dataclass(frozen=True)
class TensorLayout:
    base_addr: int
    dims: tuple[int, ...]
    strides: tuple[int, ...]   # bytes per step in each dim

    @property
    def size_bytes(self) -> int:
        return 1 + sum((d - 1) * s for d, s in zip(self.dims, self.strides))

    def addr(self, *idx: int) -> int:
        return self.base_addr + sum(i * s for i, s in zip(idx, self.strides))


@dataclass(frozen=True)
class LogitLayouts:
    """Row-major address spaces of the three operand tensors, pairwise disjoint."""

    query: TensorLayout      # [H][G][D]
    key: TensorLayout        # [H][L][D]
    out: TensorLayout        # [H][G][L]

    def validate(self) -> None:
        spans = []
        for t in (self.query, self.key, self.out):
            spans.append((t.base_addr, t.base_addr + t.size_bytes))
        spans.sort()
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise MappingError("tensor address ranges overlap")


def default_layouts(shape: OperatorShape,
                    q_base: int = 0x1000_0000,
                    k_base: int = 0x2000_0000,
                    out_base: int = 0x3000_0000) -> LogitLayouts:
    h, g, l, d, e = (shape.num_groups, shape.group_size, shape.seq_len,
                     shape.head_dim, shape.elem_bytes)
    layouts = LogitLayouts(
        query=TensorLayout(q_base, (h, g, d), (g * d * e, d * e, e)),
        key=TensorLayout(k_base, (h, l, d), (l * d * e, d * e, e)),
        out=TensorLayout(out_base, (h, g, l), (g * l * e, l * e, e)),
    )
    layouts.validate()
    return layouts


@dataclass(frozen=True)
class MappingLevel:
    axis: str        # one of AXES
    extent: int
    bind: str        # one of BINDINGS


@dataclass
class MappingSpec:
    """Ordered loop nest, outermost first.

    Spatial levels form a contiguous outermost run and together enumerate the
    cores. The innermost 'tb'-bound level delimits thread blocks: one block is
    one full execution of everything nested inside it. 'window' and 'l1'
    levels are plain temporal loops (named for where their reuse lands).
    """

    levels: list[MappingLevel] = field(default_factory=list)

    def validate(self, shape: OperatorShape, num_cores: int) -> list[str]:
        """Return a list of diagnostics; empty means the mapping is valid."""
        diags = []
        seen_temporal = False
        spatial_extent = 1
        prod = {a: 1 for a in AXES}
        for i, lv in enumerate(self.levels):
            if lv.axis not in AXES:
                diags.append(f"level {i}: unknown axis {lv.axis!r}")
                continue
            if lv.bind not in BINDINGS:
                diags.append(f"level {i}: unknown binding {lv.bind!r}")
                continue
            if lv.extent < 1:
                diags.append(f"level {i}: extent must be >= 1")
            prod[lv.axis] *= lv.extent
            if lv.bind == "spatial":
                if seen_temporal:
                    diags.append(f"level {i}: spatial level below a temporal level")
                spatial_extent *= lv.extent
            else:
                seen_temporal = True
        for a in AXES:
            if prod[a] != shape.extent(a):
                diags.append(f"axis {a}: level extents multiply to {prod[a]}, "
                             f"shape has {shape.extent(a)}")
        if spatial_extent != num_cores:
            diags.append(f"spatial extents multiply to {spatial_extent}, "
                         f"expected num_cores={num_cores}")
        if not self.levels or self.levels[-1].axis != "D":
            diags.append("innermost level must walk the head dimension (axis D)")
        elif self.levels[-1].bind == "spatial":
            diags.append("innermost head-dimension level must be temporal")
        # constraint (b): the innermost L tile must cover >= one output line
        # (or all of L when the whole sequence is shorter than a line)
        line_elems = 64 // shape.elem_bytes if shape.elem_bytes <= 64 else 1
        inner_l = 1
        for lv in reversed(self.levels):
            if lv.axis == "L":
                inner_l = lv.extent
                break
        needed = min(shape.seq_len, line_elems)
        if inner_l < needed:
            diags.append(f"innermost L tile covers {inner_l} positions; need >= {needed} "
                         f"to keep whole output lines within one temporal tile")
        return diags


def validate_mapping(mapping: MappingSpec, shape: OperatorShape,
                     num_cores: int) -> list[str]:
    """Diagnostics for a mapping against a shape; empty list means valid."""
    return mapping.validate(shape, num_cores)


def _divisors_desc(n: int) -> list[int]:
    return [d for d in range(n, 0, -1) if n % d == 0]


def build_logit_mapping(shape: OperatorShape, num_cores: int,
                        tb_output_lines: int = 2,
                        line_size: int = 64) -> MappingSpec:
    """Construct the canonical score-operator mapping for a core count.

    Work is split across cores on the head axes first (largest head-group
    factor, then query heads) so that cores assigned the same head group
    share the key rows they stream. The sequence axis is split spatially only
    as a fallback and only in whole-output-line multiples.
    """
    shape.validate(line_size)
    if num_cores < 1:
        raise MappingError("num_cores must be >= 1")
    if tb_output_lines < 1:
        raise MappingError("tb_output_lines must be >= 1")

    h_ext, g_ext, l_ext, d_ext = (shape.num_groups, shape.group_size,
                                  shape.seq_len, shape.head_dim)
    elem = shape.elem_bytes
    line_elems = line_size // elem if elem <= line_size else 0
    if line_elems == 0:
        raise MappingError(f"elem_bytes={elem} exceeds the line size {line_size}")

    # spatial factorization: num_cores = sh * sg * sl with sh|H, sg|G, sl|L
    choice = None
    for sh in _divisors_desc(h_ext):
        if num_cores % sh:
            continue
        rest = num_cores // sh
        for sg in _divisors_desc(g_ext):
            if rest % sg:
                continue
            sl = rest // sg
            if l_ext % sl:
                continue
            per_core_l = l_ext // sl
            if sl > 1 and (per_core_l % line_elems):
                continue  # sequence split would share output lines across cores
            choice = (sh, sg, sl)
            break
        if choice:
            break
    if choice is None:
        raise MappingError(
            f"cannot split H={h_ext} x G={g_ext} x L={l_ext} across {num_cores} cores "
            f"with whole-output-line ownership; adjust the core count or sequence length")
    sh, sg, sl = choice

    hc, gc, lc = h_ext // sh, g_ext // sg, l_ext // sl
    levels = [MappingLevel("H", sh, "spatial"), MappingLevel("G", sg, "spatial")]
    if sl > 1:
        levels.append(MappingLevel("L", sl, "spatial"))

    if lc * elem >= line_size:
        if (lc * elem) % line_size:
            raise MappingError(
                f"per-core sequence tile of {lc} positions x {elem}B does not pack "
                f"whole {line_size}B output lines; every output line must have a "
                f"single writer")
        lines_per_row = (lc * elem) // line_size
        tb_lines = min(tb_output_lines, lines_per_row)
        while lines_per_row % tb_lines:
            tb_lines -= 1
        l1_l = line_elems
        tb_l = lc // (l1_l * tb_lines)
        if hc > 1:
            levels.append(MappingLevel("H", hc, "tb"))
        if gc > 1:
            levels.append(MappingLevel("G", gc, "tb"))
        levels.append(MappingLevel("L", tb_l, "tb"))
        if tb_lines > 1:
            levels.append(MappingLevel("L", tb_lines, "window"))
        levels.append(MappingLevel("L", l1_l, "l1"))
    else:
        # whole sequence shorter than one output line: output rows of distinct
        # (h, g) pairs share lines, so each core must own whole heads-worth of
        # contiguous output or everything must live on one core.
        if num_cores == 1:
            if hc > 1:
                levels.append(MappingLevel("H", hc, "tb"))
            if gc > 1:
                levels.append(MappingLevel("G", gc, "l1"))
            if lc > 1:
                levels.append(MappingLevel("L", lc, "l1"))
        elif sg == 1 and sl == 1 and (gc * lc * elem) % line_size == 0:
            if hc > 1:
                levels.append(MappingLevel("H", hc, "tb"))
            levels.append(MappingLevel("G", gc, "window"))
            if lc > 1:
                levels.append(MappingLevel("L", lc, "l1"))
        else:
            raise MappingError(
                f"sequence of {lc} positions x {elem}B is shorter than one "
                f"{line_size}B output line and the {num_cores}-core split would "
                f"share output lines across cores")
    levels.append(MappingLevel("D", d_ext, "l1"))

    mapping = MappingSpec(levels)
    diags = mapping.validate(shape, num_cores)
    if diags:
        raise MappingError("constructed mapping failed validation: " + "; ".join(diags))
    return mapping


# ---------------------------------------------------------------------------
# trace generation

@dataclass
class ThreadBlock:
    """Contiguous trace slice: the unit of scheduling, throttling and migration."""

    tb_id: int
    home_core: int
    ops: list[tuple]                 # (OP_COMPUTE, cycles) | (OP_READ/OP_WRITE, line_addr)
    output_lines: int

    def validate(self, line_size: int = 64) -> None:
        if not self.ops:
            raise TraceFormatError(f"thread block {self.tb_id} has no ops")
        if self.output_lines < 1:
            raise TraceFormatError(f"thread block {self.tb_id} writes no output lines")
        for op in self.ops:
            kind, val = op
            if kind == OP_COMPUTE:
                if val < 1:
                    raise TraceFormatError(f"thread block {self.tb_id}: bubble < 1 cycle")
            elif kind in (OP_READ, OP_WRITE):
                if val % line_size:
                    raise TraceFormatError(
                        f"thread block {self.tb_id}: address {val:#x} not line-aligned")
            else:
                raise TraceFormatError(f"thread block {self.tb_id}: bad op kind {kind!r}")


def generate_traces(shape: OperatorShape, mapping: MappingSpec,
                    layouts: LogitLayouts | None = None,
                    num_cores: int | None = None,
                    line_size: int = 64,
                    vector_len: int = 128) -> list[list[ThreadBlock]]:
    """Lower a validated mapping into per-core thread-block lists.

    Per dot product the core issues one vector read per 128-element chunk of
    the key row (each expanded to line-granular ops) followed by one compute
    bubble for the multiply-accumulate. Query rows are loop-invariant over the
    sequence and are re-read once per thread block per (h, g) context. Each
    completed output line is written exactly once, by the block that computed
    it; a repeated output line anywhere in the workload is an error.
    """
    if layouts is None:
        layouts = default_layouts(shape)
    layouts.validate()
    spatial = [lv for lv in mapping.levels if lv.bind == "spatial"]
    cores = 1
    for lv in spatial:
        cores *= lv.extent
    if num_cores is None:
        num_cores = cores
    diags = mapping.validate(shape, num_cores)
    if diags:
        raise MappingError("mapping/shape mismatch: " + "; ".join(diags))

    elem = shape.elem_bytes
    d_bytes = shape.head_dim * elem
    lines_per_vec = (vector_len * elem) // line_size
    vecs_per_row = max(1, shape.head_dim // vector_len)
    if shape.head_dim % vector_len and shape.head_dim > vector_len:
        vecs_per_row = -(-shape.head_dim // vector_len)

    temporal = [lv for lv in mapping.levels if lv.bind != "spatial" and lv.axis != "D"]
    # one thread block = one iteration of the innermost tb-bound level
    last_tb = -1
    for i, lv in enumerate(temporal):
        if lv.bind == "tb":
            last_tb = i
    block_levels = temporal[: last_tb + 1]
    inner_levels = temporal[last_tb + 1:]

    def axis_strides(levels: list[MappingLevel]) -> list[tuple[str, int]]:
        out = []
        for i, lv in enumerate(levels):
            stride = 1
            for inner in levels[i + 1:]:
                if inner.axis == lv.axis:
                    stride *= inner.extent
            out.append((lv.axis, stride))
        return out

    # strides of spatial levels continue into the temporal nest
    all_levels = spatial + temporal
    all_strides = axis_strides(all_levels)
    spatial_strides = all_strides[: len(spatial)]
    temporal_strides = all_strides[len(spatial):]
    block_strides = temporal_strides[: last_tb + 1]
    inner_strides = temporal_strides[last_tb + 1:]

    q_base, q_sh, q_sg = layouts.query.base_addr, layouts.query.strides[0], layouts.query.strides[1]
    k_base, k_sh, k_sl = layouts.key.base_addr, layouts.key.strides[0], layouts.key.strides[1]
    o_base, o_sh, o_sg, o_sl = (layouts.out.base_addr, layouts.out.strides[0],
                                layouts.out.strides[1], layouts.out.strides[2])
    line_mask = ~(line_size - 1)

    written: set[int] = set()
    per_core: list[list[ThreadBlock]] = []
    tb_id = 0
    for core in range(num_cores):
        # decompose the core id over the spatial extents, row-major
        rem = core
        offs = {"H": 0, "G": 0, "L": 0}
        for (axis, stride), lv in zip(reversed(spatial_strides), reversed(spatial)):
            offs[axis] += (rem % lv.extent) * stride
            rem //= lv.extent
        h0, g0, l0 = offs["H"], offs["G"], offs["L"]

        blocks: list[ThreadBlock] = []
        block_ranges = [range(lv.extent) for lv in block_levels]
        inner_ranges = [range(lv.extent) for lv in inner_levels]
        for bidx in product(*block_ranges):
            ops: list[tuple] = []
            out_count = 0
            cur_hg = None
            pending_line = -1
            bh, bg, bl = h0, g0, l0
            for (axis, stride), i in zip(block_strides, bidx):
                if axis == "H":
                    bh += i * stride
                elif axis == "G":
                    bg += i * stride
                else:
                    bl += i * stride
            for iidx in product(*inner_ranges):
                h, g, l = bh, bg, bl
                for (axis, stride), i in zip(inner_strides, iidx):
                    if axis == "H":
                        h += i * stride
                    elif axis == "G":
                        g += i * stride
                    else:
                        l += i * stride
                out_line = (o_base + h * o_sh + g * o_sg + l * o_sl) & line_mask
                if out_line != pending_line:
                    if pending_line >= 0:
                        ops.append((OP_WRITE, pending_line))
                        out_count += 1
                        if pending_line in written:
                            raise MappingError(
                                f"output line {pending_line:#x} written by more than "
                                f"one thread block (false sharing)")
                        written.add(pending_line)
                    pending_line = out_line
                if cur_hg != (h, g):
                    cur_hg = (h, g)
                    qa = q_base + h * q_sh + g * q_sg
                    for off in range(0, d_bytes, line_size):
                        ops.append((OP_READ, qa + off))
                ka = k_base + h * k_sh + l * k_sl
                for v in range(vecs_per_row):
                    va = ka + v * vector_len * elem
                    for off in range(0, min(vector_len * elem, d_bytes - v * vector_len * elem),
                                     line_size):
                        ops.append((OP_READ, va + off))
                    ops.append((OP_COMPUTE, 1))
            if pending_line >= 0:
                ops.append((OP_WRITE, pending_line))
                out_count += 1
                if pending_line in written:
                    raise MappingError(
                        f"output line {pending_line:#x} written by more than one "
                        f"thread block (false sharing)")
                written.add(pending_line)
            block = ThreadBlock(tb_id, core, ops, out_count)
            block.validate(line_size)
            blocks.append(block)
            tb_id += 1
        per_core.append(blocks)
    return per_core


def footprint(shape: OperatorShape, layouts: LogitLayouts | None = None,
              line_size: int = 64) -> dict:
    """Closed-form operand footprints; cross-checked against trace enumeration in tests."""
    h, g, l, d, e = (shape.num_groups, shape.group_size, shape.seq_len,
                     shape.head_dim, shape.elem_bytes)
    q_bytes = h * g * d * e
    k_bytes = h * l * d * e
    out_bytes = h * g * l * e
    q_lines = h * g * (d * e // line_size)
    k_lines = h * l * (d * e // line_size)
    out_lines = -(-out_bytes // line_size)
    return {
        "q_bytes": q_bytes,
        "k_bytes": k_bytes,
        "out_bytes": out_bytes,
        "unique_lines": q_lines + k_lines + out_lines,
        "q_lines": q_lines,
        "k_lines": k_lines,
        "out_lines": out_lines,
    }


# ---------------------------------------------------------------------------
# trace and mapping file formats

def emit_trace(blocks: list[ThreadBlock]) -> str:
    """Render one core's blocks in the line-oriented trace format."""
    out = []
    for b in blocks:
        b.validate()
        out.append(f"TB {b.tb_id}")
        for kind, val in b.ops:
            if kind == OP_COMPUTE:
                out.append(f"C {val}")
            else:
                out.append(f"{kind} {val:#x}")
    return "\n".join(out) + "\n"


def parse_trace(text: str, home_core: int = 0) -> list[ThreadBlock]:
    blocks: list[ThreadBlock] = []
    cur: ThreadBlock | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise TraceFormatError(f"line {lineno}: expected '<kind> <value>', got {line!r}")
        kind, raw = parts
        if kind == "TB":
            if cur is not None:
                _finish_block(cur, lineno)
                blocks.append(cur)
            try:
                cur = ThreadBlock(int(raw, 0), home_core, [], 0)
            except ValueError:
                raise TraceFormatError(f"line {lineno}: bad thread-block id {raw!r}") from None
            continue
        if cur is None:
            raise TraceFormatError(f"line {lineno}: op before any TB header")
        if kind == "C":
            try:
                n = int(raw, 0)
            except ValueError:
                raise TraceFormatError(f"line {lineno}: bad bubble count {raw!r}") from None
            if n < 1:
                raise TraceFormatError(f"line {lineno}: bubble count must be >= 1")
            cur.ops.append((OP_COMPUTE, n))
        elif kind in (OP_READ, OP_WRITE):
            try:
                addr = int(raw, 16)
            except ValueError:
                raise TraceFormatError(f"line {lineno}: bad address {raw!r}") from None
            cur.ops.append((kind, addr))
        else:
            raise TraceFormatError(f"line {lineno}: unknown record kind {kind!r}")
    if cur is not None:
        _finish_block(cur, lineno="<eof>")
        blocks.append(cur)
    return blocks


def _finish_block(block: ThreadBlock, lineno) -> None:
    if not block.ops:
        raise TraceFormatError(f"line {lineno}: thread block {block.tb_id} has no ops")
    block.output_lines = len({v for k, v in block.ops if k == OP_WRITE})
    if block.output_lines < 1:
        raise TraceFormatError(
            f"line {lineno}: thread block {block.tb_id} writes no output lines")


def save_mapping(mapping: MappingSpec) -> str:
    return "".join(f"level {i}: axis={lv.axis} extent={lv.extent} bind={lv.bind}\n"
                   for i, lv in enumerate(mapping.levels))


def load_mapping(text: str) -> MappingSpec:
    levels = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            head, body = stripped.split(":", 1)
            if not head.strip().startswith("level"):
                raise ValueError
            kv = dict(item.split("=", 1) for item in body.split())
            lv = MappingLevel(kv["axis"].strip(), int(kv["extent"]), kv["bind"].strip())
        except (ValueError, KeyError):
            raise TraceFormatError(f"line {lineno}: bad mapping record {line!r}") from None
        if lv.axis not in AXES or lv.bind not in BINDINGS:
            raise TraceFormatError(f"line {lineno}: bad axis/binding in {line!r}")
        levels.append(lv)
    if not levels:
        raise TraceFormatError("mapping file has no levels")
    return MappingSpec(levels)


def write_trace_set(out_dir, per_core: list[list[ThreadBlock]],
                    shape: OperatorShape | None = None,
                    mapping: MappingSpec | None = None) -> dict:
    """Write one trace file per core plus a JSON manifest; returns the manifest."""
    import json

    os.makedirs(out_dir, exist_ok=True)
    files = []
    for core, blocks in enumerate(per_core):
        name = f"core{core:02d}.trace"
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(emit_trace(blocks))
        files.append(name)
    manifest = {"num_cores": len(per_core), "files": files}
    if shape is not None:
        manifest["shape"] = {
            "num_groups": shape.num_groups, "group_size": shape.group_size,
            "seq_len": shape.seq_len, "head_dim": shape.head_dim,
            "elem_bytes": shape.elem_bytes,
        }
    if mapping is not None:
        with open(os.path.join(out_dir, "mapping.txt"), "w", encoding="utf-8") as fh:
            fh.write(save_mapping(mapping))
        manifest["mapping_file"] = "mapping.txt"
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_trace_set(trace_dir) -> list[list[ThreadBlock]]:
    import json

    manifest_path = os.path.join(trace_dir, "manifest.json")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    per_core = []
    for core, name in enumerate(manifest["files"]):
        with open(os.path.join(trace_dir, name), "r", encoding="utf-8") as fh:
            per_core.append(parse_trace(fh.read(), home_core=core))
    return per_core
