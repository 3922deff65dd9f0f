"""Command-line front end: gen / run / sweep / report.

Exit codes: 0 success, 2 configuration or plan errors, 3 trace or mapping
errors, 4 deadlock abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ConfigError, load_config
from .engine import DeadlockError, run_simulation
from .stats import StatsRecord, speedup_table
from .workload import (MappingError, OperatorShape, TraceFormatError,
                       build_logit_mapping, default_layouts, footprint,
                       generate_traces, load_mapping, read_trace_set,
                       write_trace_set)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRACE = 3
EXIT_DEADLOCK = 4

MODEL_PRESETS = {
    "llama3-70b": dict(num_groups=8, group_size=8, head_dim=128),
    "llama3-405b": dict(num_groups=8, group_size=16, head_dim=128),
}


def _shape_from_args(args) -> OperatorShape:
    if args.model:
        preset = MODEL_PRESETS[args.model]
        return OperatorShape(seq_len=args.seqlen, elem_bytes=args.elem_bytes, **preset)
    return OperatorShape(num_groups=args.groups, group_size=args.group_size,
                         seq_len=args.seqlen, head_dim=args.head_dim,
                         elem_bytes=args.elem_bytes)


def cmd_gen(args) -> int:
    shape = _shape_from_args(args)
    if args.mapping:
        if not os.path.exists(args.mapping):
            print(f"error: mapping file {args.mapping!r} not found", file=sys.stderr)
            return EXIT_TRACE
        with open(args.mapping, "r", encoding="utf-8") as fh:
            mapping = load_mapping(fh.read())
    else:
        mapping = build_logit_mapping(shape, args.cores, args.tb_lines)
    layouts = default_layouts(shape)
    per_core = generate_traces(shape, mapping, layouts, num_cores=args.cores)
    manifest = write_trace_set(args.out, per_core, shape, mapping)
    fp = footprint(shape, layouts)
    print(f"wrote {manifest['num_cores']} trace files to {args.out}")
    print(f"footprint: q={fp['q_bytes']}B k={fp['k_bytes']}B out={fp['out_bytes']}B "
          f"unique_lines={fp['unique_lines']}")
    return EXIT_OK


def _run_once(config_path, trace_dir, overrides) -> StatsRecord:
    cfg = load_config(config_path, overrides)
    traces = read_trace_set(trace_dir)
    return run_simulation(cfg, traces)


def cmd_run(args) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.set or [])
    rec = _run_once(args.config, args.traces, overrides)
    text = rec.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"cycles={rec.total_cycles} -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sweep_worker(job):
    name, config_path, trace_dir, overrides = job
    rec = _run_once(config_path, trace_dir, overrides)
    return name, overrides, rec.to_json()


def cmd_sweep(args) -> int:
    with open(args.plan, "r", encoding="utf-8") as fh:
        plan = json.load(fh)
    runs = plan.get("runs")
    if not runs:
        raise ConfigError("plan has no runs")
    baseline = plan.get("baseline")
    if baseline is not None and baseline not in runs:
        raise ConfigError(f"baseline {baseline!r} is not a named run")
    axes = sorted(plan.get("sweep", {}).items())

    combos = [{}]
    for key, values in axes:
        combos = [dict(c, **{key: v}) for c in combos for v in values]

    jobs = []
    for name in sorted(runs):
        spec = runs[name]
        for combo in combos:
            overrides = dict(spec.get("overrides", {}))
            overrides.update(combo)
            label = name if not combo else \
                name + "/" + ",".join(f"{k}={v}" for k, v in sorted(combo.items()))
            jobs.append((label, spec["config"], spec["traces"], overrides))

    results = {}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for label, overrides, rec_json in pool.map(_sweep_worker, jobs):
                results[label] = (overrides, StatsRecord.from_json(rec_json))
    else:
        for job in jobs:
            label, overrides, rec_json = _sweep_worker(job)
            results[label] = (overrides, StatsRecord.from_json(rec_json))

    fieldnames = ["run"]
    rows = []
    for label in sorted(results):
        overrides, rec = results[label]
        row = {"run": label}
        row.update(rec.csv_row())
        rows.append(row)
        for k in row:
            if k not in fieldnames:
                fieldnames.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    out_csv = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out_csv)
        if args.save_json:
            os.makedirs(args.save_json, exist_ok=True)
            for label in sorted(results):
                safe = label.replace("/", "_").replace(",", "_").replace("=", "-")
                with open(os.path.join(args.save_json, safe + ".json"), "w",
                          encoding="utf-8") as fh:
                    fh.write(results[label][1].to_json())
        print(f"{len(rows)} rows -> {args.out}")
    else:
        sys.stdout.write(out_csv)
    return EXIT_OK


def cmd_report(args) -> int:
    records = {}
    for path in args.stats:
        name = os.path.splitext(os.path.basename(path))[0]
        with open(path, "r", encoding="utf-8") as fh:
            records[name] = StatsRecord.from_json(fh.read())
    rows = speedup_table(records, args.baseline)
    widths = {"run": max(len(r["run"]) for r in rows)}
    print(f"{'run':<{widths['run']}}  {'cycles':>12}  {'speedup':>8}  "
          f"{'mshr_hit':>9}  {'cache_hit':>9}")
    for r in rows:
        sp = f"{r['speedup']:.4f}" if r["speedup"] != "" else ""
        mh = f"{r['mshr_hit_rate']:.4f}" if r["mshr_hit_rate"] != "" else ""
        ch = f"{r['cache_hit_rate']:.4f}" if r["cache_hit_rate"] != "" else ""
        print(f"{r['run']:<{widths['run']}}  {str(r['cycles']):>12}  {sp:>8}  "
              f"{mh:>9}  {ch:>9}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="llcsim",
                                description="sliced-LLC simulator and workload generator")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate per-core trace files for a score operator")
    g.add_argument("--model", choices=sorted(MODEL_PRESETS), default=None)
    g.add_argument("--groups", type=int, default=8, help="head groups (when no --model)")
    g.add_argument("--group-size", type=int, default=8, help="query heads per group")
    g.add_argument("--head-dim", type=int, default=128)
    g.add_argument("--seqlen", type=int, required=True)
    g.add_argument("--elem-bytes", type=int, default=1)
    g.add_argument("--cores", type=int, default=16)
    g.add_argument("--tb-lines", type=int, default=2,
                   help="output lines per thread block (1-2 recommended)")
    g.add_argument("--mapping", default=None, help="use a handwritten mapping file")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate one trace set under one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--traces", required=True, help="trace directory with manifest.json")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key")
    r.add_argument("--out", default=None, help="stats JSON path (default: stdout)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="execute a plan of runs and aggregate a CSV")
    s.add_argument("plan", help="plan JSON: runs, baseline, sweep axes")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default=None, help="CSV path (default: stdout)")
    s.add_argument("--save-json", default=None, help="directory for per-run stats JSON")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("report", help="speedup table over a named baseline")
    t.add_argument("stats", nargs="+", help="stats JSON files")
    t.add_argument("--baseline", required=True, help="run name (file stem)")
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceFormatError, MappingError, FileNotFoundError) as e:
        print(f"trace error: {e}", file=sys.stderr)
        return EXIT_TRACE
    except DeadlockError as e:
        print(f"deadlock: {e}", file=sys.stderr)
        return EXIT_DEADLOCK
    except KeyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
