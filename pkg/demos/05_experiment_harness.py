#!/usr/bin/env python3
"""Drive the CLI end to end: generate traces, run a policy matrix, report.

Everything here can equally be done from the shell:

    llcsim gen --model llama3-70b --seqlen 2048 --cores 16 --out traces/
    llcsim run --config configs/baseline.cfg --traces traces/ --out unopt.json
    llcsim run --config configs/baseline.cfg --traces traces/ \
               --set throttle=dynmg --set arbiter=BMA --out tuned.json
    llcsim report unopt.json tuned.json --baseline unopt
"""

import json
import os
import tempfile

from llcsim.cli import main

work = tempfile.mkdtemp(prefix="llcsim-demo-")
traces = os.path.join(work, "traces")
cfg = os.path.join(os.path.dirname(__file__), "..", "configs", "baseline.cfg")

print("== gen ==")
main(["gen", "--model", "llama3-70b", "--seqlen", "1024", "--cores", "16",
      "--out", traces])

print("\n== run (three policy points) ==")
stats = {}
for name, overrides in (("unopt", []),
                        ("dynmg", ["--set", "throttle=dynmg"]),
                        ("dynmg_bma", ["--set", "throttle=dynmg",
                                       "--set", "arbiter=BMA"])):
    out = os.path.join(work, f"{name}.json")
    main(["run", "--config", cfg, "--traces", traces, "--out", out] + overrides)
    stats[name] = out

print("\n== report ==")
main(["report", *stats.values(), "--baseline", "unopt"])

print("\n== sweep plan (cache sizes x policies, CSV) ==")
plan = {
    "baseline": "unopt",
    "runs": {
        "unopt": {"config": cfg, "traces": traces,
                  "overrides": {"arbiter": "fcfs", "throttle": "none"}},
        "dynmg_bma": {"config": cfg, "traces": traces,
                      "overrides": {"arbiter": "BMA", "throttle": "dynmg"}},
    },
    "sweep": {"l2_size": [4194304, 16777216]},
}
plan_path = os.path.join(work, "plan.json")
with open(plan_path, "w") as fh:
    json.dump(plan, fh)
csv_path = os.path.join(work, "sweep.csv")
main(["sweep", plan_path, "--out", csv_path])
print(open(csv_path).read())
print(f"artifacts under {work}")
