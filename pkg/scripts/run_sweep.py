#!/usr/bin/env python3
"""Full benchmark sweep: every catalog function x every policy.

At full scale (30 seeds x 40 steps) this is hours of compute; --quick runs a
small smoke version. Each (function, policy) cell gets its own result
directory under --out, and a combined cumulative-regret table is printed and
saved at the end.
"""

import argparse
import json
import time
from pathlib import Path

from mgcbo import benchmarks
from mgcbo.acquisition import POLICIES
from mgcbo.harness import ExperimentConfig, cumulative_table, emit, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/sweep")
    parser.add_argument("--seeds", type=int, default=30)
    parser.add_argument("--steps", type=int, default=40)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--policies", default=",".join(POLICIES))
    parser.add_argument("--functions", default=",".join(fn.name for fn in benchmarks.catalog()))
    parser.add_argument("--quick", action="store_true", help="2 seeds x 10 steps smoke run")
    args = parser.parse_args()

    seeds = tuple(range(2 if args.quick else args.seeds))
    steps = 10 if args.quick else args.steps
    out_root = Path(args.out)

    all_traces = []
    for function in args.functions.split(","):
        for policy in args.policies.split(","):
            tag = f"{function}-{policy}"
            started = time.time()
            cfg = ExperimentConfig(
                objective=function,
                policy=policy,
                steps=steps,
                seeds=seeds,
                jobs=args.jobs,
            )
            traces = run_experiment(cfg)
            emit(traces, str(out_root / tag))
            all_traces.extend(traces)
            print(f"{tag}: {time.time() - started:.0f}s", flush=True)

    if steps >= 40:
        table = cumulative_table(all_traces)
        rows = {
            f"{fn}/{pol}": {
                "%d-%d" % w: mean for w, (mean, _) in zip(table.windows, cells)
            }
            for (fn, pol), cells in sorted(table.rows.items())
        }
        print(json.dumps(rows, indent=2))
        (out_root / "sweep_table.json").write_text(json.dumps(rows, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
