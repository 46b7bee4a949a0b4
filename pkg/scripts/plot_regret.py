#!/usr/bin/env python3
"""Draw log-scale mean-regret curves (one panel per function) from the
plotdata.csv files under one or more result directories."""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(paths):
    curves = defaultdict(dict)  # function -> policy -> (steps, means, sems)
    for path in paths:
        with open(path) as fh:
            for row in csv.DictReader(fh):
                entry = curves[row["function"]].setdefault(row["policy"], ([], [], []))
                entry[0].append(int(row["step"]))
                entry[1].append(float(row["mean_regret"]))
                entry[2].append(float(row["stderr"]))
    return curves


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("indirs", nargs="+", help="result dirs containing plotdata.csv")
    parser.add_argument("--out", default="regret.png")
    args = parser.parse_args()

    paths = []
    for d in args.indirs:
        candidate = Path(d) / "plotdata.csv"
        paths.append(candidate if candidate.exists() else Path(d))
    curves = load(paths)
    if not curves:
        raise SystemExit("no plot data found")

    n = len(curves)
    cols = min(n, 3)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(5 * cols, 4 * rows), squeeze=False)
    for ax, (function, policies) in zip(axes.ravel(), sorted(curves.items())):
        for policy, (steps, means, sems) in sorted(policies.items()):
            order = sorted(range(len(steps)), key=steps.__getitem__)
            s = [steps[i] for i in order]
            m = [means[i] for i in order]
            e = [sems[i] for i in order]
            ax.plot(s, m, label=policy)
            ax.fill_between(
                s,
                [max(mi - ei, 1e-12) for mi, ei in zip(m, e)],
                [mi + ei for mi, ei in zip(m, e)],
                alpha=0.2,
            )
        ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel("mean regret")
        ax.set_title(function)
        ax.legend(fontsize=8)
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
