"""Command-line entry points: run, table, plotdata, oracle-max.

``run`` accepts a JSON config file mirroring ExperimentConfig; explicit flags
override file values. Seeds may be given as a count (``--seeds 30`` means
seeds 0..29) or as a comma-separated list (``--seeds 3,7,11``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import benchmarks
from .acquisition import POLICIES
from .harness import (
    ExperimentConfig,
    cumulative_table,
    emit,
    read_results,
    run_experiment,
    write_plot_data,
)

_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _parse_seeds(text: str):
    if "," in text:
        return tuple(int(s) for s in text.split(",") if s.strip() != "")
    return tuple(range(int(text)))


def _parse_box(text: str):
    dims = []
    for part in text.split(","):
        lo, hi = part.split(":")
        dims.append((float(lo), float(hi)))
    return tuple(dims)


def _build_config(args) -> tuple[ExperimentConfig, str]:
    options: dict = {}
    out_dir = None
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        out_dir = loaded.pop("out", None)
        unknown = set(loaded) - _CONFIG_KEYS
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        options.update(loaded)

    overrides = {
        "objective": args.objective,
        "policy": args.policy,
        "init_points": args.init,
        "steps": args.steps,
        "seeds": _parse_seeds(args.seeds) if args.seeds else None,
        "m_samples": args.samples,
        "feature_count": args.features,
        "sample_budget": args.sample_budget,
        "acq_budget": args.acq_budget,
        "fit_budget": args.fit_budget,
        "noise": args.noise,
        "timeout": args.timeout,
        "box": _parse_box(args.box) if args.box else None,
        "f_max": args.fmax,
        "jobs": args.jobs,
    }
    options.update({k: v for k, v in overrides.items() if v is not None})
    if isinstance(options.get("seeds"), int):
        options["seeds"] = tuple(range(options["seeds"]))
    if "seeds" in options:
        options["seeds"] = tuple(options["seeds"])
    if "box" in options and options["box"] is not None:
        options["box"] = tuple(tuple(map(float, b)) for b in options["box"])
    if args.out:
        out_dir = args.out
    if "objective" not in options or "policy" not in options:
        raise SystemExit("an objective and a policy are required (flag or config)")
    if not out_dir:
        raise SystemExit("--out is required (flag or config key 'out')")
    return ExperimentConfig(**options), out_dir


def _print_table(table) -> None:
    header = f"{'function':<16}{'policy':<9}" + "".join(
        f"{'steps %d-%d' % w:>20}" for w in table.windows
    ) + f"{'seeds':>7}"
    print(header)
    for (function, policy), cells in sorted(table.rows.items()):
        row = f"{function:<16}{policy:<9}"
        for mean, sem in cells:
            row += f"{mean:>12.3f} ± {sem:<5.3f}"
        row += f"{table.n_seeds[(function, policy)]:>7}"
        print(row)


def _cmd_run(args) -> int:
    cfg, out_dir = _build_config(args)
    traces = run_experiment(cfg)
    paths = emit(traces, out_dir)
    for tr in traces:
        if tr.error is not None:
            print(f"seed {tr.seed}: FAILED after {tr.ys.size} observations: {tr.error}")
        else:
            final = tr.running_regret[-1]
            best = float(tr.ys.max()) if tr.ys.size else float("nan")
            regret_txt = f" regret={final:.6g}" if tr.f_max is not None else ""
            print(f"seed {tr.seed}: best={best:.6g}{regret_txt}")
    print(f"wrote {paths['results']} and {paths['summary']}")
    return 0


def _cmd_table(args) -> int:
    traces = read_results(f"{args.indir}/results.csv")
    usable = [tr for tr in traces if tr.f_max is not None]
    if not usable:
        raise SystemExit("no traces with a known maximum; cannot build a regret table")
    _print_table(cumulative_table(usable))
    return 0


def _cmd_plotdata(args) -> int:
    traces = read_results(f"{args.indir}/results.csv")
    path = write_plot_data(traces, args.out or args.indir)
    print(f"wrote {path}")
    return 0


def _cmd_oracle_max(args) -> int:
    fn = benchmarks.get(args.objective)
    value = benchmarks.oracle_max(
        fn, samples=args.samples, polish=args.polish, seed=args.seed
    )
    print(f"{fn.name}: f_max ≈ {value:.12g} (catalog {fn.max_value:.12g})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mgcbo",
        description="Bayesian-optimization regret experiments with dependence-statistic acquisitions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment configuration")
    run_p.add_argument("--config", help="JSON file mirroring the run options")
    run_p.add_argument("--objective", help="catalog name or 'cmd:<command line>'")
    run_p.add_argument("--policy", choices=POLICIES)
    run_p.add_argument("--init", type=int, help="initial uniform points (default 3)")
    run_p.add_argument("--steps", type=int, help="sequential BO steps (default 40)")
    run_p.add_argument("--seeds", help="count or comma-separated list (default 30)")
    run_p.add_argument("--samples", type=int, help="posterior draws per step M")
    run_p.add_argument("--features", type=int, help="random features per draw B")
    run_p.add_argument("--sample-budget", type=int, dest="sample_budget")
    run_p.add_argument("--acq-budget", type=int, dest="acq_budget")
    run_p.add_argument("--fit-budget", type=int, dest="fit_budget")
    run_p.add_argument("--noise", type=float, help="observation noise stdev (default 0)")
    run_p.add_argument("--timeout", type=float, help="external-objective timeout seconds")
    run_p.add_argument("--box", help="external-objective box, 'lo:hi,lo:hi,...'")
    run_p.add_argument("--fmax", type=float, help="regret reference for external objectives")
    run_p.add_argument("--jobs", type=int, help="concurrent seed runs (default 1)")
    run_p.add_argument("--out", help="output directory")
    run_p.set_defaults(func=_cmd_run)

    table_p = sub.add_parser("table", help="print cumulative-regret windows from a result dir")
    table_p.add_argument("--in", dest="indir", required=True)
    table_p.set_defaults(func=_cmd_table)

    plot_p = sub.add_parser("plotdata", help="write per-step mean regret ± stderr")
    plot_p.add_argument("--in", dest="indir", required=True)
    plot_p.add_argument("--out", help="output directory (default: input dir)")
    plot_p.set_defaults(func=_cmd_plotdata)

    oracle_p = sub.add_parser("oracle-max", help="re-derive a benchmark maximum by multistart search")
    oracle_p.add_argument("--objective", required=True)
    oracle_p.add_argument("--samples", type=int, default=10_000)
    oracle_p.add_argument("--polish", type=int, default=200)
    oracle_p.add_argument("--seed", type=int, default=0)
    oracle_p.set_defaults(func=_cmd_oracle_max)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
