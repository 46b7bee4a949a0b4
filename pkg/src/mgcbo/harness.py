"""Experiment driver: the sequential BO loop, regret bookkeeping, result
files, and the line-delimited subprocess protocol for external objectives.

Per seed the loop is: draw the initial points uniformly in the box, observe,
then for each step refit hyperparameters, pick the policy's next point,
observe, append. Objective evaluations per seed are exactly
init_points + steps; all inner-loop work queries only the surrogate. Every
emitted byte except the timing column is a pure function of (config, seed).

Result files (schema v1):
  results.csv   one row per observation: function, policy, seed, step, x, y,
                regret, elapsed-ms. Initial points carry steps <= 0, BO steps
                are 1-based. x components are ';'-joined; floats use 17
                significant digits.
  summary.json  cumulative-regret windows (steps 1-20 and 21-40) per
                function/policy: mean over seeds and standard error.
  plotdata.csv  per-step mean regret and standard error across seeds.

Subprocess protocol (v1): one JSON object per line, UTF-8, one request in
flight. Request {"x": [..]}; response {"y": <real>} or {"error": "<msg>"}.
The child stays alive for the whole run.
"""

from __future__ import annotations

import csv
import json
import math
import os
import select
import shlex
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import benchmarks
from .acquisition import POLICIES, AcquisitionState, next_point, sample_maxima
from .cmaes import CmaConfig, SearchBox
from .errors import ObjectiveError
from .gp import Dataset, GpPosterior, fit_hyperparams
from .kernels import sample_feature_map

__all__ = [
    "ExperimentConfig",
    "RegretTrace",
    "ResultTable",
    "ExternalObjective",
    "run_experiment",
    "regret_curve",
    "cumulative_table",
    "emit",
    "read_results",
    "plot_data",
]

TABLE_WINDOWS = ((1, 20), (21, 40))

_MAXVALUE_POLICIES = ("mes", "gp-dc", "gp-mgc")

# IPOP restarts for the inner maximizations; multimodal posterior draws and
# plateau-heavy dependence acquisitions stall single runs long before the
# evaluation budget is spent
_INNER_RESTARTS = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an objective, a policy, and the protocol constants."""

    objective: str
    policy: str
    init_points: int = 3
    steps: int = 40
    seeds: Tuple[int, ...] = tuple(range(30))
    m_samples: int = 50        # posterior draws per step (M)
    feature_count: int = 500   # random features per draw (B)
    sample_budget: int = 2000  # CMA evaluations per sample maximization
    acq_budget: int = 4000     # CMA evaluations for the acquisition argmax
    fit_budget: int = 300      # likelihood evaluations per refit
    noise: float = 0.0         # stdev of optional Gaussian observation noise
    timeout: float = 60.0      # seconds per external-objective response
    box: Optional[Tuple[Tuple[float, float], ...]] = None  # cmd objectives
    f_max: Optional[float] = None                          # cmd objectives
    jobs: int = 1

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; known: {POLICIES}")
        if self.steps < 1 or self.init_points < 1:
            raise ValueError("steps and init_points must be at least 1")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.is_external and self.box is None:
            raise ValueError("external objectives need an explicit box")

    @property
    def is_external(self) -> bool:
        return self.objective.startswith("cmd:")

    @property
    def command(self) -> str:
        return self.objective[len("cmd:"):]

    def resolve_box(self) -> SearchBox:
        if self.is_external:
            return SearchBox(np.asarray(self.box, dtype=float))
        return benchmarks.get(self.objective).box

    def resolve_f_max(self) -> Optional[float]:
        if self.f_max is not None:
            return self.f_max
        if self.is_external:
            return None
        return benchmarks.get(self.objective).max_value


@dataclass(frozen=True)
class RegretTrace:
    """All observations of one seeded run, initial points included."""

    function: str
    policy: str
    seed: int
    init_points: int
    xs: np.ndarray
    ys: np.ndarray
    elapsed_ms: np.ndarray
    f_max: Optional[float]
    error: Optional[str] = None

    @property
    def running_regret(self) -> np.ndarray:
        if self.f_max is None:
            return np.full(self.ys.shape, np.nan)
        return regret_curve(self.ys, self.f_max)

    @property
    def step_regrets(self) -> np.ndarray:
        """Regret indexed by BO step (initial points folded into step 0)."""
        return self.running_regret[self.init_points:]


@dataclass(frozen=True)
class ResultTable:
    """Mean cumulative regret per (function, policy) over the step windows."""

    windows: Tuple[Tuple[int, int], ...]
    rows: Dict[Tuple[str, str], Tuple[Tuple[float, float], ...]]
    n_seeds: Dict[Tuple[str, str], int]


def regret_curve(values, f_max: float) -> np.ndarray:
    """r_t = f_max - max(values[:t]); non-increasing."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot compute regret of an empty trace")
    if not np.isfinite(f_max):
        raise ValueError("f_max must be finite")
    return f_max - np.maximum.accumulate(values)


class ExternalObjective:
    """Long-lived child process speaking the line protocol; one request in
    flight at a time."""

    def __init__(self, command: str, timeout: float = 60.0):
        self.command = command
        self.timeout = timeout
        self._buffer = b""
        self._stderr_buf = b""
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )

    def _drain_stderr(self, wait: float = 0.0):
        """Keep the child's stderr pipe from filling up; remember the tail."""
        try:
            fd = self.proc.stderr.fileno()
            while select.select([fd], [], [], wait)[0]:
                chunk = os.read(fd, 65536)
                if not chunk:
                    break
                self._stderr_buf = (self._stderr_buf + chunk)[-4096:]
                wait = 0.0
        except (OSError, ValueError):
            pass

    def _fail(self, why: str) -> ObjectiveError:
        self._drain_stderr(wait=0.2)
        tail = self._stderr_buf.decode(errors="replace").strip()
        detail = f"; child stderr: {tail}" if tail else ""
        return ObjectiveError(f"external objective {why}{detail}")

    def _read_line(self) -> bytes:
        deadline = time.monotonic() + self.timeout
        out_fd = self.proc.stdout.fileno()
        err_fd = self.proc.stderr.fileno()
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise self._fail(f"timed out after {self.timeout:g}s")
            ready, _, _ = select.select([out_fd, err_fd], [], [], remaining)
            if err_fd in ready:
                self._drain_stderr()
            if out_fd not in ready:
                continue
            chunk = os.read(out_fd, 65536)
            if not chunk:
                code = self.proc.poll()
                raise self._fail(f"closed its output (exit code {code})")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def __call__(self, x) -> float:
        if self.proc.poll() is not None:
            raise self._fail(f"exited with code {self.proc.returncode}")
        request = json.dumps({"x": [float(v) for v in np.asarray(x, dtype=float)]})
        try:
            self.proc.stdin.write(request.encode() + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise self._fail("closed its input") from None
        line = self._read_line()
        try:
            payload = json.loads(line.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ObjectiveError(
                f"external objective sent a malformed response: {line[:200]!r}"
            ) from None
        if not isinstance(payload, dict):
            raise ObjectiveError(f"external objective sent a non-object response: {line[:200]!r}")
        if "error" in payload:
            raise ObjectiveError(f"external objective reported: {payload['error']}")
        if "y" not in payload or not isinstance(payload["y"], (int, float)) \
                or isinstance(payload["y"], bool) or not math.isfinite(payload["y"]):
            raise ObjectiveError(f"external objective sent an invalid y: {line[:200]!r}")
        return float(payload["y"])

    def close(self):
        for stream in (self.proc.stdin, self.proc.stdout, self.proc.stderr):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_objective(command: str, x, timeout: float = 60.0) -> float:
    """One-shot protocol round trip (spawns, queries, closes)."""
    with ExternalObjective(command, timeout=timeout) as obj:
        return obj(x)


def _run_seed(cfg: ExperimentConfig, seed: int) -> RegretTrace:
    box = cfg.resolve_box()
    f_max = cfg.resolve_f_max()
    label = cfg.command if cfg.is_external else benchmarks.get(cfg.objective).name
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if cfg.is_external:
        objective = ExternalObjective(cfg.command, timeout=cfg.timeout)
    else:
        objective = benchmarks.get(cfg.objective)

    xs: List[np.ndarray] = []
    ys: List[float] = []
    elapsed: List[float] = []
    error: Optional[str] = None

    def observe(x) -> float:
        y = float(objective(x))
        if cfg.noise > 0.0:
            y += cfg.noise * rng.standard_normal()
        return y

    try:
        for _ in range(cfg.init_points):
            x = box.sample_uniform(rng)
            t0 = time.perf_counter()
            y = observe(x)
            elapsed.append((time.perf_counter() - t0) * 1e3)
            xs.append(x)
            ys.append(y)

        incumbent = None
        for step in range(1, cfg.steps + 1):
            t0 = time.perf_counter()
            data = Dataset(np.array(xs), np.array(ys), box)
            params = fit_hyperparams(
                data, rng=rng, incumbent=incumbent, budget=cfg.fit_budget
            )
            incumbent = params
            gp = GpPosterior.from_data(data, params)

            fm = None
            ms = None
            if cfg.policy in _MAXVALUE_POLICIES:
                fm = sample_feature_map(
                    params.kernel.lengthscale, box.dim, cfg.feature_count, rng
                )
                ms = sample_maxima(
                    gp,
                    cfg.m_samples,
                    fm,
                    CmaConfig(max_evals=cfg.sample_budget, restarts=_INNER_RESTARTS),
                    rng,
                )
            state = AcquisitionState(
                gp=gp, step=step, y_best=max(ys), feature_map=fm, max_samples=ms
            )
            x = next_point(
                cfg.policy,
                state,
                CmaConfig(max_evals=cfg.acq_budget, restarts=_INNER_RESTARTS),
                rng,
            )
            y = observe(x)
            elapsed.append((time.perf_counter() - t0) * 1e3)
            xs.append(x)
            ys.append(y)
    except ObjectiveError as exc:
        error = str(exc)
    finally:
        if cfg.is_external:
            objective.close()

    return RegretTrace(
        function=label,
        policy=cfg.policy,
        seed=seed,
        init_points=cfg.init_points,
        xs=np.array(xs) if xs else np.empty((0, box.dim)),
        ys=np.array(ys),
        elapsed_ms=np.array(elapsed),
        f_max=f_max,
        error=error,
    )


def run_experiment(cfg: ExperimentConfig) -> List[RegretTrace]:
    """All seeded runs of one configuration. A failed external objective
    aborts only its own seed; the failure text is recorded on the trace."""
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    return [_run_seed(cfg, seed) for seed in cfg.seeds]


def cumulative_table(traces: Sequence[RegretTrace]) -> ResultTable:
    """Sum step regrets over each window, then average across seeds."""
    groups: Dict[Tuple[str, str], List[RegretTrace]] = {}
    for tr in traces:
        if tr.error is not None:
            continue
        groups.setdefault((tr.function, tr.policy), []).append(tr)
    rows = {}
    n_seeds = {}
    for key, members in groups.items():
        sums = {w: [] for w in TABLE_WINDOWS}
        for tr in members:
            regrets = tr.step_regrets
            for lo, hi in TABLE_WINDOWS:
                if regrets.size < hi:
                    raise ValueError(
                        f"window {lo}-{hi} exceeds trace length {regrets.size} "
                        f"for {key}"
                    )
                sums[(lo, hi)].append(float(np.sum(regrets[lo - 1: hi])))
        cells = []
        for w in TABLE_WINDOWS:
            vals = np.array(sums[w])
            sem = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
            cells.append((float(np.mean(vals)), sem))
        rows[key] = tuple(cells)
        n_seeds[key] = len(members)
    return ResultTable(windows=TABLE_WINDOWS, rows=rows, n_seeds=n_seeds)


def _fmt(value: float) -> str:
    return "%.17g" % value


_CSV_COLUMNS = ["function", "policy", "seed", "step", "x", "y", "regret", "elapsed-ms"]


def emit(traces: Sequence[RegretTrace], out_dir: str) -> Dict[str, str]:
    """Write results.csv and summary.json; returns the paths."""
    if not traces:
        raise ValueError("nothing to emit")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for tr in traces:
            regrets = tr.running_regret
            for i in range(tr.ys.size):
                step = i - tr.init_points + 1
                writer.writerow(
                    [
                        tr.function,
                        tr.policy,
                        tr.seed,
                        step,
                        ";".join(_fmt(v) for v in tr.xs[i]),
                        _fmt(tr.ys[i]),
                        _fmt(regrets[i]),
                        _fmt(tr.elapsed_ms[i]),
                    ]
                )

    summary_path = os.path.join(out_dir, "summary.json")
    complete = [
        tr for tr in traces
        if tr.error is None and tr.step_regrets.size >= TABLE_WINDOWS[-1][1]
        and tr.f_max is not None
    ]
    summary: Dict = {
        "schema": "mgcbo-results-v1",
        "windows": ["%d-%d" % w for w in TABLE_WINDOWS],
        "table": {},
        "errors": {
            f"{tr.function}/{tr.policy}/seed{tr.seed}": tr.error
            for tr in traces
            if tr.error is not None
        },
    }
    if complete:
        table = cumulative_table(complete)
        for (function, policy), cells in sorted(table.rows.items()):
            entry = summary["table"].setdefault(function, {})
            entry[policy] = {
                "%d-%d" % w: {"mean": mean, "sem": sem}
                for w, (mean, sem) in zip(table.windows, cells)
            }
            entry[policy]["n_seeds"] = table.n_seeds[(function, policy)]
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"results": csv_path, "summary": summary_path}


def read_results(csv_path: str) -> List[RegretTrace]:
    """Rebuild traces from results.csv (exact for x and y; f_max is not in
    the file, so regrets are taken as written)."""
    runs: Dict[Tuple[str, str, int], List[dict]] = {}
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _CSV_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames} in {csv_path}")
        for row in reader:
            key = (row["function"], row["policy"], int(row["seed"]))
            runs.setdefault(key, []).append(row)
    traces = []
    for (function, policy, seed), rows in runs.items():
        rows.sort(key=lambda r: int(r["step"]))
        init_points = sum(1 for r in rows if int(r["step"]) <= 0)
        ys = np.array([float(r["y"]) for r in rows])
        regrets = np.array([float(r["regret"]) for r in rows])
        try:
            f_max = benchmarks.get(function).max_value
        except ValueError:
            # external objective: recover the reference from the final regret
            best = float(np.max(ys))
            f_max = None if np.isnan(regrets[-1]) else best + float(regrets[-1])
        traces.append(
            RegretTrace(
                function=function,
                policy=policy,
                seed=seed,
                init_points=init_points,
                xs=np.array([[float(v) for v in r["x"].split(";")] for r in rows]),
                ys=ys,
                elapsed_ms=np.array([float(r["elapsed-ms"]) for r in rows]),
                f_max=f_max,
            )
        )
    traces.sort(key=lambda tr: (tr.function, tr.policy, tr.seed))
    return traces


def plot_data(traces: Sequence[RegretTrace]) -> List[dict]:
    """Per-step mean regret and standard error across seeds, one record per
    (function, policy, step); enough to redraw regret curves."""
    groups: Dict[Tuple[str, str], List[RegretTrace]] = {}
    for tr in traces:
        if tr.error is None:
            groups.setdefault((tr.function, tr.policy), []).append(tr)
    records = []
    for (function, policy), members in sorted(groups.items()):
        depth = min(tr.step_regrets.size for tr in members)
        stack = np.stack([tr.step_regrets[:depth] for tr in members])
        means = stack.mean(axis=0)
        sems = (
            stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
            if stack.shape[0] > 1
            else np.zeros(depth)
        )
        for t in range(depth):
            records.append(
                {
                    "function": function,
                    "policy": policy,
                    "step": t + 1,
                    "mean_regret": float(means[t]),
                    "stderr": float(sems[t]),
                    "n_seeds": stack.shape[0],
                }
            )
    return records


def write_plot_data(traces: Sequence[RegretTrace], out_dir: str) -> str:
    path = os.path.join(out_dir, "plotdata.csv")
    records = plot_data(traces)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["function", "policy", "step", "mean_regret", "stderr", "n_seeds"])
        for rec in records:
            writer.writerow(
                [
                    rec["function"],
                    rec["policy"],
                    rec["step"],
                    _fmt(rec["mean_regret"]),
                    _fmt(rec["stderr"]),
                    rec["n_seeds"],
                ]
            )
    return path
