"""JSON-lines objective worker for SVR hyperparameter search.

Speaks the harness subprocess protocol (v1): one JSON object per line on
stdin/stdout, one request in flight. A request carries the search point in
log10 space, ``{"x": [log10(C), log10(gamma), log10(epsilon)]}``; the adapter
exponentiates, trains an RBF support-vector regressor on the local dataset,
and answers ``{"y": <mean ten-fold R^2>}`` or ``{"error": "<msg>"}``.

Search ranges (log10): C in [-2, 3], gamma in [-3, 0], epsilon in [-4, 0].
Requests outside them get an error object, as do training failures; the loop
keeps serving either way. Folds are shuffled once with a fixed seed, so equal
requests get equal answers. Features are standardized inside each training
fold; targets are left raw (R^2 is scale-free in the target).

The dataset is a local delimited text file (comma, semicolon, tab, or
whitespace), last column the regression target, optional single header line.
The UCI fish-toxicity, concrete-strength (CSV export), and Boston-housing
files all load this way; fetching them is the user's job.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
from sklearn.model_selection import KFold, cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVR

LOG10_RANGES = ((-2.0, 3.0), (-3.0, 0.0), (-4.0, 0.0))  # C, gamma, epsilon
RANGE_SLACK = 1e-9
FOLDS = 10
FOLD_SEED = 0


def load_table(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Numeric matrix from a delimited text file; last column is the target."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path} is empty")

    def split(line: str) -> list[str]:
        for sep in (";", ",", "\t"):
            if sep in line:
                return [c.strip() for c in line.split(sep)]
        return line.split()

    rows = []
    for i, line in enumerate(lines):
        cells = split(line)
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if i == 0:
                continue  # header line
            raise ValueError(f"{path}: non-numeric row {i + 1}: {line[:80]!r}") from None
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError(f"{path}: need at least two numeric columns")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite entries")
    return data[:, :-1], data[:, -1]


def decode_point(x) -> tuple[float, float, float]:
    """Validate a log10-space request and return (C, gamma, epsilon)."""
    if not isinstance(x, list) or len(x) != len(LOG10_RANGES):
        raise ValueError(f"x must be a list of {len(LOG10_RANGES)} reals")
    values = []
    names = ("log10(C)", "log10(gamma)", "log10(epsilon)")
    for name, value, (lo, hi) in zip(names, x, LOG10_RANGES):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{name} must be a real number")
        if not (lo - RANGE_SLACK <= value <= hi + RANGE_SLACK):
            raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
        values.append(float(value))
    return tuple(10.0**v for v in values)


class SvrScorer:
    """Deterministic ten-fold R^2 for one dataset."""

    def __init__(self, features: np.ndarray, targets: np.ndarray):
        if features.shape[0] < FOLDS:
            raise ValueError(f"need at least {FOLDS} rows for {FOLDS}-fold CV")
        self.features = features
        self.targets = targets
        self.folds = KFold(n_splits=FOLDS, shuffle=True, random_state=FOLD_SEED)

    def score(self, c: float, gamma: float, epsilon: float) -> float:
        model = make_pipeline(
            StandardScaler(), SVR(kernel="rbf", C=c, gamma=gamma, epsilon=epsilon)
        )
        scores = cross_val_score(
            model, self.features, self.targets, cv=self.folds, scoring="r2"
        )
        return float(np.mean(scores))


def serve(scorer: SvrScorer, stdin=None, stdout=None) -> None:
    """Request loop: runs until stdin closes. Bad requests and training
    failures answer with an error object and keep the loop alive."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict) or "x" not in request:
                raise ValueError("request must be an object with an 'x' field")
            c, gamma, epsilon = decode_point(request["x"])
            response = {"y": scorer.score(c, gamma, epsilon)}
        except Exception as exc:  # noqa: BLE001 - everything becomes a protocol error
            response = {"error": str(exc)}
        print(json.dumps(response), file=stdout, flush=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="svr-objective-adapter",
        description="Serve ten-fold cross-validated SVR R^2 over the harness line protocol.",
    )
    parser.add_argument("--data", required=True, help="delimited dataset file, target in the last column")
    args = parser.parse_args(argv)
    try:
        features, targets = load_table(args.data)
        scorer = SvrScorer(features, targets)
    except (OSError, ValueError) as exc:
        # dataset problems are fatal: report once on stdout and exit nonzero
        print(json.dumps({"error": f"dataset: {exc}"}), flush=True)
        return 1
    serve(scorer)
    return 0


if __name__ == "__main__":
    sys.exit(main())
