"""Six synthetic test functions, stored as maximization problems.

Each evaluator is the negation of the standard minimization form, so the known
maximum is the negated standard minimum and regret is max_value - best
observed. Boxes and constants follow the usual benchmark references:
Michalewicz on [0, pi]^2 with steepness 10, six-hump camel on [-3, 3] x
[-2, 2], Hartmann-3/6 on the unit cube, Ackley on [-32.768, 32.768]^3, Levy
on [-10, 10]^4. Evaluators are pure and accept (n, dim) batches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .cmaes import SearchBox

__all__ = ["TestFunction", "catalog", "get", "evaluate", "oracle_max"]


@dataclass(frozen=True)
class TestFunction:
    name: str
    dim: int
    box: SearchBox
    max_value: float
    evaluator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"{self.name} expects a point of dimension {self.dim}")
        if not self.box.contains(x, atol=1e-12 * float(np.max(self.box.span))):
            raise ValueError(f"point {x} is outside the {self.name} box")
        return float(self.evaluator(x[None, :])[0])

    def batch(self, points: np.ndarray) -> np.ndarray:
        return self.evaluator(np.asarray(points, dtype=float))


def _michalewicz(x: np.ndarray) -> np.ndarray:
    i = np.arange(1, x.shape[1] + 1)
    return np.sum(np.sin(x) * np.sin(i * x**2 / np.pi) ** 20, axis=1)


def _camel(x: np.ndarray) -> np.ndarray:
    a, b = x[:, 0], x[:, 1]
    return -(
        (4.0 - 2.1 * a**2 + a**4 / 3.0) * a**2 + a * b + (-4.0 + 4.0 * b**2) * b**2
    )


_H3_A = np.array([[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]])
_H3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_H6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
_H_C = np.array([1.0, 1.2, 3.0, 3.2])


def _hartmann(a: np.ndarray, p: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def f(x: np.ndarray) -> np.ndarray:
        d = np.sum(a[None, :, :] * (x[:, None, :] - p[None, :, :]) ** 2, axis=2)
        return np.sum(_H_C[None, :] * np.exp(-d), axis=1)

    return f


def _ackley(x: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    term1 = -20.0 * np.exp(-0.2 * np.sqrt(np.sum(x**2, axis=1) / d))
    term2 = -np.exp(np.sum(np.cos(2.0 * np.pi * x), axis=1) / d)
    return -(term1 + term2 + 20.0 + np.e)


def _levy(x: np.ndarray) -> np.ndarray:
    w = 1.0 + (x - 1.0) / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum(
        (w[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:, :-1] + 1.0) ** 2),
        axis=1,
    )
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[:, -1]) ** 2)
    return -(head + mid + tail)


def _box(bounds) -> SearchBox:
    return SearchBox(np.asarray(bounds, dtype=float))


_CATALOG = (
    TestFunction("michalewicz-2", 2, _box([[0, np.pi]] * 2), 1.8013034100985534, _michalewicz),
    TestFunction("camel-2", 2, _box([[-3, 3], [-2, 2]]), 1.0316284534898774, _camel),
    TestFunction("hartmann-3", 3, _box([[0, 1]] * 3), 3.862779787332663, _hartmann(_H3_A, _H3_P)),
    TestFunction("ackley-3", 3, _box([[-32.768, 32.768]] * 3), 0.0, _ackley),
    TestFunction("levy-4", 4, _box([[-10, 10]] * 4), 0.0, _levy),
    TestFunction("hartmann-6", 6, _box([[0, 1]] * 6), 3.3223680114155147, _hartmann(_H6_A, _H6_P)),
)


def catalog() -> tuple:
    """The six benchmark functions, in the order they are usually reported."""
    return _CATALOG


def get(name: str) -> TestFunction:
    key = "".join(ch for ch in name.lower() if ch.isalnum())
    for fn in _CATALOG:
        if "".join(ch for ch in fn.name if ch.isalnum()) == key:
            return fn
    known = ", ".join(fn.name for fn in _CATALOG)
    raise ValueError(f"unknown test function {name!r}; known: {known}")


def evaluate(name: str, x) -> float:
    """Evaluate a catalog function by name at a single in-box point."""
    return get(name)(x)


def oracle_max(
    fn: TestFunction,
    samples: int = 10_000,
    polish: int = 200,
    zoom_rounds: int = 3,
    seed: int = 0,
) -> float:
    """Multistart local-search estimate of the maximum.

    Screens ``samples`` uniform points and polishes the best ``polish`` of
    them with L-BFGS-B, then repeats with Gaussian clouds shrinking around the
    incumbent (``zoom_rounds`` times). The zoom stage rides funnel-shaped
    landscapes such as Ackley, whose global basin is far too small for a
    uniform screen to hit."""
    rng = np.random.default_rng(seed)
    bounds = list(map(tuple, fn.box.bounds))

    def neg(p: np.ndarray) -> float:
        return -float(fn.batch(p[None, :])[0])

    def screen_and_polish(pts: np.ndarray, count: int, best, best_x):
        vals = fn.batch(pts)
        for idx in np.argsort(-vals)[:count]:
            res = minimize(neg, pts[idx], method="L-BFGS-B", bounds=bounds)
            if -res.fun > best:
                best, best_x = float(-res.fun), res.x.copy()
        return best, best_x

    pts = fn.box.lower + rng.random((samples, fn.dim)) * fn.box.span
    best, best_x = screen_and_polish(pts, polish, -np.inf, None)
    width = fn.box.span / 10.0
    for _ in range(zoom_rounds):
        cloud = np.clip(
            best_x[None, :] + rng.standard_normal((samples, fn.dim)) * width[None, :],
            fn.box.lower,
            fn.box.upper,
        )
        best, best_x = screen_and_polish(cloud, max(polish // 4, 8), best, best_x)
        width = width / 4.0
    return best
