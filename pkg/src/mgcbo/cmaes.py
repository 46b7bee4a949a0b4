"""Derivative-free global maximization over a box via (mu/mu_w, lambda)-CMA-ES.

Standard rank-mu update with cumulative step-size adaptation, run on
box-normalized coordinates in [0, 1]^D. Restarts follow the IPOP rule:
population size doubles whenever a run stalls, within the evaluation budget.
A run is sequential; independent runs are safe to execute concurrently with
their own seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericalError

__all__ = ["SearchBox", "CmaConfig", "CmaResult", "maximize"]


@dataclass(frozen=True)
class SearchBox:
    """Axis-aligned box: (dim, 2) array of [lower, upper] per dimension."""

    bounds: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if b.ndim != 2 or b.shape[1] != 2:
            raise ValueError(f"bounds must be (dim, 2), got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("bounds must be finite")
        if not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.bounds[:, 1]

    @property
    def span(self) -> np.ndarray:
        return self.bounds[:, 1] - self.bounds[:, 0]

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        )

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        return self.lower + rng.random(self.dim) * self.span

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.span

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.span


@dataclass(frozen=True)
class CmaConfig:
    """Run settings. ``population`` defaults to 4 + floor(3 ln D);
    ``sigma0`` is in box-normalized units; ``x0`` optionally warm-starts the
    search mean (box coordinates)."""

    max_evals: int
    population: Optional[int] = None
    sigma0: float = 0.3
    restarts: int = 0
    seed: int = 0
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        if self.population is not None and self.population < 2:
            raise ValueError("population must be at least 2")
        if not (0 < self.sigma0):
            raise ValueError("sigma0 must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


@dataclass(frozen=True)
class CmaResult:
    x_best: np.ndarray
    f_best: float
    evaluations: int


def _default_population(dim: int) -> int:
    return 4 + int(3 * math.log(dim))


class _Strategy:
    """One CMA-ES run in unit coordinates."""

    def __init__(self, dim: int, mean: np.ndarray, sigma: float, lam: int):
        self.dim = dim
        self.mean = mean.copy()
        self.sigma = float(sigma)
        self.lam = lam
        self.mu = lam // 2
        w = np.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)

        n, mueff = dim, self.mueff
        self.c_sigma = (mueff + 2.0) / (n + mueff + 5.0)
        self.d_sigma = (
            1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + self.c_sigma
        )
        self.c_c = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
        self.c_1 = 2.0 / ((n + 1.3) ** 2 + mueff)
        self.c_mu = min(
            1.0 - self.c_1,
            2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff),
        )
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

        self.cov = np.eye(dim)
        self.p_sigma = np.zeros(dim)
        self.p_c = np.zeros(dim)
        self.generation = 0
        self._decompose()

    def _decompose(self):
        cov = (self.cov + self.cov.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-30)
        self.eigvals = eigvals
        self.eigvecs = eigvecs
        self.d_scale = np.sqrt(eigvals)

    def ask(self, rng: np.random.Generator) -> np.ndarray:
        """Sample lam candidates inside [0, 1]^dim: resample an out-of-box
        candidate up to 10 times, then clip."""
        lam, dim = self.lam, self.dim
        z = rng.standard_normal((lam, dim))
        x = self.mean + self.sigma * (z * self.d_scale) @ self.eigvecs.T
        for _ in range(10):
            out = np.any((x < 0.0) | (x > 1.0), axis=1)
            if not out.any():
                break
            z = rng.standard_normal((int(out.sum()), dim))
            x[out] = self.mean + self.sigma * (z * self.d_scale) @ self.eigvecs.T
        return np.clip(x, 0.0, 1.0)

    def tell(self, x: np.ndarray, f: np.ndarray):
        """Update distribution from candidates ``x`` and values ``f``
        (maximization: larger is better)."""
        order = np.argsort(-f, kind="stable")[: self.mu]
        selected = x[order]
        old_mean = self.mean
        self.mean = self.weights @ selected

        step = (self.mean - old_mean) / self.sigma
        inv_sqrt = self.eigvecs @ ((self.eigvecs / self.d_scale).T)
        self.p_sigma = (1.0 - self.c_sigma) * self.p_sigma + math.sqrt(
            self.c_sigma * (2.0 - self.c_sigma) * self.mueff
        ) * (inv_sqrt @ step)

        self.generation += 1
        norm_ps = np.linalg.norm(self.p_sigma)
        h_sigma = norm_ps / math.sqrt(
            1.0 - (1.0 - self.c_sigma) ** (2.0 * self.generation)
        ) < (1.4 + 2.0 / (self.dim + 1.0)) * self.chi_n

        self.p_c = (1.0 - self.c_c) * self.p_c + h_sigma * math.sqrt(
            self.c_c * (2.0 - self.c_c) * self.mueff
        ) * step

        y = (selected - old_mean) / self.sigma
        rank_mu = (y.T * self.weights) @ y
        rank_one = np.outer(self.p_c, self.p_c)
        if not h_sigma:
            rank_one = rank_one + self.c_c * (2.0 - self.c_c) * self.cov
        self.cov = (
            (1.0 - self.c_1 - self.c_mu) * self.cov
            + self.c_1 * rank_one
            + self.c_mu * rank_mu
        )

        self.sigma *= math.exp(
            (self.c_sigma / self.d_sigma) * (norm_ps / self.chi_n - 1.0)
        )
        self._decompose()

    def should_stop(self) -> bool:
        if self.sigma * math.sqrt(self.eigvals.max()) < 1e-12:
            return True
        if self.eigvals.max() / self.eigvals.min() > 1e14:
            return True
        return False


def maximize(
    objective: Callable,
    box: SearchBox,
    cfg: CmaConfig,
    progress: Optional[Callable[[int, float], None]] = None,
    batch: bool = False,
) -> CmaResult:
    """Maximize ``objective`` over ``box``; returns the best point ever
    evaluated. Deterministic given ``cfg.seed``.

    ``objective`` maps a point to a float; with ``batch=True`` it receives an
    (lam, dim) array and must return (lam,) values. ``progress``, if given,
    is called once per generation with (generation index, best value so far).
    Raises NumericalError if the objective returns a non-finite value.
    """
    if not isinstance(box, SearchBox):
        box = SearchBox(np.asarray(box, dtype=float))
    dim = box.dim
    lam = cfg.population if cfg.population is not None else _default_population(dim)
    if cfg.max_evals < lam:
        raise ValueError(
            f"budget {cfg.max_evals} is below one population of {lam} evaluations"
        )

    rng = np.random.default_rng(cfg.seed)
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.shape != (dim,) or not box.contains(x0):
            raise ValueError("x0 must be a point inside the box")
        mean0 = np.clip(box.to_unit(x0), 0.0, 1.0)
    else:
        mean0 = rng.random(dim)

    best_x = None
    best_f = -math.inf
    evals = 0
    restarts_left = cfg.restarts
    generation_index = 0

    strategy = _Strategy(dim, mean0, cfg.sigma0, lam)
    run_best = -math.inf
    stall = 0

    while evals + strategy.lam <= cfg.max_evals:
        x_unit = strategy.ask(rng)
        x_raw = box.from_unit(x_unit)
        if batch:
            f = np.asarray(objective(x_raw), dtype=float)
        else:
            f = np.array([float(objective(p)) for p in x_raw])
        if f.shape != (strategy.lam,) or not np.all(np.isfinite(f)):
            bad = "shape mismatch" if f.shape != (strategy.lam,) else "non-finite value"
            raise NumericalError(f"objective returned {bad} at generation {generation_index}")
        evals += strategy.lam

        gen_best = int(np.argmax(f))
        if f[gen_best] > best_f:
            best_f = float(f[gen_best])
            best_x = x_raw[gen_best].copy()

        strategy.tell(x_unit, f)
        generation_index += 1
        if progress is not None:
            progress(generation_index, best_f)

        if f[gen_best] > run_best + 1e-12:
            stall = 0
        else:
            stall += 1
        run_best = max(run_best, float(f[gen_best]))

        if stall >= 20 or strategy.should_stop():
            if restarts_left <= 0:
                break
            restarts_left -= 1
            lam = 2 * strategy.lam
            if evals + lam > cfg.max_evals:
                break
            strategy = _Strategy(dim, rng.random(dim), cfg.sigma0, lam)
            run_best = -math.inf
            stall = 0

    return CmaResult(x_best=best_x, f_best=best_f, evaluations=evals)
