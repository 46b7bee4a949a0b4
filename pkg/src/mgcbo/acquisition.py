"""Acquisition policies: random, EI, GP-UCB, MES, GP-DC, GP-MGC.

The dependence-statistic policies score a candidate x by the association
between the max-value sample {F_m} (one maximum per posterior function draw)
and the candidate's sample {f_m(x)}; MES reuses the same {F_m}. All M draws of
a step share one feature map, so {f_m(x)} for every m comes from a single
feature evaluation. Sample maximizations are seeded from spawned child
streams and are order-independent, safe to fan out across workers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import depstats
from .cmaes import CmaConfig, CmaResult, maximize
from .errors import StateError, TooFewSamplesError
from .gp import GpPosterior, posterior_mean_var_batch, sample_posterior_function
from .kernels import FeatureMap, feature_matrix

__all__ = [
    "POLICIES",
    "MaxValueSamples",
    "AcquisitionState",
    "sample_maxima",
    "alpha_mgc",
    "alpha_dc",
    "alpha_ei",
    "alpha_ucb",
    "alpha_mes",
    "next_point",
]

logger = logging.getLogger(__name__)

POLICIES = ("random", "ei", "ucb", "mes", "gp-dc", "gp-mgc")

_NORM_PDF_C = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MaxValueSamples:
    """M posterior function draws with their maxima and maximizer points."""

    maxima: np.ndarray          # (M,) values F_m
    argmax_points: np.ndarray   # (M, dim), diagnostics
    samples: tuple              # PosteriorFunctionSample per m
    weight_matrix: np.ndarray   # (M, B) stacked theta rows, shared feature map
    feature_map: FeatureMap

    @property
    def m(self) -> int:
        return self.maxima.shape[0]

    def values_at(self, gp: GpPosterior, x: np.ndarray) -> np.ndarray:
        """f_m(x) for all m, in objective units."""
        return self.values_at_batch(gp, np.asarray(x, dtype=float)[None, :])[0]

    def values_at_batch(self, gp: GpPosterior, points: np.ndarray) -> np.ndarray:
        """(n, M) matrix of f_m at each point."""
        z = gp.data.box.to_unit(np.asarray(points, dtype=float))
        phi = feature_matrix(z, self.feature_map)
        return gp.y_shift + gp.y_scale * (phi @ self.weight_matrix.T)


@dataclass(frozen=True)
class AcquisitionState:
    """Everything a policy may consult when scoring a candidate."""

    gp: GpPosterior
    step: int
    y_best: Optional[float] = None
    feature_map: Optional[FeatureMap] = None
    max_samples: Optional[MaxValueSamples] = None


def sample_maxima(
    gp: GpPosterior,
    m: int,
    fm: FeatureMap,
    cma: CmaConfig,
    rng: np.random.Generator,
) -> MaxValueSamples:
    """Draw ``m`` posterior functions and maximize each over the box with
    CMA-ES. Per-sample randomness comes from spawned child streams, so the
    result does not depend on evaluation order."""
    if m < 1:
        raise ValueError("need at least one posterior sample")
    children = rng.spawn(m)
    samples = []
    maxima = np.empty(m)
    points = np.empty((m, gp.dim))
    for i, child in enumerate(children):
        draw = sample_posterior_function(gp, fm, child)
        seed = int(child.integers(2**63))
        cfg = CmaConfig(
            max_evals=cma.max_evals,
            population=cma.population,
            sigma0=cma.sigma0,
            restarts=cma.restarts,
            seed=seed,
        )
        res: CmaResult = maximize(draw.values, gp.data.box, cfg, batch=True)
        samples.append(draw)
        maxima[i] = res.f_best
        points[i] = res.x_best
    weight_matrix = np.stack([s.weights for s in samples])
    return MaxValueSamples(
        maxima=maxima,
        argmax_points=points,
        samples=tuple(samples),
        weight_matrix=weight_matrix,
        feature_map=fm,
    )


def _require_maxima(state: AcquisitionState, minimum: int = 1) -> MaxValueSamples:
    ms = state.max_samples
    if ms is None:
        raise StateError("this policy needs max-value samples in the state")
    if ms.m < minimum:
        raise TooFewSamplesError(f"policy needs at least {minimum} samples, got {ms.m}")
    return ms


def alpha_mgc(x, state: AcquisitionState) -> float:
    """MGC between the max-value sample and the candidate's posterior draws."""
    ms = _require_maxima(state, depstats.MIN_SAMPLES)
    values = ms.values_at(state.gp, x)
    side_u = depstats.prepare_mgc_side(ms.maxima)
    return depstats.mgc_from_sides(side_u, depstats.prepare_mgc_side(values)).statistic


def alpha_dc(x, state: AcquisitionState) -> float:
    """Distance correlation between the max-value sample and the candidate's
    posterior draws."""
    ms = _require_maxima(state, depstats.MIN_SAMPLES)
    values = ms.values_at(state.gp, x)
    return depstats.dc_from_sides(
        depstats.prepare_dc_side(ms.maxima), depstats.prepare_dc_side(values)
    )


def _ei_values(mean: np.ndarray, var: np.ndarray, y_best: float) -> np.ndarray:
    sigma = np.sqrt(var)
    out = np.maximum(mean - y_best, 0.0)  # sigma == 0 limit
    pos = sigma > 0.0
    if np.any(pos):
        gamma = (mean[pos] - y_best) / sigma[pos]
        pdf = _NORM_PDF_C * np.exp(-0.5 * gamma * gamma)
        out[pos] = sigma[pos] * (gamma * ndtr(gamma) + pdf)
    return np.maximum(out, 0.0)


def alpha_ei(x, state: AcquisitionState) -> float:
    """Expected improvement over the incumbent best observation."""
    if state.y_best is None or state.gp.n == 0:
        raise StateError("expected improvement needs at least one observation")
    mean, var = posterior_mean_var_batch(state.gp, np.asarray(x, dtype=float)[None, :])
    return float(_ei_values(mean, var, state.y_best)[0])


def ucb_beta(step: int, dim: int, delta: float = 0.1) -> float:
    """Confidence multiplier beta_t = 2 log(D t^2 pi^2 / (6 delta))."""
    t = max(step, 1)
    return max(2.0 * math.log(dim * t * t * math.pi**2 / (6.0 * delta)), 0.0)


def alpha_ucb(x, state: AcquisitionState, beta: Optional[float] = None) -> float:
    """Upper confidence bound mu + sqrt(beta_t) sigma."""
    if beta is None:
        beta = ucb_beta(state.step, state.gp.dim)
    mean, var = posterior_mean_var_batch(state.gp, np.asarray(x, dtype=float)[None, :])
    return float(mean[0] + math.sqrt(beta) * math.sqrt(var[0]))


def _mes_values(mean: np.ndarray, var: np.ndarray, maxima: np.ndarray) -> np.ndarray:
    sigma = np.sqrt(var)
    out = np.zeros(mean.shape[0])
    pos = sigma > 0.0
    if np.any(pos):
        gamma = (maxima[None, :] - mean[pos, None]) / sigma[pos, None]
        log_cdf = log_ndtr(gamma)
        log_pdf = -0.5 * gamma * gamma - math.log(math.sqrt(2.0 * math.pi))
        hazard = np.exp(log_pdf - log_cdf)
        terms = 0.5 * gamma * hazard - log_cdf
        out[pos] = np.maximum(terms, 0.0).mean(axis=1)
    return out


def alpha_mes(x, state: AcquisitionState) -> float:
    """Monte-Carlo max-value entropy search over the sampled maxima;
    0 where the posterior is deterministic."""
    ms = _require_maxima(state)
    mean, var = posterior_mean_var_batch(state.gp, np.asarray(x, dtype=float)[None, :])
    return float(_mes_values(mean, var, ms.maxima)[0])


class _TrackedObjective:
    """Batch acquisition evaluator that remembers the value range it saw."""

    def __init__(self, fn):
        self.fn = fn
        self.lo = math.inf
        self.hi = -math.inf

    def __call__(self, points: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.fn(points), dtype=float)
        self.lo = min(self.lo, float(vals.min()))
        self.hi = max(self.hi, float(vals.max()))
        return vals


def _batch_alpha(policy: str, state: AcquisitionState):
    """Vectorized acquisition for the inner optimizer."""
    if policy == "ei":
        if state.y_best is None or state.gp.n == 0:
            raise StateError("expected improvement needs at least one observation")
        y_best = state.y_best

        def ei(points):
            mean, var = posterior_mean_var_batch(state.gp, points)
            return _ei_values(mean, var, y_best)

        return ei
    if policy == "ucb":
        beta = ucb_beta(state.step, state.gp.dim)

        def ucb(points):
            mean, var = posterior_mean_var_batch(state.gp, points)
            return mean + math.sqrt(beta) * np.sqrt(var)

        return ucb
    if policy == "mes":
        ms = _require_maxima(state)

        def mes(points):
            mean, var = posterior_mean_var_batch(state.gp, points)
            return _mes_values(mean, var, ms.maxima)

        return mes
    if policy == "gp-dc":
        ms = _require_maxima(state, depstats.MIN_SAMPLES)
        side_u = depstats.prepare_dc_side(ms.maxima)

        def dc(points):
            values = ms.values_at_batch(state.gp, points)
            return np.array(
                [depstats.dc_from_sides(side_u, depstats.prepare_dc_side(v)) for v in values]
            )

        return dc
    if policy == "gp-mgc":
        ms = _require_maxima(state, depstats.MIN_SAMPLES)
        side_u = depstats.prepare_mgc_side(ms.maxima)

        def mgc(points):
            values = ms.values_at_batch(state.gp, points)
            return np.array(
                [
                    depstats.mgc_from_sides(side_u, depstats.prepare_mgc_side(v)).statistic
                    for v in values
                ]
            )

        return mgc
    raise ValueError(f"unknown policy {policy!r}; known: {POLICIES}")


def next_point(
    policy: str,
    state: AcquisitionState,
    cma: CmaConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Choose the next query point: a uniform draw for the random policy,
    otherwise the CMA-ES argmax of the policy's acquisition. Falls back to a
    uniform draw (with a warning) when the acquisition landscape is constant."""
    box = state.gp.data.box
    if policy == "random":
        return box.sample_uniform(rng)

    tracked = _TrackedObjective(_batch_alpha(policy, state))
    cfg = CmaConfig(
        max_evals=cma.max_evals,
        population=cma.population,
        sigma0=cma.sigma0,
        restarts=cma.restarts,
        seed=int(rng.integers(2**63)),
    )
    result = maximize(tracked, box, cfg, batch=True)
    if tracked.hi - tracked.lo == 0.0:
        logger.warning(
            "acquisition %s is constant (value %g); falling back to a random point",
            policy,
            tracked.hi,
        )
        return box.sample_uniform(rng)
    return result.x_best
