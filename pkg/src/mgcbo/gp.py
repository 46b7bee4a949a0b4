"""Exact GP regression, marginal-likelihood fitting, and posterior function draws.

Internally the model lives on normalized coordinates: inputs are mapped to the
unit cube through the dataset box, targets are centered by their mean and
scaled by their standard deviation. Hyperparameters refer to these normalized
units; predictions are mapped back to objective units. The Gram diagonal
always carries a jitter of 1e-10 * amplitude, escalated tenfold on
factorization failure up to 1e-4 * amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .cmaes import CmaConfig, SearchBox, maximize
from .errors import NumericalError
from .kernels import FeatureMap, KernelParams, feature_matrix, feature_vector, matern52

__all__ = [
    "Dataset",
    "GpHyperParams",
    "GpPosterior",
    "PosteriorFunctionSample",
    "HyperBounds",
    "posterior_mean_var",
    "posterior_mean_var_batch",
    "log_marginal_likelihood",
    "fit_hyperparams",
    "sample_posterior_function",
]

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class Dataset:
    """Ordered observations inside a search box."""

    points: np.ndarray
    values: np.ndarray
    box: SearchBox

    def __post_init__(self):
        box = self.box if isinstance(self.box, SearchBox) else SearchBox(self.box)
        pts = np.asarray(self.points, dtype=float).reshape(-1, box.dim)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if pts.shape[0] != vals.shape[0]:
            raise ValueError("points and values must have equal length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        tol = 1e-9 * np.max(box.span)
        if pts.size and not (
            np.all(pts >= box.lower - tol) and np.all(pts <= box.upper + tol)
        ):
            raise ValueError("all points must lie inside the box")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "box", box)

    @classmethod
    def empty(cls, box: SearchBox) -> "Dataset":
        box = box if isinstance(box, SearchBox) else SearchBox(box)
        return cls(np.empty((0, box.dim)), np.empty(0), box)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.box.dim

    def append(self, x, y: float) -> "Dataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return Dataset(
            np.vstack([self.points, x]),
            np.append(self.values, float(y)),
            self.box,
        )


@dataclass(frozen=True)
class GpHyperParams:
    """Kernel hyperparameters plus observation-noise variance, in normalized
    units (unit-cube inputs, standardized targets)."""

    kernel: KernelParams
    noise: float

    def __post_init__(self):
        if not (np.isfinite(self.noise) and self.noise >= 0):
            raise ValueError(f"noise variance must be nonnegative, got {self.noise}")


def _output_transform(values: np.ndarray) -> Tuple[float, float]:
    if values.size == 0:
        return 0.0, 1.0
    shift = float(np.mean(values))
    scale = float(np.std(values))
    return shift, (scale if scale > 0 else 1.0)


def _unit_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class GpPosterior:
    """Immutable fitted posterior: normalized data plus the Cholesky factor of
    K + noise_eff * I, where noise_eff folds the stabilizing jitter."""

    data: Dataset
    params: GpHyperParams
    unit_points: np.ndarray
    w: np.ndarray
    y_shift: float
    y_scale: float
    chol: Optional[np.ndarray]
    alpha: Optional[np.ndarray]
    noise_eff: float

    @classmethod
    def from_data(cls, data: Dataset, params: GpHyperParams) -> "GpPosterior":
        z = data.box.to_unit(data.points) if data.n else np.empty((0, data.dim))
        y_shift, y_scale = _output_transform(data.values)
        w = (data.values - y_shift) / y_scale
        amp = params.kernel.amplitude
        if data.n == 0:
            return cls(data, params, z, w, y_shift, y_scale, None, None,
                       params.noise + JITTER_START * amp)

        gram = amp * matern52(_unit_distances(z, z), params.kernel.lengthscale)
        jitter = JITTER_START
        chol = None
        while jitter <= JITTER_MAX:
            noise_eff = params.noise + jitter * amp
            try:
                chol = np.linalg.cholesky(gram + noise_eff * np.eye(data.n))
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
        if chol is None:
            cond = np.linalg.cond(gram + (params.noise + JITTER_MAX * amp) * np.eye(data.n))
            raise NumericalError(
                f"Gram factorization failed for n={data.n} even at jitter "
                f"{JITTER_MAX:g}*C (condition number ~{cond:.3e})"
            )
        alpha = cho_solve((chol, True), w)
        return cls(data, params, z, w, y_shift, y_scale, chol, alpha, noise_eff)

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def dim(self) -> int:
        return self.data.dim


def posterior_mean_var_batch(gp: GpPosterior, points) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at many points, in objective units."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != gp.dim:
        raise ValueError(f"points must be (m, {gp.dim}), got {pts.shape}")
    amp = gp.params.kernel.amplitude
    if gp.n == 0:
        m = np.full(pts.shape[0], gp.y_shift)
        v = np.full(pts.shape[0], amp * gp.y_scale**2)
        return m, v
    z = gp.data.box.to_unit(pts)
    k_star = amp * matern52(_unit_distances(z, gp.unit_points), gp.params.kernel.lengthscale)
    mean_w = k_star @ gp.alpha
    v = solve_triangular(gp.chol, k_star.T, lower=True)
    var_w = np.maximum(amp - np.sum(v * v, axis=0), 0.0)
    return gp.y_shift + gp.y_scale * mean_w, gp.y_scale**2 * var_w


def posterior_mean_var(gp: GpPosterior, x) -> Tuple[float, float]:
    """Posterior mean and variance at a single point, in objective units."""
    x = np.asarray(x, dtype=float)
    if x.shape != (gp.dim,):
        raise ValueError(f"point must have dimension {gp.dim}, got shape {x.shape}")
    m, v = posterior_mean_var_batch(gp, x[None, :])
    return float(m[0]), float(v[0])


def log_marginal_likelihood(data: Dataset, params: GpHyperParams) -> float:
    """Log marginal likelihood of the standardized targets:
    -1/2 w^T (K + s^2 I)^-1 w - 1/2 log det(K + s^2 I) - n/2 log(2 pi)."""
    if data.n == 0:
        raise ValueError("log marginal likelihood needs a nonempty dataset")
    gp = GpPosterior.from_data(data, params)
    log_det = 2.0 * float(np.sum(np.log(np.diag(gp.chol))))
    return float(
        -0.5 * gp.w @ gp.alpha - 0.5 * log_det - 0.5 * data.n * math.log(2.0 * math.pi)
    )


@dataclass(frozen=True)
class HyperBounds:
    """Search ranges for (lengthscale, amplitude, noise), normalized units."""

    lengthscale: Tuple[float, float]
    amplitude: Tuple[float, float]
    noise: Tuple[float, float]

    @classmethod
    def default(cls, dim: int) -> "HyperBounds":
        diag = math.sqrt(dim)
        return cls(
            lengthscale=(1e-2 * diag, 10.0 * diag),
            amplitude=(1e-2, 1e2),
            noise=(1e-8, 1e-2),
        )


def fit_hyperparams(
    data: Dataset,
    bounds: Optional[HyperBounds] = None,
    rng: Optional[np.random.Generator] = None,
    incumbent: Optional[GpHyperParams] = None,
    budget: int = 300,
) -> GpHyperParams:
    """Maximize the log marginal likelihood over log-space bounds with CMA-ES,
    warm-started at the incumbent. Never returns parameters with a lower
    likelihood than the incumbent."""
    if data.n == 0:
        raise ValueError("cannot fit hyperparameters to an empty dataset")
    if data.n < 2:
        raise ValueError("hyperparameter fitting needs at least 2 observations")
    if bounds is None:
        bounds = HyperBounds.default(data.dim)
    if rng is None:
        rng = np.random.default_rng(0)

    log_box = SearchBox(
        np.log([list(bounds.lengthscale), list(bounds.amplitude), list(bounds.noise)])
    )

    def params_at(v) -> GpHyperParams:
        ell, amp, noise = np.exp(v)
        return GpHyperParams(kernel=KernelParams(ell, amp), noise=noise)

    def objective(v) -> float:
        try:
            return log_marginal_likelihood(data, params_at(v))
        except NumericalError:
            return -1e15

    x0 = None
    if incumbent is not None:
        raw = np.log([
            incumbent.kernel.lengthscale,
            incumbent.kernel.amplitude,
            max(incumbent.noise, bounds.noise[0]),
        ])
        x0 = np.clip(raw, log_box.lower, log_box.upper)

    cfg = CmaConfig(max_evals=budget, seed=int(rng.integers(2**63)), x0=x0)
    result = maximize(objective, log_box, cfg)
    best = params_at(result.x_best)
    if incumbent is not None:
        try:
            if log_marginal_likelihood(data, incumbent) > result.f_best:
                return incumbent
        except NumericalError:
            pass
    return best


@dataclass(frozen=True)
class PosteriorFunctionSample:
    """A function drawn from the posterior: value(x) = theta . phi(z(x)),
    mapped back to objective units. The amplitude is folded into theta."""

    weights: np.ndarray
    feature_map: FeatureMap
    amplitude: float
    box: SearchBox
    y_shift: float
    y_scale: float

    def value(self, x) -> float:
        z = self.box.to_unit(np.asarray(x, dtype=float))
        return self.y_shift + self.y_scale * float(self.weights @ feature_vector(z, self.feature_map))

    def values(self, points) -> np.ndarray:
        z = self.box.to_unit(np.asarray(points, dtype=float))
        return self.y_shift + self.y_scale * (feature_matrix(z, self.feature_map) @ self.weights)


def sample_posterior_function(
    gp: GpPosterior, fm: FeatureMap, rng: np.random.Generator
) -> PosteriorFunctionSample:
    """Draw theta from its Gaussian posterior using the n-by-n inner inverse
    (C Phi^T Phi + noise_eff I)^-1; for an empty dataset theta ~ N(0, C I)."""
    if fm.dim != gp.dim:
        raise ValueError(f"feature map dimension {fm.dim} != dataset dimension {gp.dim}")
    amp = gp.params.kernel.amplitude
    sqrt_amp = math.sqrt(amp)
    eps = rng.standard_normal(fm.count)
    if gp.n == 0:
        theta = sqrt_amp * eps
    else:
        phi = feature_matrix(gp.unit_points, fm).T  # (B, n)
        u, s, vt = np.linalg.svd(phi, full_matrices=False)
        denom = amp * s * s + gp.noise_eff
        if not np.all(denom > 0):
            raise NumericalError("theta-posterior covariance is not positive definite")
        mean_theta = amp * u @ (s * (vt @ gp.w) / denom)
        shrink = np.sqrt(gp.noise_eff / denom) - 1.0
        theta = mean_theta + sqrt_amp * (eps + u @ (shrink * (u.T @ eps)))
    return PosteriorFunctionSample(
        weights=theta,
        feature_map=fm,
        amplitude=amp,
        box=gp.data.box,
        y_shift=gp.y_shift,
        y_scale=gp.y_scale,
    )
