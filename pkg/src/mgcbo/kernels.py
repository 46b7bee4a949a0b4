"""Matern-5/2 kernel, its spectral density, and random cosine feature maps.

The feature map approximates the unit-amplitude kernel: for frequencies s_i
drawn from the spectral density and phases b_i uniform on [0, 1),

    k_{5/2}(x, y) ~= phi(x) . phi(y),   phi_i(x) = sqrt(2/B) cos(2 pi (s_i.x + b_i)).

Feature maps are amplitude-free; the signal amplitude C multiplies the kernel
(and scales sampled weights) downstream, so a refit of C can reuse frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelParams",
    "FeatureMap",
    "matern52",
    "spectral_density",
    "sample_feature_map",
    "feature_vector",
    "feature_matrix",
    "approx_kernel",
]

_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class KernelParams:
    """Matern-5/2 hyperparameters: lengthscale (input units) and amplitude
    (squared output units)."""

    lengthscale: float
    amplitude: float

    def __post_init__(self):
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (np.isfinite(self.amplitude) and self.amplitude > 0):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")


@dataclass(frozen=True)
class FeatureMap:
    """A draw of ``count`` random cosine features in ``dim`` input dimensions.

    frequencies: (count, dim) array, cycles per input unit.
    phases: (count,) array in [0, 1).
    """

    frequencies: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        phases = np.asarray(self.phases, dtype=float)
        if freqs.ndim != 2 or freqs.shape[0] < 1:
            raise ValueError("frequencies must be a (count, dim) array with count >= 1")
        if phases.shape != (freqs.shape[0],):
            raise ValueError("phases must have one entry per frequency row")
        if not np.all(np.isfinite(freqs)):
            raise ValueError("frequencies must be finite")
        if np.any(phases < 0.0) or np.any(phases >= 1.0):
            raise ValueError("phases must lie in [0, 1)")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "phases", phases)

    @property
    def count(self) -> int:
        return self.frequencies.shape[0]

    @property
    def dim(self) -> int:
        return self.frequencies.shape[1]


def matern52(r, lengthscale):
    """Unit-amplitude Matern-5/2 correlation at distance ``r``.

    (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) * exp(-sqrt(5) r / l); 1 at r = 0,
    strictly decreasing in r. Accepts scalars or arrays of distances.
    """
    if not (np.isfinite(lengthscale) and lengthscale > 0):
        raise ValueError(f"lengthscale must be positive, got {lengthscale}")
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise ValueError("distances must be finite and nonnegative")
    t = (_SQRT5 / lengthscale) * r
    out = (1.0 + t + t * t / 3.0) * np.exp(-t)
    return float(out) if out.ndim == 0 else out


def spectral_density(s, lengthscale, dim):
    """Spectral density of the Matern-5/2 kernel at radial frequency ``s``
    (cycles per input unit) in ``dim`` dimensions.

    Normalized to integrate to 1 over R^dim; the kernel is its Fourier
    transform under e^{2 pi i s.r} convention.
    """
    if not (np.isfinite(lengthscale) and lengthscale > 0):
        raise ValueError(f"lengthscale must be positive, got {lengthscale}")
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim}")
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ValueError("frequencies must be finite and nonnegative")
    d = int(dim)
    const = (
        math.gamma((d + 5) / 2.0)
        * 5.0**2.5
        * math.pi ** (-(d + 11) / 2.0)
        / (24.0 * lengthscale**5)
    )
    out = const * (s * s + 5.0 / (4.0 * math.pi**2 * lengthscale**2)) ** (-(d + 5) / 2.0)
    return float(out) if out.ndim == 0 else out


def sample_feature_map(lengthscale, dim, count, rng: np.random.Generator) -> FeatureMap:
    """Draw ``count`` (frequency, phase) pairs for a Matern-5/2 feature map.

    Frequencies use the multivariate-Student-t representation of the spectral
    density: s = z * sqrt(5/u) / (2 pi l) with z standard normal in R^dim and
    u chi-squared with 5 degrees of freedom. Exact and rejection-free in any
    dimension. Phases are uniform on [0, 1). Deterministic given ``rng``.
    """
    if not (np.isfinite(lengthscale) and lengthscale > 0):
        raise ValueError(f"lengthscale must be positive, got {lengthscale}")
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim}")
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    count, dim = int(count), int(dim)
    z = rng.standard_normal((count, dim))
    u = rng.chisquare(5.0, size=count)
    freqs = z * np.sqrt(5.0 / u)[:, None] / (2.0 * math.pi * lengthscale)
    phases = rng.random(count)
    return FeatureMap(frequencies=freqs, phases=phases)


def feature_vector(x, fm: FeatureMap) -> np.ndarray:
    """phi(x): length-``fm.count`` vector, each entry bounded by sqrt(2/B)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fm.dim,):
        raise ValueError(f"point has shape {x.shape}, feature map expects ({fm.dim},)")
    arg = fm.frequencies @ x + fm.phases
    return math.sqrt(2.0 / fm.count) * np.cos(2.0 * math.pi * arg)


def feature_matrix(points, fm: FeatureMap) -> np.ndarray:
    """phi over many points at once: (n, dim) -> (n, count)."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != fm.dim:
        raise ValueError(f"points must be (n, {fm.dim}), got {points.shape}")
    arg = points @ fm.frequencies.T + fm.phases[None, :]
    return math.sqrt(2.0 / fm.count) * np.cos(2.0 * math.pi * arg)


def approx_kernel(x, y, fm: FeatureMap) -> float:
    """phi(x) . phi(y): the feature-space approximation of matern52(|x-y|)."""
    return float(feature_vector(x, fm) @ feature_vector(y, fm))
