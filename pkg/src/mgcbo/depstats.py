"""Distance correlation and multiscale graph correlation for paired scalars.

Distance correlation is the biased (V-statistic) form: both distance matrices
are double-centered by row, column, and grand means; the statistic is
dCov / sqrt(dVar_u * dVar_v), with 0 returned when either variance vanishes.

The local correlation map restricts the centered-distance product sums to
k-nearest-neighbor pairs on the u side and l-nearest on the v side, for every
scale (k, l) in {1..M}^2. Centering subtracts per-column means of the raw
distances (denominator M - 1) and zeroes the diagonal; neighbor ranks are
ordinal with ties broken by sample index, so the map is always M x M and
deterministic under duplicated values. The MGC statistic is the smoothed
maximum of this map: entries above a beta-approximation null quantile at level
1 - 0.02/M (floored at the global-scale entry) are grouped into 4-connected
components, and the maximum of the largest component is returned when that
component covers at least 2M scales, otherwise the global-scale entry.

The two-sided ``prepare_*`` helpers cache the u-side work so acquisition
optimizers can score thousands of candidate v-vectors against fixed u.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.stats import beta as beta_dist

from .errors import TooFewSamplesError

__all__ = [
    "PairedSamples",
    "LocalCorrMap",
    "DependenceResult",
    "pairwise_distances",
    "distance_correlation",
    "local_correlation_map",
    "mgc_statistic",
    "DcSide",
    "MgcSide",
    "prepare_dc_side",
    "prepare_mgc_side",
    "dc_from_sides",
    "mgc_from_sides",
]

MIN_SAMPLES = 4


@dataclass(frozen=True)
class PairedSamples:
    """Two equal-length scalar samples (u_m, v_m), m = 1..M, with M >= 4."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if u.shape != v.shape:
            raise ValueError("u and v must have equal length")
        if u.size < MIN_SAMPLES:
            raise TooFewSamplesError(
                f"dependence statistics need at least {MIN_SAMPLES} samples, got {u.size}"
            )
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def m(self) -> int:
        return self.u.size


@dataclass(frozen=True)
class LocalCorrMap:
    """M x M grid of local correlations; entry [k-1, l-1] is scale (k, l)."""

    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def global_stat(self) -> float:
        return float(self.values[-1, -1])


@dataclass(frozen=True)
class DependenceResult:
    statistic: float
    scale: Optional[Tuple[int, int]] = None


def pairwise_distances(samples) -> np.ndarray:
    """Absolute-difference distance matrix of a scalar sample."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return np.abs(x[:, None] - x[None, :])


# ---------------------------------------------------------------------------
# distance correlation (biased / V-statistic)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DcSide:
    centered: np.ndarray
    var2: float  # squared distance variance, mean(centered**2)


def prepare_dc_side(samples) -> DcSide:
    d = pairwise_distances(samples)
    c = d - d.mean(axis=0)[None, :] - d.mean(axis=1)[:, None] + d.mean()
    return DcSide(centered=c, var2=float(np.mean(c * c)))


def dc_from_sides(su: DcSide, sv: DcSide) -> float:
    if su.var2 <= 0.0 or sv.var2 <= 0.0:
        return 0.0
    dcov2 = float(np.mean(su.centered * sv.centered))
    return float(np.sqrt(max(dcov2, 0.0)) / (su.var2 * sv.var2) ** 0.25)


def distance_correlation(p: PairedSamples) -> DependenceResult:
    """Biased distance correlation of the pair; in [0, 1], 0 under degenerate
    variance on either side."""
    return DependenceResult(dc_from_sides(prepare_dc_side(p.u), prepare_dc_side(p.v)))


# ---------------------------------------------------------------------------
# local correlation map and MGC
# ---------------------------------------------------------------------------

def _row_ranks(dist: np.ndarray) -> np.ndarray:
    """Ordinal 1-based nearest-neighbor ranks within each row; ties broken by
    column index (stable sort)."""
    m = dist.shape[0]
    order = np.argsort(dist, axis=1, kind="stable")
    ranks = np.empty((m, m), dtype=np.intp)
    rows = np.arange(m)[:, None]
    ranks[rows, order] = np.arange(1, m + 1)[None, :]
    return ranks


def _center_columns(dist: np.ndarray) -> np.ndarray:
    """Subtract per-column off-diagonal means (denominator M - 1), zero the
    diagonal."""
    m = dist.shape[0]
    cent = dist - dist.sum(axis=0)[None, :] / (m - 1)
    np.fill_diagonal(cent, 0.0)
    return cent


def _restricted_cross(x, y, kidx0, lidx0) -> np.ndarray:
    """Cumulative restricted covariance grid: entry (k-1, l-1) equals
    sum_{pairs with ranks <= (k, l)} x*y minus the product of the restricted
    sums over M^2."""
    m = x.shape[0]
    flat = (kidx0 * m + lidx0).ravel()
    cov = np.bincount(flat, weights=(x * y).ravel(), minlength=m * m).reshape(m, m)
    ex = np.bincount(kidx0.ravel(), weights=x.ravel(), minlength=m)
    ey = np.bincount(lidx0.ravel(), weights=y.ravel(), minlength=m)
    cov = np.cumsum(np.cumsum(cov, axis=0), axis=1)
    return cov - np.outer(np.cumsum(ex), np.cumsum(ey)) / (m * m)


@dataclass(frozen=True)
class MgcSide:
    """Cached one-sided ingredients of the local correlation map."""

    cent: np.ndarray       # column-centered distances
    ranks0: np.ndarray     # 0-based column ranks (= transposed row ranks)
    local_var: np.ndarray  # restricted variance per scale, length M


def prepare_mgc_side(samples) -> MgcSide:
    d = pairwise_distances(samples)
    cent = _center_columns(d)
    ranks0 = _row_ranks(d).T - 1
    var = np.diagonal(_restricted_cross(cent, cent.T, ranks0, ranks0.T)).copy()
    return MgcSide(cent=cent, ranks0=ranks0, local_var=var)


def _map_from_sides(su: MgcSide, sv: MgcSide) -> np.ndarray:
    cov = _restricted_cross(su.cent, sv.cent.T, su.ranks0, sv.ranks0.T)
    denom = np.sqrt(
        np.outer(np.maximum(su.local_var, 0.0), np.maximum(sv.local_var, 0.0))
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0.0, cov / denom, 0.0)
    corr[su.local_var <= 0.0, :] = 0.0
    corr[:, sv.local_var <= 0.0] = 0.0
    return np.clip(corr, -1.0, 1.0)


def local_correlation_map(p: PairedSamples) -> LocalCorrMap:
    """All local correlations c^{kl}, k, l in {1..M}."""
    return LocalCorrMap(_map_from_sides(prepare_mgc_side(p.u), prepare_mgc_side(p.v)))


@lru_cache(maxsize=None)
def _beta_threshold(m: int) -> float:
    """Null quantile for significant local correlations at level 1 - 0.02/M,
    via the beta approximation of the null map distribution."""
    level = 1.0 - 0.02 / m
    shape = m * (m - 3) / 4.0 - 0.5
    return float(2.0 * beta_dist.ppf(level, shape, shape) - 1.0)


def _smoothed_maximum(corr: np.ndarray) -> Tuple[float, Tuple[int, int]]:
    m = corr.shape[0]
    stat = float(corr[-1, -1])
    scale = (m, m)
    threshold = max(_beta_threshold(m), stat)
    mask = corr > threshold
    if not mask.any():
        return stat, scale
    labels, _ = ndimage.label(mask)  # default structure: 4-connectivity
    counts = np.bincount(labels.ravel())[1:]
    component = labels == (int(np.argmax(counts)) + 1)
    if int(component.sum()) < 2 * m:
        return stat, scale
    best = float(corr[component].max())
    k_idx, l_idx = np.where((corr >= best) & component)
    pick = int(np.max(k_idx * m + l_idx))
    return best, (pick // m + 1, pick % m + 1)


def mgc_from_sides(su: MgcSide, sv: MgcSide) -> DependenceResult:
    stat, scale = _smoothed_maximum(_map_from_sides(su, sv))
    return DependenceResult(statistic=stat, scale=scale)


def mgc_statistic(p: PairedSamples) -> DependenceResult:
    """Smoothed maximum of the local correlation map; never below the
    global-scale entry."""
    return mgc_from_sides(prepare_mgc_side(p.u), prepare_mgc_side(p.v))
