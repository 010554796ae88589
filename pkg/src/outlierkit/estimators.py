"""Equivariant location/scale estimation.

The robust pair is the empirical median together with the Qn scale
estimate ``d * W_(k)``, where W are the n(n-1)/2 pairwise absolute
differences, ``k = C(h, 2)`` with ``h = floor(n/2) + 1`` (roughly a
quarter of the pairs) and ``d`` is the family constant making Qn
consistent for the scale.  The location estimate corrects the median by
``sigma_hat * F0^-1(1/2)`` so it also works for skewed baselines.

The classical mean / standard deviation pair is provided for the methods
that are defined through it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DataError, DegenerateSampleError
from .families import Family, get_family

__all__ = ["RobustFit", "median", "qn_scale", "robust_fit", "mean_sd_fit", "z_scores"]

MED_QN = "med_qn"
MEAN_SD = "mean_sd"


@dataclass(frozen=True)
class RobustFit:
    """Equivariant location and scale estimates."""

    mu_hat: float
    sigma_hat: float
    method: str = MED_QN


def median(x) -> float:
    """Order statistic median; midpoint of the central pair for even n."""
    xa = np.asarray(x, dtype=float)
    if xa.size == 0:
        raise DataError("median of an empty sample")
    return float(np.median(xa))


@lru_cache(maxsize=128)
def _pair_indices(n: int):
    return np.triu_indices(n, k=1)


def _qn_order_index(n: int) -> int:
    # classical choice: k = C(h, 2) with h = floor(n/2) + 1, which is about a
    # quarter of the n(n-1)/2 pairs; this is the convention the reference
    # z-score tables were produced with
    h = n // 2 + 1
    return max(1, h * (h - 1) // 2)


# above this size the k-th pairwise difference is found by value bisection
# instead of materializing all n(n-1)/2 pairs; both paths are exact
_QN_BISECT_THRESHOLD = 256


def _kth_pair_difference_brute(xa: np.ndarray, k: int) -> float:
    n = xa.size
    i, j = _pair_indices(n)
    w = np.abs(xa[i] - xa[j])
    return float(np.partition(w, k - 1)[k - 1])


def _kth_pair_difference_bisect(xa: np.ndarray, k: int) -> float:
    """Exact k-th smallest pairwise difference via value bisection.

    Counts pairs below a trial value with searchsorted, narrows the bracket
    until few candidate differences remain, then selects among the exact
    pair differences, so the result is bit-identical to enumeration.
    """
    xs = np.sort(xa)
    n = xs.size
    positions = np.arange(1, n + 1)

    def count_at_most(t: float) -> int:
        # clamp at the diagonal so negative trial values cannot push the
        # per-row contribution below zero
        idx = np.maximum(np.searchsorted(xs, xs + t, side="right"), positions)
        return int((idx - positions).sum())

    lo, hi = -1.0, float(xs[-1] - xs[0])
    limit = max(8 * n, 65_536)
    c_lo, c_hi = 0, count_at_most(hi)
    while c_hi - c_lo > limit:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        c_mid = count_at_most(mid)
        if c_mid >= k:
            hi, c_hi = mid, c_mid
        else:
            lo, c_lo = mid, c_mid
    starts = np.searchsorted(xs, xs + lo, side="right")
    stops = np.searchsorted(xs, xs + hi, side="right")
    starts = np.maximum(starts, positions)
    stops = np.maximum(stops, starts)
    candidates = np.concatenate(
        [xs[a:b] - xs[i] for i, (a, b) in enumerate(zip(starts, stops)) if b > a]
    )
    rank = k - c_lo
    return float(np.partition(candidates, rank - 1)[rank - 1])


def qn_scale(x, family: str | Family) -> float:
    """Qn scale estimate d * W_(k) of the sample."""
    fam = get_family(family)
    xa = np.asarray(x, dtype=float)
    n = xa.size
    if n < 2:
        raise DataError("qn_scale needs at least two observations")
    k = _qn_order_index(n)
    if n <= _QN_BISECT_THRESHOLD:
        w_k = _kth_pair_difference_brute(xa, k)
    else:
        w_k = _kth_pair_difference_bisect(xa, k)
    if w_k == 0.0:
        raise DegenerateSampleError("pairwise differences carry no scale (too many ties)")
    return fam.qn_constant * w_k


def robust_fit(x, family: str | Family) -> RobustFit:
    """Median/Qn fit; mu_hat = MED - sigma_hat * F0^-1(1/2)."""
    fam = get_family(family)
    sigma = qn_scale(x, fam)
    mu = median(x) - sigma * fam.quantile(0.5)
    return RobustFit(mu_hat=float(mu), sigma_hat=float(sigma), method=MED_QN)


def mean_sd_fit(x) -> RobustFit:
    """Arithmetic mean and n-1 divisor standard deviation."""
    xa = np.asarray(x, dtype=float)
    if xa.size < 2:
        raise DataError("mean_sd_fit needs at least two observations")
    sd = float(np.std(xa, ddof=1))
    if sd == 0.0:
        raise DegenerateSampleError("sample standard deviation is zero")
    return RobustFit(mu_hat=float(np.mean(xa)), sigma_hat=sd, method=MEAN_SD)


def z_scores(x, fit: RobustFit) -> np.ndarray:
    """Standardized observations (x - mu_hat) / sigma_hat in input order."""
    if fit.sigma_hat <= 0.0:
        raise DegenerateSampleError("fit has nonpositive scale")
    return (np.asarray(x, dtype=float) - fit.mu_hat) / fit.sigma_hat


def _batch_robust_fit(X: np.ndarray, family: str | Family) -> tuple[np.ndarray, np.ndarray]:
    """Median/Qn fits for a (replicates, n) matrix of samples.

    Small n is handled with one vectorized pair enumeration (memory scales
    with replicates * n^2 / 2, callers chunk accordingly); large n runs the
    bisection selection per row.
    """
    fam = get_family(family)
    R, n = X.shape
    k = _qn_order_index(n)
    if n <= _QN_BISECT_THRESHOLD:
        i, j = _pair_indices(n)
        w = np.abs(X[:, i] - X[:, j])
        w_k = np.partition(w, k - 1, axis=1)[:, k - 1]
    else:
        w_k = np.fromiter(
            (_kth_pair_difference_bisect(X[row], k) for row in range(R)),
            dtype=float,
            count=R,
        )
    if np.any(w_k == 0.0):
        raise DegenerateSampleError("degenerate replicate encountered in batch fit")
    sigma = fam.qn_constant * w_k
    mu = np.median(X, axis=1) - sigma * fam.quantile(0.5)
    return mu, sigma


def _batch_mean_sd_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sd = np.std(X, axis=1, ddof=1)
    if np.any(sd == 0.0):
        raise DegenerateSampleError("degenerate replicate encountered in batch fit")
    return np.mean(X, axis=1), sd
