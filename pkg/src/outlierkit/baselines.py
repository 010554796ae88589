"""Comparator outlier identification methods.

Four classical procedures used as benchmarks:

* a generalized Davies-Gather test: simulated critical values of the
  extreme z-scores under the null, with either robust (median/Qn) or
  classical (mean/sd) estimation, in all four side variants,
* Rosner's sequential studentized-extreme test with the printed
  large-sample approximation of its critical values,
* Bolshev's test built on Thompson's distribution of the studentized
  residual,
* Hawkins' test based on scaled partial sums of the largest residuals.

Critical values of the Bolshev and Hawkins statistics have no usable
closed form and are simulated under the null.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from .errors import ConfigError, DomainError, MissingCriticalValueError
from .estimators import (
    MEAN_SD,
    MED_QN,
    _batch_mean_sd_fit,
    _batch_robust_fit,
    mean_sd_fit,
    robust_fit,
    z_scores,
)
from .families import Family, get_family
from .report import NO_OUTLIERS, OUTLIERS_FOUND, OutlierReport

__all__ = [
    "DgThresholds",
    "RosnerConfig",
    "dg_thresholds",
    "dg_classify",
    "rosner_lambdas",
    "rosner_simulated_lambdas",
    "rosner_classify",
    "thompson_cdf",
    "bolshev_classify",
    "hawkins_classify",
    "simulate_baseline_critical",
]

RNG_NAME = "philox4x64"
DEFAULT_REPLICATES = 100_000


def _resolve_estimator(estimator: str) -> str:
    key = estimator.strip().lower()
    if key in ("robust", MED_QN):
        return MED_QN
    if key in ("ml", MEAN_SD):
        return MEAN_SD
    raise ConfigError(f"unknown estimator {estimator!r}; use 'robust' or 'ml'")


def _fit(x, family, estimator: str):
    if estimator == MED_QN:
        return robust_fit(x, family)
    return mean_sd_fit(x)


# ---------------------------------------------------------------------------
# generalized Davies-Gather
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DgThresholds:
    """Simulated critical values of the extreme z-scores under the null.

    ``g_n_alpha`` bounds the largest z-score, ``h_n_1_alpha`` the smallest,
    ``g_sym`` the largest absolute z-score.  The levels are already
    side-adjusted: one-sided thresholds sit at alpha, the non-symmetric
    two-sided pair at alpha/2 each, and ``g_sym`` at alpha overall.
    """

    family: str
    estimator: str
    n: int
    alpha: float
    side: str
    g_n_alpha: float
    h_n_1_alpha: float
    g_sym: float
    replicates: int
    seed: int


def dg_thresholds(
    family: str | Family,
    n: int,
    alpha: float,
    estimator: str = "robust",
    side: str = "two",
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
) -> DgThresholds:
    """Simulate the null distribution of the extreme z-scores and cut it."""
    fam = get_family(family)
    est = _resolve_estimator(estimator)
    if n < 2:
        raise ConfigError("n must be >= 2")
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    if replicates < 10_000:
        raise ConfigError("use at least 10_000 replicates")
    if side not in ("left", "right", "two"):
        raise ConfigError(f"unknown side {side!r}")

    rng = np.random.Generator(np.random.Philox(key=seed))
    z_max = np.empty(replicates)
    z_min = np.empty(replicates)
    z_abs = np.empty(replicates)
    done = 0
    chunk = max(1, min(20_000, 64_000_000 // (n * n) if est == MED_QN else 2_000_000 // n))
    while done < replicates:
        b = min(chunk, replicates - done)
        X = fam.sample(rng, (b, n))
        if est == MED_QN:
            mu, sigma = _batch_robust_fit(X, fam)
        else:
            mu, sigma = _batch_mean_sd_fit(X)
        Z = (X - mu[:, None]) / sigma[:, None]
        z_max[done : done + b] = Z.max(axis=1)
        z_min[done : done + b] = Z.min(axis=1)
        z_abs[done : done + b] = np.abs(Z).max(axis=1)
        done += b

    pair_level = alpha / 2.0 if (side == "two" and not fam.symmetric) else alpha
    return DgThresholds(
        family=fam.name,
        estimator=est,
        n=n,
        alpha=alpha,
        side=side,
        g_n_alpha=float(np.quantile(z_max, 1.0 - pair_level)),
        h_n_1_alpha=float(np.quantile(z_min, pair_level)),
        g_sym=float(np.quantile(z_abs, 1.0 - alpha)),
        replicates=replicates,
        seed=seed,
    )


def dg_classify(x, thresholds: DgThresholds) -> OutlierReport:
    """Declare outliers by thresholding z-scores against simulated cutoffs."""
    xa = np.asarray(x, dtype=float)
    if xa.size != thresholds.n:
        raise ConfigError(
            f"thresholds were simulated for n={thresholds.n}, got a sample of size {xa.size}"
        )
    fam = get_family(thresholds.family)
    fit = _fit(xa, fam, thresholds.estimator)
    z = z_scores(xa, fit)

    side = thresholds.side
    if side == "right":
        right = np.flatnonzero(z > thresholds.g_n_alpha)
        left = np.empty(0, dtype=int)
    elif side == "left":
        left = np.flatnonzero(z < thresholds.h_n_1_alpha)
        right = np.empty(0, dtype=int)
    elif fam.symmetric:
        right = np.flatnonzero(z > thresholds.g_sym)
        left = np.flatnonzero(z < -thresholds.g_sym)
    else:
        right = np.flatnonzero(z > thresholds.g_n_alpha)
        left = np.flatnonzero(z < thresholds.h_n_1_alpha)

    decision = OUTLIERS_FOUND if right.size + left.size else NO_OUTLIERS
    return OutlierReport(
        decision=decision,
        method="dg",
        outlier_indices_right=tuple(int(i) for i in right),
        outlier_indices_left=tuple(int(i) for i in left),
        fit=fit,
        config=thresholds,
        stats={
            "max_z": float(z.max()),
            "min_z": float(z.min()),
            "z_scores": z.tolist(),
        },
    )


# ---------------------------------------------------------------------------
# Rosner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RosnerConfig:
    """Sequential studentized-extreme test configuration."""

    s: int
    alpha: float = 0.05
    side: str = "two"
    lambdas: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.s < 1:
            raise ConfigError("s must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.side not in ("right", "two"):
            raise ConfigError("Rosner's test supports side 'right' or 'two'")


def rosner_lambdas(n: int, s: int, alpha: float, side: str = "two") -> np.ndarray:
    """Large-sample approximation of the sequential critical values.

    Transcribed as printed: a Student upper critical value at tail
    alpha/(2(n-i-1)) (two-sided) or alpha/(n-i-1) (one-sided) with
    n-i+1 degrees of freedom, shrunk by the two square-root factors.
    Recommended for n > 25; a warning is emitted below that.
    """
    if side not in ("right", "two"):
        raise ConfigError("side must be 'right' or 'two'")
    if s >= n - 2:
        raise ConfigError("s must be smaller than n - 2")
    if n <= 25:
        _warnings.warn(
            "the critical value approximation is unreliable for n <= 25; "
            "consider rosner_simulated_lambdas",
            stacklevel=2,
        )
    i = np.arange(1, s + 1, dtype=float)
    denom = 2.0 * (n - i - 1.0) if side == "two" else (n - i - 1.0)
    t = _sps.t.isf(alpha / denom, n - i + 1.0)
    lam = t * np.sqrt((n - i) / (n - i - 1.0 + t * t)) * np.sqrt(1.0 - 1.0 / (n - i + 1.0))
    return lam


def _rosner_peel(x: np.ndarray, s: int, side: str) -> tuple[list[float], list[int]]:
    """Sequential removal of the most extreme studentized observation."""
    active = np.ones(x.size, dtype=bool)
    r_values: list[float] = []
    removed: list[int] = []
    for _ in range(s):
        xs = x[active]
        mean = xs.mean()
        sd = xs.std(ddof=1)
        if sd == 0.0:
            break
        resid = np.full(x.size, -np.inf)
        if side == "two":
            resid[active] = np.abs(x[active] - mean) / sd
        else:
            resid[active] = (x[active] - mean) / sd
        j = int(np.argmax(resid))  # first hit wins, so ties go to the lower index
        r_values.append(float(resid[j]))
        removed.append(j)
        active[j] = False
    return r_values, removed


def rosner_classify(x, config: RosnerConfig) -> OutlierReport:
    """Peel up to s extremes, then keep the largest count with an exceedance."""
    xa = np.asarray(x, dtype=float)
    n = xa.size
    if n <= config.s + 2:
        raise ConfigError("Rosner's test needs n > s + 2")
    lams = (
        np.asarray(config.lambdas, dtype=float)
        if config.lambdas is not None
        else rosner_lambdas(n, config.s, config.alpha, config.side)
    )
    if lams.size != config.s:
        raise ConfigError("need one critical value per candidate rank")

    fit = mean_sd_fit(xa)
    r_values, removed = _rosner_peel(xa, config.s, config.side)

    count = 0
    for i in range(len(r_values), 0, -1):
        if r_values[i - 1] > lams[i - 1]:
            count = i
            break
    declared = np.asarray(removed[:count], dtype=int)
    if config.side == "two":
        sign_right = xa[declared] >= fit.mu_hat
        right = np.sort(declared[sign_right])
        left = np.sort(declared[~sign_right])
    else:
        right = np.sort(declared)
        left = np.empty(0, dtype=int)

    decision = OUTLIERS_FOUND if count else NO_OUTLIERS
    return OutlierReport(
        decision=decision,
        method="rosner",
        outlier_indices_right=tuple(int(i) for i in right),
        outlier_indices_left=tuple(int(i) for i in left),
        fit=fit,
        config=config,
        stats={
            "r_values": [float(v) for v in r_values],
            "lambdas": [float(v) for v in lams],
            "removal_order": [int(i) for i in removed],
            "z_scores": ((xa - fit.mu_hat) / fit.sigma_hat).tolist(),
        },
    )


def rosner_simulated_lambdas(
    n: int,
    s: int,
    alpha: float,
    side: str = "two",
    replicates: int = 20_000,
    seed: int = 0,
) -> np.ndarray:
    """Simulated small-sample critical values with equal marginal levels.

    Simulates the joint peeled statistics under the null and calibrates a
    common marginal tail probability so the union exceedance hits alpha.
    """
    if s >= n - 2:
        raise ConfigError("s must be smaller than n - 2")
    rng = np.random.Generator(np.random.Philox(key=seed))
    R = np.empty((replicates, s))
    for row in range(replicates):
        vals, _ = _rosner_peel(rng.standard_normal(n), s, side)
        if len(vals) < s:  # degenerate peel cannot occur for continuous draws
            vals = vals + [0.0] * (s - len(vals))
        R[row] = vals

    def union_rate(p: float) -> float:
        thr = np.quantile(R, 1.0 - p, axis=0)
        return float(np.mean(np.any(R > thr[None, :], axis=1)))

    lo, hi = alpha / (4.0 * s), alpha
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if union_rate(mid) > alpha:
            hi = mid
        else:
            lo = mid
    p_star = 0.5 * (lo + hi)
    return np.quantile(R, 1.0 - p_star, axis=0)


# ---------------------------------------------------------------------------
# Bolshev
# ---------------------------------------------------------------------------


def thompson_cdf(nu: int, x) -> float | np.ndarray:
    """CDF of Thompson's distribution with nu degrees of freedom.

    The support is |x| < sqrt(nu + 1); inside it the monotone map
    t = x * sqrt(nu / (nu + 1 - x^2)) carries the distribution to Student
    t with nu degrees of freedom.  Saturates to 0/1 outside the support.
    The studentized residual (X_i - mean)/S of a normal sample of size n,
    scaled by sqrt(n/(n-1)), follows this law with nu = n - 2.
    """
    if nu < 1:
        raise DomainError("nu must be >= 1")
    xa = np.asarray(x, dtype=float)
    limit = np.sqrt(nu + 1.0)
    inside = np.abs(xa) < limit
    xin = np.where(inside, xa, 0.0)
    t = xin * np.sqrt(nu / (nu + 1.0 - xin * xin))
    res = np.where(inside, _sps.t.cdf(t, nu), np.where(xa <= -limit, 0.0, 1.0))
    if np.ndim(x) == 0:
        return float(res)
    return res


def _bolshev_taus(z: np.ndarray, n: int, side: str) -> np.ndarray:
    scaled = z * np.sqrt(n / (n - 1.0))
    if side == "two":
        scaled = np.abs(scaled)
    return n * (1.0 - thompson_cdf(n - 2, scaled))


def bolshev_classify(
    x,
    s: int,
    alpha: float,
    side: str = "two",
    critical: float | None = None,
) -> OutlierReport:
    """Minimum scaled tau order statistic test with per-rank membership."""
    if critical is None:
        raise MissingCriticalValueError(
            "Bolshev's test needs a simulated critical value; generate one with "
            "simulate_baseline_critical or the simulate-critical command"
        )
    if side not in ("right", "two"):
        raise ConfigError("Bolshev's test supports side 'right' or 'two'")
    xa = np.asarray(x, dtype=float)
    n = xa.size
    if s < 1 or s > n:
        raise ConfigError("need 1 <= s <= n")
    fit = mean_sd_fit(xa)
    z = z_scores(xa, fit)
    taus = _bolshev_taus(z, n, side)
    order = np.argsort(taus, kind="stable")
    ranks = np.arange(1, s + 1, dtype=float)
    ratios = taus[order[:s]] / ranks
    declared = order[:s][ratios < critical]

    if side == "two":
        sign_right = z[declared] >= 0.0
        right = np.sort(declared[sign_right])
        left = np.sort(declared[~sign_right])
    else:
        right = np.sort(declared)
        left = np.empty(0, dtype=int)

    decision = OUTLIERS_FOUND if declared.size else NO_OUTLIERS
    return OutlierReport(
        decision=decision,
        method="bolshev",
        outlier_indices_right=tuple(int(i) for i in right),
        outlier_indices_left=tuple(int(i) for i in left),
        fit=fit,
        config={"s": s, "alpha": alpha, "side": side, "critical": critical},
        stats={
            "tau_ratios": [float(v) for v in ratios],
            "statistic": float(ratios.min()),
            "z_scores": z.tolist(),
        },
    )


# ---------------------------------------------------------------------------
# Hawkins
# ---------------------------------------------------------------------------


def _hawkins_b_values(z: np.ndarray, s: int) -> np.ndarray:
    n = z.size
    top = np.sort(z)[::-1][:s]
    k = np.arange(1, s + 1, dtype=float)
    return np.cumsum(top) / np.sqrt(k * (n - k))


def hawkins_classify(
    x,
    s: int,
    alpha: float,
    critical: float | None = None,
) -> OutlierReport:
    """Scaled partial-sum test for right outliers."""
    if critical is None:
        raise MissingCriticalValueError(
            "Hawkins' test needs a simulated critical value; generate one with "
            "simulate_baseline_critical or the simulate-critical command"
        )
    xa = np.asarray(x, dtype=float)
    n = xa.size
    if s < 1 or s >= n:
        raise ConfigError("need 1 <= s < n")
    fit = mean_sd_fit(xa)
    z = z_scores(xa, fit)
    b_values = _hawkins_b_values(z, s)
    order = np.argsort(-z, kind="stable")
    declared = order[:s][b_values > critical]
    right = np.sort(declared)

    decision = OUTLIERS_FOUND if right.size else NO_OUTLIERS
    return OutlierReport(
        decision=decision,
        method="hawkins",
        outlier_indices_right=tuple(int(i) for i in right),
        outlier_indices_left=(),
        fit=fit,
        config={"s": s, "alpha": alpha, "critical": critical},
        stats={
            "b_values": [float(v) for v in b_values],
            "statistic": float(b_values.max()),
            "z_scores": z.tolist(),
        },
    )


# ---------------------------------------------------------------------------
# simulated critical values
# ---------------------------------------------------------------------------


def simulate_baseline_critical(
    method: str,
    family: str | Family,
    n: int,
    s: int,
    alpha: float,
    side: str = "right",
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
) -> float:
    """Null critical value of the Bolshev or Hawkins statistic.

    Bolshev rejects low, so its cutoff is the alpha quantile of the min
    ratio; Hawkins rejects high, so the 1 - alpha quantile of the max.
    """
    method = method.strip().lower()
    if method not in ("bolshev", "hawkins"):
        raise ConfigError("simulate_baseline_critical supports 'bolshev' and 'hawkins'")
    if replicates < 10_000:
        raise ConfigError("use at least 10_000 replicates")
    fam = get_family(family)
    rng = np.random.Generator(np.random.Philox(key=seed))
    values = np.empty(replicates)
    done = 0
    chunk = max(1, 2_000_000 // n)
    ranks = np.arange(1, s + 1, dtype=float)
    k = np.arange(1, s + 1, dtype=float)
    scale = np.sqrt(k * (n - k))
    while done < replicates:
        b = min(chunk, replicates - done)
        X = fam.sample(rng, (b, n))
        mu, sd = _batch_mean_sd_fit(X)
        Z = (X - mu[:, None]) / sd[:, None]
        if method == "bolshev":
            scaled = Z * np.sqrt(n / (n - 1.0))
            if side == "two":
                scaled = np.abs(scaled)
            taus = n * (1.0 - thompson_cdf(n - 2, scaled))
            taus.sort(axis=1)
            values[done : done + b] = (taus[:, :s] / ranks[None, :]).min(axis=1)
        else:
            top = -np.sort(-Z, axis=1)[:, :s]
            values[done : done + b] = (np.cumsum(top, axis=1) / scale[None, :]).max(axis=1)
        done += b
    if method == "bolshev":
        return float(np.quantile(values, alpha))
    return float(np.quantile(values, 1.0 - alpha))
