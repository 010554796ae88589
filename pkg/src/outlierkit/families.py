"""Standardized baseline families and their extreme value machinery.

Every family here is the location-scale baseline with location 0 and
scale 1.  Besides the usual distribution functions, each family carries
the pieces the outlier tests are built from:

* normalizing sequences ``b_n = F0^-1(1 - 1/n)``, ``a_n = 1/(n f0(b_n))``
  for the sample maximum (closed forms where they exist), together with
  the mirrored sequences ``b*_n``, ``a*_n`` for the sample minimum,
* the distribution ``K0`` of the difference of two independent draws,
  whose 5/8 quantile defines the Qn consistency constant ``d``,
* outlier region geometry for a chosen per-observation level,
* an exact chi-square CDF for even degrees of freedom (the only case the
  test statistics use).

The maximum of a sample from each supported family, normalized by
``(a_n, b_n)``, converges to a Gumbel-type limit except for the Cauchy
family, which lands in the Frechet class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError

__all__ = [
    "Family",
    "NormalizingConstants",
    "OutlierRegion",
    "FAMILIES",
    "get_family",
    "family_names",
    "normalizing_constants",
    "outlier_region",
    "per_observation_level",
    "chi2_even_cdf",
    "chi2_even_sf",
    "qn_pair_cdf_constant",
]

GUMBEL = "gumbel"
FRECHET = "frechet"


def _maybe_scalar(x, result):
    if np.ndim(x) == 0:
        return float(result)
    return result


@dataclass(frozen=True)
class NormalizingConstants:
    """Centering and scaling sequences for extreme order statistics.

    ``b_n``/``a_n`` normalize the sample maximum, ``b_star_n``/``a_star_n``
    the sample minimum (``b*_n = -F0^-1(1/n)``).  For symmetric densities
    the starred pair equals the plain pair.
    """

    n: int
    b_n: float
    a_n: float
    b_star_n: float
    a_star_n: float


class Family:
    """A standardized baseline distribution."""

    name: str = ""
    gamma_class: str = GUMBEL
    symmetric: bool = False
    qn_constant: float = float("nan")

    # -- distribution functions -------------------------------------------

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        return _maybe_scalar(x, self._cdf(xa))

    def quantile(self, p):
        pa = np.asarray(p, dtype=float)
        if np.any((pa <= 0.0) | (pa >= 1.0)):
            raise DomainError(f"{self.name}: quantile requires 0 < p < 1")
        return _maybe_scalar(p, self._quantile(pa))

    def density(self, x):
        xa = np.asarray(x, dtype=float)
        return _maybe_scalar(x, self._density(xa))

    def pair_cdf(self, x):
        """CDF of the difference of two independent standardized draws."""
        xa = np.asarray(x, dtype=float)
        return _maybe_scalar(x, self._pair_cdf(xa))

    def sample(self, rng, size):
        raise NotImplementedError

    # -- extreme value constants ------------------------------------------

    def _max_constants(self, n: int) -> tuple[float, float]:
        b = float(self._quantile(np.asarray(1.0 - 1.0 / n)))
        return b, 1.0 / (n * float(self._density(np.asarray(b))))

    def _min_constants(self, n: int) -> tuple[float, float]:
        b_star = -float(self._quantile(np.asarray(1.0 / n)))
        return b_star, 1.0 / (n * float(self._density(np.asarray(-b_star))))

    def __repr__(self):  # pragma: no cover
        return f"<Family {self.name}>"


class Normal(Family):
    name = "normal"
    symmetric = True
    qn_constant = 2.2219

    def _cdf(self, x):
        return special.ndtr(x)

    def _quantile(self, p):
        return special.ndtri(p)

    def _density(self, x):
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

    def _pair_cdf(self, x):
        return special.ndtr(x / math.sqrt(2.0))

    def sample(self, rng, size):
        return rng.standard_normal(size)

    def _max_constants(self, n):
        b = float(special.ndtri(1.0 - 1.0 / n))
        if b > 0.0:
            # reciprocal variant of the scaling sequence; only defined once
            # the 1 - 1/n quantile is positive, i.e. n >= 3
            return b, 1.0 / b
        return super()._max_constants(n)


class ExtremeValueI(Family):
    """Minimum-type extreme value baseline, F0(x) = 1 - exp(-exp(x))."""

    name = "extreme_value_i"
    symmetric = False
    qn_constant = 1.9576

    def _cdf(self, x):
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp(x))

    def _quantile(self, p):
        return np.log(-np.log1p(-p))

    def _density(self, x):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(x - np.exp(x))

    def _pair_cdf(self, x):
        return special.expit(x)

    def sample(self, rng, size):
        return -rng.gumbel(0.0, 1.0, size)

    def _max_constants(self, n):
        return math.log(math.log(n)), 1.0 / math.log(n)

    def _min_constants(self, n):
        log_tail = math.log1p(-1.0 / n)
        return -math.log(-log_tail), -1.0 / ((n - 1) * log_tail)


class ExtremeValueII(Family):
    """Maximum-type extreme value baseline, F0(x) = exp(-exp(-x))."""

    name = "extreme_value_ii"
    symmetric = False
    qn_constant = 1.9576

    def _cdf(self, x):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-np.exp(-x))

    def _quantile(self, p):
        return -np.log(-np.log(p))

    def _density(self, x):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-x - np.exp(-x))

    def _pair_cdf(self, x):
        return special.expit(x)

    def sample(self, rng, size):
        return rng.gumbel(0.0, 1.0, size)

    def _max_constants(self, n):
        log_tail = math.log1p(-1.0 / n)
        return -math.log(-log_tail), -1.0 / ((n - 1) * log_tail)

    def _min_constants(self, n):
        return math.log(math.log(n)), 1.0 / math.log(n)


class Logistic(Family):
    name = "logistic"
    symmetric = True
    qn_constant = 1.3079

    def _cdf(self, x):
        return special.expit(x)

    def _quantile(self, p):
        return special.logit(p)

    def _density(self, x):
        f = special.expit(x)
        return f * (1.0 - f)

    def _pair_cdf(self, x):
        # K0(x) = 1 - ((x-1) e^x + 1) / (e^x - 1)^2, continued through the
        # removable singularity at 0 and the overflow region
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        small = np.abs(x) < 1e-6
        big = x > 40.0
        neg_big = x < -40.0
        mid = ~(small | big | neg_big)
        out[small] = 0.5 + x[small] / 6.0
        out[big] = 1.0 - (x[big] - 1.0) * np.exp(-x[big])
        out[neg_big] = (-x[neg_big] - 1.0) * np.exp(x[neg_big])
        xm = x[mid]
        ex = np.exp(xm)
        out[mid] = 1.0 - ((xm - 1.0) * ex + 1.0) / (ex - 1.0) ** 2
        return out

    def sample(self, rng, size):
        return rng.logistic(0.0, 1.0, size)

    def _max_constants(self, n):
        return math.log(n - 1.0), n / (n - 1.0)


class Laplace(Family):
    name = "laplace"
    symmetric = True
    qn_constant = 1.9306

    def _cdf(self, x):
        return np.where(x < 0.0, 0.5 * np.exp(x), 1.0 - 0.5 * np.exp(-x))

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p))) + 0.0

    def _density(self, x):
        return 0.5 * np.exp(-np.abs(x))

    def _pair_cdf(self, x):
        ax = np.abs(x)
        upper = 1.0 - 0.5 * (1.0 + 0.5 * ax) * np.exp(-ax)
        return np.where(x >= 0.0, upper, 1.0 - upper)

    def sample(self, rng, size):
        return rng.laplace(0.0, 1.0, size)

    def _max_constants(self, n):
        return math.log(n / 2.0), 1.0


class Cauchy(Family):
    name = "cauchy"
    gamma_class = FRECHET
    symmetric = True
    qn_constant = 1.2071

    def _cdf(self, x):
        return 0.5 + np.arctan(x) / math.pi

    def _quantile(self, p):
        return np.tan(math.pi * (p - 0.5))

    def _density(self, x):
        return 1.0 / (math.pi * (1.0 + x * x))

    def _pair_cdf(self, x):
        return 0.5 + np.arctan(0.5 * x) / math.pi

    def sample(self, rng, size):
        return rng.standard_cauchy(size)

    def _max_constants(self, n):
        angle = math.pi / n
        return 1.0 / math.tan(angle), angle / math.sin(angle) ** 2


FAMILIES: dict[str, Family] = {
    fam.name: fam
    for fam in (Normal(), ExtremeValueI(), ExtremeValueII(), Logistic(), Laplace(), Cauchy())
}

_ALIASES = {
    "ev1": "extreme_value_i",
    "evi": "extreme_value_i",
    "ev2": "extreme_value_ii",
    "evii": "extreme_value_ii",
    "gauss": "normal",
}


def family_names() -> list[str]:
    return list(FAMILIES)


def get_family(family: str | Family) -> Family:
    if isinstance(family, Family):
        return family
    key = family.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    try:
        return FAMILIES[key]
    except KeyError:
        raise ConfigError(
            f"unknown family {family!r}; choose from {', '.join(FAMILIES)}"
        ) from None


def normalizing_constants(family: str | Family, n: int) -> NormalizingConstants:
    """Normalizing constants of the sample extremes at size ``n``."""
    if n < 2:
        raise DomainError("normalizing constants require n >= 2")
    return _constants_cached(get_family(family).name, int(n))


@lru_cache(maxsize=None)
def _constants_cached(name: str, n: int) -> NormalizingConstants:
    fam = FAMILIES[name]
    b, a = fam._max_constants(n)
    if fam.symmetric:
        b_star, a_star = b, a
    else:
        b_star, a_star = fam._min_constants(n)
    return NormalizingConstants(n=n, b_n=b, a_n=a, b_star_n=b_star, a_star_n=a_star)


def per_observation_level(alpha_bar: float, n: int) -> float:
    """Per-observation level alpha_n with 1 - (1 - alpha_n)^n = alpha_bar."""
    if not 0.0 < alpha_bar < 1.0:
        raise DomainError("alpha_bar must lie in (0, 1)")
    if n < 1:
        raise DomainError("n must be >= 1")
    return float(-np.expm1(np.log1p(-alpha_bar) / n))


@dataclass(frozen=True)
class OutlierRegion:
    """Tail region a clean sample of size n avoids with probability 1 - alpha_bar.

    For ``side == "right"`` the region is (lower, inf); for ``"left"`` it is
    (-inf, upper); for ``"two"`` it is everything outside [lower, upper].
    """

    side: str
    alpha_n: float
    lower: float
    upper: float

    def contains(self, x):
        xa = np.asarray(x, dtype=float)
        if self.side == "right":
            res = xa > self.lower
        elif self.side == "left":
            res = xa < self.upper
        else:
            res = (xa < self.lower) | (xa > self.upper)
        if np.ndim(x) == 0:
            return bool(res)
        return res


def outlier_region(
    family: str | Family,
    mu: float,
    sigma: float,
    n: int,
    alpha_bar: float,
    side: str = "two",
) -> OutlierRegion:
    if sigma <= 0.0:
        raise DomainError("sigma must be positive")
    if side not in ("left", "right", "two"):
        raise ConfigError(f"unknown side {side!r}")
    fam = get_family(family)
    alpha_n = per_observation_level(alpha_bar, n)
    if side == "right":
        lower = mu + sigma * fam.quantile(1.0 - alpha_n)
        upper = math.inf
    elif side == "left":
        lower = -math.inf
        upper = mu + sigma * fam.quantile(alpha_n)
    else:
        lower = mu + sigma * fam.quantile(alpha_n / 2.0)
        upper = mu + sigma * fam.quantile(1.0 - alpha_n / 2.0)
    return OutlierRegion(side=side, alpha_n=alpha_n, lower=float(lower), upper=float(upper))


def chi2_even_sf(k: int, x) -> float | np.ndarray:
    """Survival function of chi-square with 2k degrees of freedom.

    Uses the exact Poisson sum exp(-x/2) * sum_{j<k} (x/2)^j / j!, which is
    closed form precisely because the degrees of freedom are even.
    """
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer (degrees of freedom 2k)")
    k = int(k)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0):
        raise DomainError("chi-square argument must be nonnegative")
    half = 0.5 * xa
    term = np.ones_like(half)
    total = np.ones_like(half)
    for j in range(1, k):
        term = term * half / j
        total = total + term
    with np.errstate(under="ignore", invalid="ignore"):
        res = np.exp(-half) * total
    res = np.where(np.isinf(xa), 0.0, res)
    res = np.clip(res, 0.0, 1.0)
    return _maybe_scalar(x, res)


def chi2_even_cdf(k: int, x) -> float | np.ndarray:
    """CDF companion of :func:`chi2_even_sf`."""
    sf = chi2_even_sf(k, x)
    if np.ndim(x) == 0:
        return 1.0 - sf
    return 1.0 - sf


def _chi2_even_sf_scalar(k: int, x: float) -> float:
    # scalar fast path for the stepwise classification loop
    if x >= 1400.0 or math.isinf(x):
        return 0.0
    half = 0.5 * x
    term = 1.0
    total = 1.0
    for j in range(1, k):
        term *= half / j
        total += term
    res = math.exp(-half) * total
    return min(res, 1.0)


def qn_pair_cdf_constant(family: str | Family) -> float:
    """Consistency constant d = 1/K0^-1(5/8) of the Qn scale estimate.

    Returned as the tabulated literal so runs are reproducible; the
    recomputation by numerical inversion of ``pair_cdf`` lives in the test
    suite.
    """
    return get_family(family).qn_constant
