"""Seeded Monte Carlo harness for masking/swamping comparisons.

Replicate samples mix n - r null draws from the standardized family with
r contaminants concentrated inside the outlier region at overall level
``alpha_bar``.  Two contaminant laws are supported: a shifted exponential
starting at the region boundary (scale theta) and a normal with location
mu and scale rho truncated to the region.  For two-sided contamination
the boundary is the two-sided region edge and r is split as evenly as
possible with the extra observation on the right.

Each replicate is classified and the confusion counts are accumulated:
``d_oo`` contaminants declared, ``d_on`` contaminants missed (masking),
``d_no`` clean observations declared (swamping), ``d_nn`` clean kept.
Everything is deterministic in (seed, replicate index); replicate streams
use counter-based Philox generators spawned per index so parallel or
chunked execution cannot change the results.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import ConfigError
from .families import Family, get_family, outlier_region
from .report import OutlierReport

__all__ = ["ContaminationSpec", "McResult", "generate_replicate", "run_experiment", "significance_curve"]

EXPONENTIAL = "exponential"
TRUNCATED_NORMAL = "truncated_normal"


@dataclass(frozen=True)
class ContaminationSpec:
    """How many contaminants to plant and from which law."""

    kind: str
    r: int
    side: str = "both"
    theta: float | None = None
    mu: float | None = None
    rho: float | None = None
    alpha_bar: float = 0.05

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, TRUNCATED_NORMAL):
            raise ConfigError(f"unknown contaminant kind {self.kind!r}")
        if self.r < 0:
            raise ConfigError("r must be >= 0")
        if self.side not in ("right", "left", "both"):
            raise ConfigError(f"unknown contamination side {self.side!r}")
        if not 0.0 < self.alpha_bar < 1.0:
            raise ConfigError("alpha_bar must lie in (0, 1)")
        if self.kind == EXPONENTIAL:
            if self.theta is None or self.theta <= 0.0:
                raise ConfigError("exponential contamination needs theta > 0")
        else:
            if self.mu is None:
                raise ConfigError("truncated normal contamination needs mu")
            if self.rho is None or self.rho <= 0.0:
                raise ConfigError("truncated normal contamination needs rho > 0")

    def param_label(self) -> str:
        if self.kind == EXPONENTIAL:
            return f"theta={self.theta:g}"
        return f"mu={self.mu:g},rho={self.rho:g}"


@dataclass(frozen=True)
class McResult:
    """Mean confusion counts over M replicates."""

    d_oo: float
    d_on: float
    d_no: float
    d_nn: float
    significance: float
    replicates: int
    seed: int
    config_fingerprint: str


def _region_bounds(family: Family, n: int, spec: ContaminationSpec) -> tuple[float | None, float | None]:
    """Left/right boundaries of the outlier region used for anchoring."""
    side = "two" if spec.side == "both" else spec.side
    region = outlier_region(family, 0.0, 1.0, n, spec.alpha_bar, side)
    if side == "right":
        return None, region.lower
    if side == "left":
        return region.upper, None
    return region.lower, region.upper


def _draw_right(rng, spec: ContaminationSpec, boundary: float, size: int) -> np.ndarray:
    if size == 0:
        return np.empty(0)
    if spec.kind == EXPONENTIAL:
        return boundary + rng.exponential(spec.theta, size)
    if spec.mu <= boundary:
        raise ConfigError(
            f"truncated normal location mu={spec.mu} must exceed the region boundary {boundary:.4f}"
        )
    lo = float(special.ndtr((boundary - spec.mu) / spec.rho))
    u = rng.uniform(lo, 1.0, size)
    return spec.mu + spec.rho * special.ndtri(u)


def generate_replicate(
    family: str | Family,
    n: int,
    spec: ContaminationSpec,
    seed: int,
    replicate_index: int,
) -> tuple[np.ndarray, np.ndarray]:
    """One seeded replicate: sample of size n plus contaminant positions."""
    fam = get_family(family)
    if spec.r >= n:
        raise ConfigError("r must be smaller than n")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replicate_index,))
    rng = np.random.Generator(np.random.Philox(ss))

    clean = fam.sample(rng, n - spec.r)
    left_bound, right_bound = _region_bounds(fam, n, spec)
    if spec.side == "right":
        r_right, r_left = spec.r, 0
    elif spec.side == "left":
        r_right, r_left = 0, spec.r
    else:
        r_right = (spec.r + 1) // 2
        r_left = spec.r - r_right
    left_part = -_draw_right(rng, spec, -left_bound, r_left) if r_left else np.empty(0)
    right_part = _draw_right(rng, spec, right_bound, r_right) if r_right else np.empty(0)
    x = np.concatenate([clean, left_part, right_part])
    contaminants = np.arange(n - spec.r, n)
    return x, contaminants


def _fingerprint(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_experiment(
    classifier: Callable[[np.ndarray], OutlierReport],
    family: str | Family,
    n: int,
    spec: ContaminationSpec,
    replicates: int,
    seed: int,
    label: str = "",
) -> McResult:
    """Classify M seeded replicates and average the confusion counts."""
    fam = get_family(family)
    if replicates < 1:
        raise ConfigError("replicates must be >= 1")
    r = spec.r
    oo = on = no = nn = 0
    found = 0
    for idx in range(replicates):
        x, contaminants = generate_replicate(fam, n, spec, seed, idx)
        report = classifier(x)
        mask = np.zeros(n, dtype=bool)
        declared = list(report.outlier_indices_right) + list(report.outlier_indices_left)
        mask[declared] = True
        hits = int(mask[contaminants].sum())
        swamped = int(mask.sum()) - hits
        oo += hits
        on += r - hits
        no += swamped
        nn += (n - r) - swamped
        found += bool(report.outliers_found)
    m = float(replicates)
    return McResult(
        d_oo=oo / m,
        d_on=on / m,
        d_no=no / m,
        d_nn=nn / m,
        significance=found / m,
        replicates=replicates,
        seed=seed,
        config_fingerprint=_fingerprint(
            {
                "label": label,
                "family": fam.name,
                "n": n,
                "spec": spec.__dict__,
                "replicates": replicates,
                "seed": seed,
            }
        ),
    )


def significance_curve(
    classifier_factory: Callable[[int], Callable[[np.ndarray], OutlierReport]],
    family: str | Family,
    n_grid: Sequence[int],
    replicates: int,
    seed: int,
    label: str = "",
) -> list[tuple[int, float]]:
    """Empirical size of a test along a grid of sample sizes (r = 0 runs)."""
    fam = get_family(family)
    spec = ContaminationSpec(kind=EXPONENTIAL, r=0, theta=1.0, side="both")
    points = []
    for n in n_grid:
        result = run_experiment(classifier_factory(n), fam, n, spec, replicates, seed, label=label)
        points.append((int(n), result.significance))
    return points
