"""Configured classifiers for the five detection methods.

This is the glue between the raw procedures and the user-facing layers:
it resolves the critical values a method needs (from a cache table when
available, simulating and inserting them otherwise) and returns a plain
``sample -> OutlierReport`` callable together with provenance records for
every critical value involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .baselines import (
    DgThresholds,
    RosnerConfig,
    bolshev_classify,
    dg_classify,
    dg_thresholds,
    hawkins_classify,
    rosner_classify,
    rosner_lambdas,
    rosner_simulated_lambdas,
)
from .bp import (
    BpConfig,
    RNG_NAME,
    bp_classify,
    simulate_critical_value_v,
    simulate_exact_critical_value_u,
)
from .cache import CacheEntry, CacheKey, CriticalValueTable, utc_now_iso
from .errors import ConfigError
from .families import Family, get_family
from .report import OutlierReport

METHODS = ("bp", "dg", "rosner", "bolshev", "hawkins")

MED_QN = "med_qn"
MEAN_SD = "mean_sd"


@dataclass(frozen=True)
class CriticalRecord:
    """A critical value with full provenance, as used by one run."""

    key: CacheKey
    value: float
    replicates: int
    seed: int
    rng_name: str
    created_at: str
    cached: bool


@dataclass
class BuiltMethod:
    """A ready-to-run classifier plus the critical values it relies on."""

    label: str
    classifier: Callable[[np.ndarray], OutlierReport]
    criticals: list[CriticalRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _resolve(
    table: CriticalValueTable | None,
    key: CacheKey,
    replicates: int,
    seed: int,
    compute: Callable[[], float],
) -> tuple[CriticalRecord, bool]:
    """Fetch a critical value from the table or simulate and insert it."""
    if table is not None:
        hit = table.get(key)
        if hit is not None and hit.replicates == replicates and hit.seed == seed:
            return (
                CriticalRecord(
                    key=key,
                    value=hit.value,
                    replicates=hit.replicates,
                    seed=hit.seed,
                    rng_name=hit.rng_name,
                    created_at=hit.created_at,
                    cached=True,
                ),
                False,
            )
    value = compute()
    entry = CacheEntry(
        value=value,
        replicates=replicates,
        seed=seed,
        rng_name=RNG_NAME,
        created_at=utc_now_iso(),
        tool_version=__version__,
    )
    if table is not None:
        table.put(key, entry)
    return (
        CriticalRecord(
            key=key,
            value=value,
            replicates=replicates,
            seed=seed,
            rng_name=RNG_NAME,
            created_at=entry.created_at,
            cached=False,
        ),
        True,
    )


def _estimator_key(estimator: str) -> str:
    est = estimator.strip().lower()
    if est in ("robust", MED_QN):
        return MED_QN
    if est in ("ml", MEAN_SD):
        return MEAN_SD
    raise ConfigError(f"unknown estimator {estimator!r}; use 'robust' or 'ml'")


def build_method(
    method: str,
    family: str | Family,
    n: int,
    alpha: float,
    side: str,
    s: int | None = None,
    estimator: str = "robust",
    *,
    use_exact_critical: bool = False,
    critical_replicates: int = 100_000,
    seed: int = 20210521,
    table: CriticalValueTable | None = None,
) -> BuiltMethod:
    """Assemble a classifier for one method/configuration pair."""
    method = method.strip().lower()
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    fam = get_family(family)
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    if side not in ("left", "right", "two"):
        raise ConfigError(f"unknown side {side!r}")

    if method == "bp":
        if _estimator_key(estimator) != MED_QN:
            raise ConfigError("bp is built on robust estimation; --estimator ml applies to dg only")
        return _build_bp(fam, n, alpha, side, s, use_exact_critical, critical_replicates, seed, table)
    if method == "dg":
        return _build_dg(fam, n, alpha, side, estimator, critical_replicates, seed, table)
    if method == "rosner":
        return _build_rosner(fam, n, alpha, side, s, critical_replicates, seed)
    if method == "bolshev":
        return _build_bolshev(fam, n, alpha, side, s, critical_replicates, seed, table)
    return _build_hawkins(fam, n, alpha, side, s, critical_replicates, seed, table)


def _require_s(method: str, s: int | None, n: int) -> int:
    if s is None:
        raise ConfigError(
            f"s is required for {method}; a practical rule of thumb is s = floor(0.4 n) "
            f"(= {int(0.4 * n)} here)"
        )
    return s


def _build_bp(fam, n, alpha, side, s, use_exact, replicates, seed, table) -> BuiltMethod:
    s = s if s is not None else 5
    config = BpConfig(
        family=fam,
        alpha=alpha,
        side=side,
        s=s,
        use_exact_critical=use_exact,
        critical_replicates=replicates,
        critical_seed=seed,
    )
    alpha_eff = config.effective_alpha()
    records: list[CriticalRecord] = []
    nonsym_two = side == "two" and not fam.symmetric

    if use_exact:
        sides = ("right", "left") if nonsym_two else (side,)
        values = {}
        for sd in sides:
            key = CacheKey(
                method="bp", family=fam.name, estimator=MED_QN,
                n=n, s=s, alpha=alpha_eff, side=sd,
            )
            rec, _ = _resolve(
                table, key, replicates, seed,
                lambda sd=sd: simulate_exact_critical_value_u(fam, n, s, alpha_eff, sd, replicates, seed),
            )
            records.append(rec)
            values[sd] = rec.value
        if nonsym_two:
            right_cfg = replace(config, side="right", alpha=alpha_eff, critical_value=values["right"])
            left_cfg = replace(config, side="left", alpha=alpha_eff, critical_value=values["left"])

            def classify(x):
                rep_r = bp_classify(x, right_cfg)
                rep_l = bp_classify(x, left_cfg)
                return _merge_two_sided(rep_r, rep_l, config)

            return BuiltMethod(label="bp", classifier=classify, criticals=records)
        config = replace(config, critical_value=values[side])
    else:
        key = CacheKey(
            method="bp", family=fam.name, estimator=MED_QN,
            n=None, s=s, alpha=alpha_eff, side=side,
        )
        rec, _ = _resolve(
            table, key, replicates, seed,
            lambda: simulate_critical_value_v(s, alpha_eff, replicates, seed),
        )
        records.append(rec)
        config = replace(config, critical_value=rec.value)

    return BuiltMethod(label="bp", classifier=lambda x: bp_classify(x, config), criticals=records)


def _merge_two_sided(rep_r: OutlierReport, rep_l: OutlierReport, config: BpConfig) -> OutlierReport:
    from .report import NO_OUTLIERS, OUTLIERS_FOUND

    z = np.asarray(rep_r.stats["z_scores"])
    declared = sorted(set(rep_r.outlier_indices_right) | set(rep_l.outlier_indices_left))
    right = tuple(i for i in declared if z[i] >= 0.0)
    left = tuple(i for i in declared if z[i] < 0.0)
    decision = OUTLIERS_FOUND if declared else NO_OUTLIERS
    return OutlierReport(
        decision=decision,
        method="bp",
        outlier_indices_right=right,
        outlier_indices_left=left,
        fit=rep_r.fit,
        trail=rep_r.trail + rep_l.trail,
        config=config,
        stats={"z_scores": rep_r.stats["z_scores"]},
        warnings=tuple(sorted(set(rep_r.warnings) | set(rep_l.warnings))),
    )


def _build_dg(fam, n, alpha, side, estimator, replicates, seed, table) -> BuiltMethod:
    est = _estimator_key(estimator)
    pair_level = alpha / 2.0 if (side == "two" and not fam.symmetric) else alpha

    needed: list[tuple[str, float]] = []
    if side == "right":
        needed.append(("right", pair_level))
    elif side == "left":
        needed.append(("left", pair_level))
    elif fam.symmetric:
        needed.append(("two", alpha))
    else:
        needed.append(("right", pair_level))
        needed.append(("left", pair_level))

    sim_holder: dict[str, DgThresholds] = {}

    def simulated() -> DgThresholds:
        if "thresholds" not in sim_holder:
            sim_holder["thresholds"] = dg_thresholds(fam, n, alpha, est, side, replicates, seed)
        return sim_holder["thresholds"]

    records = []
    values: dict[str, float] = {}
    for sd, level in needed:
        key = CacheKey(method="dg", family=fam.name, estimator=est, n=n, s=0, alpha=level, side=sd)

        def compute(sd=sd) -> float:
            thr = simulated()
            if sd == "right":
                return thr.g_n_alpha
            if sd == "left":
                return thr.h_n_1_alpha
            return thr.g_sym

        rec, _ = _resolve(table, key, replicates, seed, compute)
        records.append(rec)
        values[sd] = rec.value

    thresholds = DgThresholds(
        family=fam.name,
        estimator=est,
        n=n,
        alpha=alpha,
        side=side,
        g_n_alpha=values.get("right", float("nan")),
        h_n_1_alpha=values.get("left", float("nan")),
        g_sym=values.get("two", float("nan")),
        replicates=replicates,
        seed=seed,
    )
    return BuiltMethod(
        label="dg",
        classifier=lambda x: dg_classify(x, thresholds),
        criticals=records,
    )


def _build_rosner(fam, n, alpha, side, s, replicates, seed) -> BuiltMethod:
    if fam.name != "normal":
        raise ConfigError("Rosner's test is defined for the normal family")
    if side == "left":
        raise ConfigError("Rosner's test supports side 'right' or 'two'")
    s = _require_s("rosner", s, n)
    warnings: list[str] = []
    if n > 25:
        lams = tuple(float(v) for v in rosner_lambdas(n, s, alpha, side))
    else:
        lams = tuple(
            float(v) for v in rosner_simulated_lambdas(n, s, alpha, side, max(replicates, 20_000), seed)
        )
        warnings.append(
            "n <= 25: the printed critical value approximation is unreliable, "
            "simulated critical values were used instead"
        )
    config = RosnerConfig(s=s, alpha=alpha, side=side, lambdas=lams)
    return BuiltMethod(
        label="rosner",
        classifier=lambda x: rosner_classify(x, config),
        warnings=warnings,
    )


def _build_bolshev(fam, n, alpha, side, s, replicates, seed, table) -> BuiltMethod:
    if fam.name != "normal":
        raise ConfigError("Bolshev's test is defined for the normal family")
    if side == "left":
        raise ConfigError("Bolshev's test supports side 'right' or 'two'")
    s = _require_s("bolshev", s, n)
    from .baselines import simulate_baseline_critical

    key = CacheKey(method="bolshev", family=fam.name, estimator=MEAN_SD, n=n, s=s, alpha=alpha, side=side)
    rec, _ = _resolve(
        table, key, replicates, seed,
        lambda: simulate_baseline_critical("bolshev", fam, n, s, alpha, side, replicates, seed),
    )
    return BuiltMethod(
        label="bolshev",
        classifier=lambda x: bolshev_classify(x, s, alpha, side, rec.value),
        criticals=[rec],
    )


def _build_hawkins(fam, n, alpha, side, s, replicates, seed, table) -> BuiltMethod:
    if fam.name != "normal":
        raise ConfigError("Hawkins' test is defined for the normal family")
    if side != "right":
        raise ConfigError("Hawkins' test is right-sided")
    s = _require_s("hawkins", s, n)
    from .baselines import simulate_baseline_critical

    key = CacheKey(method="hawkins", family=fam.name, estimator=MEAN_SD, n=n, s=s, alpha=alpha, side=side)
    rec, _ = _resolve(
        table, key, replicates, seed,
        lambda: simulate_baseline_critical("hawkins", fam, n, s, alpha, side, replicates, seed),
    )
    return BuiltMethod(
        label="hawkins",
        classifier=lambda x: hawkins_classify(x, s, alpha, rec.value),
        criticals=[rec],
    )
