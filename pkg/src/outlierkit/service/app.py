"""FastAPI application wrapping the detection toolkit.

The service owns the critical value cache: every request that needs a
simulated critical value consults the table first and persists any new
entry.  The cache location is resolved from the factory argument, the
``OUTLIERKIT_CACHE`` environment variable, or a per-user default, in that
order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..cache import CriticalValueTable, cache_read, cache_write
from ..errors import DataError, OutlierKitError
from ..families import FAMILIES
from ..methods import BuiltMethod, CriticalRecord, build_method
from ..report import OutlierReport
from ..simulation import ContaminationSpec, run_experiment, significance_curve
from .schemas import (
    CriticalValueModel,
    CriticalValueRequest,
    CurvePoint,
    DetectRequest,
    DetectResponse,
    ExperimentCell,
    ExperimentRequest,
    ExperimentResponse,
    ExperimentRow,
    FamilyInfo,
    FitModel,
    HealthResponse,
    ObservationRow,
    SignificanceCurveRequest,
    SignificanceCurveResponse,
    StepModel,
)

ENV_CACHE = "OUTLIERKIT_CACHE"
HARD_MINIMUM_N = 15
SOFT_MINIMUM_N = 20


@dataclass
class ServiceSettings:
    cache_path: Path | None = None
    use_cache: bool = True


def default_cache_path() -> Path:
    env = os.environ.get(ENV_CACHE)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "outlierkit" / "critical-values.tsv"


class _CacheManager:
    def __init__(self, settings: ServiceSettings):
        self._settings = settings
        self._table: CriticalValueTable | None = None

    @property
    def path(self) -> Path | None:
        if not self._settings.use_cache:
            return None
        return self._settings.cache_path or default_cache_path()

    def table(self) -> CriticalValueTable | None:
        if not self._settings.use_cache:
            return None
        if self._table is None:
            path = self.path
            self._table = cache_read(path) if path and path.exists() else CriticalValueTable()
        return self._table

    def persist_if_grown(self, before: int) -> None:
        if self._table is not None and len(self._table) != before and self.path is not None:
            cache_write(self.path, self._table)


def _critical_models(records: list[CriticalRecord]) -> list[CriticalValueModel]:
    return [
        CriticalValueModel(
            method=r.key.method,
            family=r.key.family,
            estimator=r.key.estimator,
            n=r.key.n,
            s=r.key.s,
            alpha=r.key.alpha,
            side=r.key.side,
            value=r.value,
            replicates=r.replicates,
            seed=r.seed,
            rng_name=r.rng_name,
            created_at=r.created_at,
            cached=r.cached,
        )
        for r in records
    ]


def _label_list(report_indices: tuple[int, ...], labels: list[int]) -> list[int]:
    return sorted(labels[i] for i in report_indices)


def _detect_response(
    request: DetectRequest,
    report: OutlierReport,
    values: list[float],
    labels: list[int],
    built: BuiltMethod,
    extra_warnings: list[str],
) -> DetectResponse:
    z = report.stats["z_scores"]
    classification = ["none"] * len(values)
    for i in report.outlier_indices_right:
        classification[i] = "right"
    for i in report.outlier_indices_left:
        classification[i] = "left"
    observations = [
        ObservationRow(index=labels[i], value=values[i], z=float(z[i]), classification=classification[i])
        for i in range(len(values))
    ]
    steps = [
        StepModel(
            step=st.step_index,
            side=st.side,
            working_size=st.sample_size_used,
            u_values=list(st.u_values),
            d=st.d,
            rejected_index=None if st.rejected_position is None else labels[st.rejected_position],
            saturated_ranks=list(st.saturated_ranks),
        )
        for st in report.trail
    ]
    return DetectResponse(
        version=__version__,
        decision=report.decision,
        method=report.method,
        family=request.family,
        n=len(values),
        outliers=sorted(
            _label_list(report.outlier_indices_right, labels)
            + _label_list(report.outlier_indices_left, labels)
        ),
        outliers_right=_label_list(report.outlier_indices_right, labels),
        outliers_left=_label_list(report.outlier_indices_left, labels),
        fit=FitModel(mu=report.fit.mu_hat, sigma=report.fit.sigma_hat, estimator=report.fit.method),
        observations=observations,
        steps=steps,
        critical_values=_critical_models(built.criticals),
        warnings=list(report.warnings) + built.warnings + extra_warnings,
        config=request.model_dump(),
    )


def _build_cell_spec(cell: ExperimentCell) -> ContaminationSpec:
    c = cell.contaminant
    return ContaminationSpec(
        kind=c.kind,
        r=cell.r,
        side=cell.contamination_side,
        theta=c.theta,
        mu=c.mu,
        rho=c.rho,
        alpha_bar=cell.alpha_bar,
    )


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    app = FastAPI(
        title="outlierkit",
        version=__version__,
        description="Multiple outlier identification for location-scale and shape-scale families",
    )
    cache = _CacheManager(settings)

    @app.exception_handler(OutlierKitError)
    async def _domain_error(_, exc: OutlierKitError):
        from fastapi.responses import JSONResponse

        status = 422 if isinstance(exc, DataError) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        table = cache.table()
        return HealthResponse(
            status="ok",
            version=__version__,
            cache_path=str(cache.path) if cache.path else None,
            cache_entries=len(table) if table is not None else 0,
        )

    @app.get("/families", response_model=list[FamilyInfo])
    def families() -> list[FamilyInfo]:
        return [
            FamilyInfo(
                name=f.name,
                symmetric=f.symmetric,
                gamma_class=f.gamma_class,
                qn_constant=f.qn_constant,
            )
            for f in FAMILIES.values()
        ]

    @app.post("/detect", response_model=DetectResponse)
    def detect(request: DetectRequest) -> DetectResponse:
        values = list(request.values)
        n = len(values)
        labels = request.labels or list(range(1, n + 1))
        warnings: list[str] = []
        if n <= HARD_MINIMUM_N and not request.force:
            raise HTTPException(
                status_code=400,
                detail=(
                    f"n={n} is too small for a reliable decision (n <= {HARD_MINIMUM_N}); "
                    "pass force=true to proceed anyway"
                ),
            )
        if n < SOFT_MINIMUM_N:
            warnings.append(
                f"n={n} is below {SOFT_MINIMUM_N}; results rely on asymptotics and should be "
                "treated with caution"
            )

        work = np.asarray(values, dtype=float)
        if request.shape_scale:
            bad = np.flatnonzero(~(work > 0.0))
            if bad.size:
                raise HTTPException(
                    status_code=422,
                    detail=(
                        f"shape-scale transform needs positive data; observation "
                        f"{labels[int(bad[0])]} has value {values[int(bad[0])]!r}"
                    ),
                )
            work = np.log(work)
            warnings.append("values were log-transformed before classification")

        table = cache.table()
        before = len(table) if table is not None else 0
        built = build_method(
            request.method,
            request.family,
            n,
            request.alpha,
            request.side,
            request.s,
            request.estimator,
            use_exact_critical=request.use_exact_critical,
            critical_replicates=request.critical_replicates,
            seed=request.seed,
            table=table,
        )
        report = built.classifier(work)
        cache.persist_if_grown(before)
        return _detect_response(request, report, values, labels, built, warnings)

    @app.post("/critical-values", response_model=CriticalValueModel)
    def critical_values(request: CriticalValueRequest) -> CriticalValueModel:
        if request.method != "bp" and request.n is None:
            raise HTTPException(status_code=400, detail=f"{request.method} needs a sample size n")
        table = cache.table()
        before = len(table) if table is not None else 0
        n_for_build = request.n if request.n is not None else max(20, 2 * max(request.s, 1))
        built = build_method(
            request.method,
            request.family,
            n_for_build,
            request.alpha,
            request.side,
            request.s if request.s > 0 else None,
            request.estimator,
            use_exact_critical=request.method == "bp" and request.n is not None,
            critical_replicates=request.replicates,
            seed=request.seed,
            table=table,
        )
        cache.persist_if_grown(before)
        if not built.criticals:
            raise HTTPException(status_code=400, detail=f"{request.method} has no cacheable critical value")
        return _critical_models(built.criticals)[0]

    @app.post("/experiments", response_model=ExperimentResponse)
    def experiments(request: ExperimentRequest) -> ExperimentResponse:
        table = cache.table()
        before = len(table) if table is not None else 0
        rows: list[ExperimentRow] = []
        for cell in request.cells:
            spec = None
            try:
                spec = _build_cell_spec(cell)
                built = build_method(
                    cell.method,
                    cell.family,
                    cell.n,
                    cell.alpha,
                    cell.side,
                    cell.s,
                    cell.estimator,
                    critical_replicates=request.critical_replicates,
                    seed=request.seed,
                    table=table,
                )
                result = run_experiment(
                    built.classifier,
                    cell.family,
                    cell.n,
                    spec,
                    request.replicates,
                    request.seed,
                    label=cell.method,
                )
                rows.append(
                    ExperimentRow(
                        method=cell.method,
                        family=cell.family,
                        n=cell.n,
                        r=cell.r,
                        param=spec.param_label(),
                        d_oo=result.d_oo,
                        d_on=result.d_on,
                        d_no=result.d_no,
                        d_nn=result.d_nn,
                        significance=result.significance,
                        replicates=result.replicates,
                        seed=result.seed,
                    )
                )
            except (OutlierKitError, ValueError) as exc:
                rows.append(
                    ExperimentRow(
                        method=cell.method,
                        family=cell.family,
                        n=cell.n,
                        r=cell.r,
                        param=spec.param_label() if spec is not None else "-",
                        replicates=request.replicates,
                        seed=request.seed,
                        error=str(exc),
                    )
                )
        cache.persist_if_grown(before)
        return ExperimentResponse(version=__version__, rows=rows, config=request.model_dump())

    @app.post("/significance-curve", response_model=SignificanceCurveResponse)
    def curve(request: SignificanceCurveRequest) -> SignificanceCurveResponse:
        table = cache.table()
        before = len(table) if table is not None else 0

        def factory(n: int):
            s = request.s
            if s is None and request.method in ("rosner", "bolshev", "hawkins"):
                s = max(1, int(math.floor(0.4 * n)))
            built = build_method(
                request.method,
                request.family,
                n,
                request.alpha,
                request.side,
                s,
                request.estimator,
                critical_replicates=request.critical_replicates,
                seed=request.seed,
                table=table,
            )
            return built.classifier

        points = significance_curve(
            factory,
            request.family,
            request.n_grid,
            request.replicates,
            request.seed,
            label=request.method,
        )
        cache.persist_if_grown(before)
        return SignificanceCurveResponse(
            version=__version__,
            points=[CurvePoint(n=n, significance=sig) for n, sig in points],
            config=request.model_dump(),
        )

    return app


app = create_app()
