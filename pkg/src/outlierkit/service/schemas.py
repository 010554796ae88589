"""Request/response models of the detection service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

FamilyName = Literal[
    "normal", "extreme_value_i", "extreme_value_ii", "logistic", "laplace", "cauchy"
]
MethodName = Literal["bp", "dg", "rosner", "bolshev", "hawkins"]
SideName = Literal["left", "right", "two"]
EstimatorName = Literal["robust", "ml"]
ContaminantKind = Literal["exponential", "truncated_normal"]
ContaminationSide = Literal["left", "right", "both"]


class FitModel(BaseModel):
    mu: float
    sigma: float
    estimator: str


class ObservationRow(BaseModel):
    index: int = Field(description="1-based observation number")
    value: float
    z: float
    classification: Literal["none", "left", "right"]


class StepModel(BaseModel):
    step: int
    side: str
    working_size: int
    u_values: list[float]
    d: int
    rejected_index: int | None = None
    saturated_ranks: list[int] = []


class CriticalValueModel(BaseModel):
    method: str
    family: str
    estimator: str
    n: int | None = None
    s: int
    alpha: float
    side: str
    value: float
    replicates: int
    seed: int
    rng_name: str
    created_at: str
    cached: bool


class DetectRequest(BaseModel):
    values: list[float] = Field(min_length=2)
    labels: list[int] | None = Field(
        default=None, description="1-based observation numbers matching values"
    )
    method: MethodName = "bp"
    family: FamilyName = "normal"
    side: SideName = "two"
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    s: int | None = Field(default=None, ge=1)
    estimator: EstimatorName = "robust"
    seed: int = 20210521
    critical_replicates: int = Field(default=100_000, ge=10_000)
    use_exact_critical: bool = False
    shape_scale: bool = False
    force: bool = False

    @model_validator(mode="after")
    def _check_labels(self):
        if self.labels is not None and len(self.labels) != len(self.values):
            raise ValueError("labels must match values in length")
        return self


class DetectResponse(BaseModel):
    version: str
    decision: Literal["no_outliers", "outliers_found"]
    method: str
    family: str
    n: int
    outliers: list[int]
    outliers_right: list[int]
    outliers_left: list[int]
    fit: FitModel
    observations: list[ObservationRow]
    steps: list[StepModel] = []
    critical_values: list[CriticalValueModel] = []
    warnings: list[str] = []
    config: dict


class CriticalValueRequest(BaseModel):
    method: Literal["bp", "dg", "bolshev", "hawkins"] = "bp"
    family: FamilyName = "normal"
    estimator: EstimatorName = "robust"
    n: int | None = Field(default=None, ge=2, description="omit for the asymptotic entry (bp only)")
    s: int = Field(default=5, ge=0)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    side: SideName = "two"
    replicates: int = Field(default=100_000, ge=10_000)
    seed: int = 20210521


class ContaminantModel(BaseModel):
    kind: ContaminantKind
    theta: float | None = Field(default=None, gt=0.0)
    mu: float | None = None
    rho: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_params(self):
        if self.kind == "exponential" and self.theta is None:
            raise ValueError("exponential contamination needs theta")
        if self.kind == "truncated_normal" and (self.mu is None or self.rho is None):
            raise ValueError("truncated normal contamination needs mu and rho")
        return self


class ExperimentCell(BaseModel):
    method: MethodName
    family: FamilyName = "normal"
    n: int = Field(ge=4)
    r: int = Field(ge=0)
    contaminant: ContaminantModel
    contamination_side: ContaminationSide = "both"
    side: SideName = "two"
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    alpha_bar: float = Field(default=0.05, gt=0.0, lt=1.0)
    s: int | None = Field(default=None, ge=1)
    estimator: EstimatorName = "robust"


class ExperimentRequest(BaseModel):
    cells: list[ExperimentCell] = Field(min_length=1)
    replicates: int = Field(ge=1)
    seed: int = 0
    critical_replicates: int = Field(default=100_000, ge=10_000)


class ExperimentRow(BaseModel):
    method: str
    family: str
    n: int
    r: int
    param: str
    d_oo: float | None = None
    d_on: float | None = None
    d_no: float | None = None
    d_nn: float | None = None
    significance: float | None = None
    replicates: int
    seed: int
    error: str | None = None


class ExperimentResponse(BaseModel):
    version: str
    rows: list[ExperimentRow]
    config: dict


class SignificanceCurveRequest(BaseModel):
    method: MethodName = "bp"
    family: FamilyName = "normal"
    n_grid: list[int] = Field(min_length=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    side: SideName = "two"
    s: int | None = Field(default=None, ge=1)
    estimator: EstimatorName = "robust"
    replicates: int = Field(ge=1)
    seed: int = 0
    critical_replicates: int = Field(default=100_000, ge=10_000)


class CurvePoint(BaseModel):
    n: int
    significance: float


class SignificanceCurveResponse(BaseModel):
    version: str
    points: list[CurvePoint]
    config: dict


class FamilyInfo(BaseModel):
    name: str
    symmetric: bool
    gamma_class: str
    qn_constant: float


class HealthResponse(BaseModel):
    status: str
    version: str
    cache_path: str | None
    cache_entries: int
