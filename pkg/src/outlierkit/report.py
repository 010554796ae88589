"""Classification result containers shared by all detection methods."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .estimators import RobustFit

NO_OUTLIERS = "no_outliers"
OUTLIERS_FOUND = "outliers_found"


@dataclass(frozen=True)
class BpStepRecord:
    """One step of the stepwise extreme z-score search.

    ``u_values[i-1]`` is the transformed statistic of the i-th most extreme
    remaining observation at working sample size ``sample_size_used``;
    ``d`` is the largest rank whose statistic exceeds the critical value
    (0 when none does).  ``rejected_position`` is the 0-based position of
    the observation removed before the next step, or None at a final step.
    ``saturated_ranks`` lists ranks whose statistic left the support of the
    Frechet-type limit and was pinned at 0.
    """

    step_index: int
    side: str
    sample_size_used: int
    u_values: tuple[float, ...]
    d: int
    rejected_position: int | None = None
    saturated_ranks: tuple[int, ...] = ()


@dataclass(frozen=True)
class OutlierReport:
    """Per-observation classification outcome.

    Positions are 0-based indices into the classified sample; user-facing
    layers map them to 1-based observation numbers.
    """

    decision: str
    method: str
    outlier_indices_right: tuple[int, ...]
    outlier_indices_left: tuple[int, ...]
    fit: RobustFit
    trail: tuple[BpStepRecord, ...] = ()
    config: Any = None
    stats: dict[str, Any] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        empty = not self.outlier_indices_right and not self.outlier_indices_left
        if (self.decision == NO_OUTLIERS) != empty:
            raise AssertionError("decision is inconsistent with the declared index sets")
        if set(self.outlier_indices_right) & set(self.outlier_indices_left):
            raise AssertionError("left and right outlier sets overlap")

    @property
    def outliers_found(self) -> bool:
        return self.decision == OUTLIERS_FOUND

    @property
    def outlier_indices(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.outlier_indices_right) | set(self.outlier_indices_left)))
