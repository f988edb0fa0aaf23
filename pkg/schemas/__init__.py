from schemas.config_files import (
    AdlPlanFile,
    ExperimentConfig,
    FloorPlanFile,
    PlanEntrySpec,
    ZoneSpec,
)
from schemas.reports import CellFailure, QueryRecord, RunReport

__all__ = [
    "AdlPlanFile",
    "ExperimentConfig",
    "FloorPlanFile",
    "PlanEntrySpec",
    "ZoneSpec",
    "CellFailure",
    "QueryRecord",
    "RunReport",
]
