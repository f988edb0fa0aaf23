"""
Pydantic models for optimization run output.
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class QueryRecord(BaseModel):
    """One charged query of a run and the incumbent after it"""
    query_index: int
    value: float
    incumbent: float


class RunReport(BaseModel):
    """Result of one optimizer run on one matrix cell"""
    method: str
    target_size: Optional[int] = None
    epsilon: Optional[float] = None
    seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    records: List[QueryRecord] = Field(default_factory=list)
    best_placement: List[int] = Field(default_factory=list)
    best_value: Optional[float] = None
    partial_placement: List[int] = Field(default_factory=list)
    budget_exhausted: bool = False
    grid_rows: Optional[int] = None
    grid_cols: Optional[int] = None
    snapshot_iterations: List[int] = Field(default_factory=list)

    @property
    def queries_used(self) -> int:
        return len(self.records)

    @property
    def incumbent_trace(self) -> List[float]:
        return [r.incumbent for r in self.records]

    @property
    def found(self) -> bool:
        return self.best_value is not None


class CellFailure(BaseModel):
    """A matrix cell that raised instead of producing a report"""
    method: str
    epsilon: Optional[float] = None
    target_size: Optional[int] = None
    seed: int
    error: str
