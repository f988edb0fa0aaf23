"""
Pydantic models for the YAML files greyplace reads: floor plans, ADL plans
and experiment configs.
"""
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ZoneSpec(BaseModel):
    """Named axis-aligned room rectangle"""
    name: str
    rect: Tuple[float, float, float, float]

    @field_validator("rect")
    @classmethod
    def _positive_extent(cls, rect):
        if rect[2] <= 0 or rect[3] <= 0:
            raise ValueError("zone width and height must be positive")
        return rect


class FloorPlanFile(BaseModel):
    """Schema of a floor-plan file (keys are normative)"""
    model_config = ConfigDict(extra="forbid")

    width: float = Field(gt=0)
    height: float = Field(gt=0)
    walls: List[Tuple[float, float, float, float]] = Field(default_factory=list)
    zones: List[ZoneSpec] = Field(default_factory=list)
    anchors: Dict[str, Tuple[float, float]]
    entry: Tuple[float, float]


class PlanEntrySpec(BaseModel):
    """One detailed activity of an ADL plan"""
    model_config = ConfigDict(extra="forbid")

    activity: str
    minutes: float = Field(gt=0)
    group: Optional[str] = None


class AdlPlanFile(BaseModel):
    """Schema of an ADL plan file"""
    entries: List[PlanEntrySpec] = Field(min_length=1)
    sampling_period_seconds: float = Field(default=3.0, gt=0)


class ScenarioConfig(BaseModel):
    floorplan: Optional[str] = None
    adl_plan: Optional[str] = None
    casas: Optional[str] = None


class ClassifierConfig(BaseModel):
    kind: Literal["forest", "knn"] = "forest"
    n_trees: int = Field(default=100, ge=1)
    max_depth: Optional[int] = Field(default=None, ge=1)
    min_leaf: int = Field(default=1, ge=1)
    k: int = Field(default=5, ge=1)
    window: int = Field(default=1, ge=1)
    n_jobs: int = Field(default=1)


class SimulatorConfig(BaseModel):
    occupants: int = Field(default=5, ge=1)
    radius: float = Field(default=1.0, gt=0)
    sampling_period_seconds: Optional[float] = Field(default=None, gt=0)
    walking_speed: float = Field(default=1.0, gt=0)
    dwell_sigma: float = Field(default=0.15, ge=0)
    cell_size: float = Field(default=0.25, gt=0)
    duration_jitter: float = Field(default=0.1, ge=0, lt=1)
    transit_label: Literal["next", "previous"] = "next"


class ReplayConfig(BaseModel):
    period_seconds: float = Field(default=3.0, gt=0)
    train_fraction: float = Field(default=0.7, gt=0, lt=1)
    unlabeled: Literal["other", "drop"] = "other"


class ObjectiveConfig(BaseModel):
    prior_budget_mode: Literal["charge", "free"] = "charge"
    memoize: bool = False


class SurrogateConfig(BaseModel):
    n_trees: int = Field(default=50, ge=1)
    min_leaf: int = Field(default=3, ge=1)
    sigma_floor: float = Field(default=1e-6, gt=0)


class SamplerConfig(BaseModel):
    n_random: int = Field(default=500, ge=0)
    n_neighbors: int = Field(default=500, ge=0)


class GAConfig(BaseModel):
    population: int = Field(default=10, ge=2)
    elite_fraction: float = Field(default=0.10, ge=0, le=1)
    parent_fraction: float = Field(default=0.20, gt=0, le=1)
    mutation_rate: float = Field(default=0.005, ge=0, le=1)
    penalty: float = Field(default=0.01, ge=0)


class DGBOConfig(BaseModel):
    dg_sigma_squared: bool = False
    snapshot_every: int = Field(default=10, ge=0)


Method = Literal["bo", "dgbo", "ga", "greedy"]


class ExperimentConfig(BaseModel):
    """Experiment matrix: methods x epsilons x sensor counts x seeds"""
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    scenario: ScenarioConfig
    mode: Literal["simulate", "replay"] = "simulate"
    methods: List[Method] = Field(min_length=1)
    epsilons: List[float] = Field(default_factory=lambda: [1.0])
    sensor_counts: List[int] = Field(default_factory=lambda: [5, 7, 9, 11, 13, 15])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    budget: int = Field(default=1000, ge=1)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    simulator: SimulatorConfig = Field(default_factory=SimulatorConfig)
    replay: ReplayConfig = Field(default_factory=ReplayConfig)
    objective: ObjectiveConfig = Field(default_factory=ObjectiveConfig)
    surrogate: SurrogateConfig = Field(default_factory=SurrogateConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    ga: GAConfig = Field(default_factory=GAConfig)
    dgbo: DGBOConfig = Field(default_factory=DGBOConfig)

    @field_validator("epsilons")
    @classmethod
    def _positive_epsilons(cls, values):
        if any(v <= 0 for v in values):
            raise ValueError("epsilons must be positive")
        return values

    @field_validator("sensor_counts")
    @classmethod
    def _positive_counts(cls, values):
        if any(v < 1 for v in values):
            raise ValueError("sensor counts must be >= 1")
        return values

    @model_validator(mode="after")
    def _scenario_matches_mode(self):
        if self.mode == "simulate":
            if not self.scenario.floorplan or not self.scenario.adl_plan:
                raise ValueError("simulate mode needs scenario.floorplan and scenario.adl_plan")
        elif not self.scenario.casas:
            raise ValueError("replay mode needs scenario.casas")
        return self
