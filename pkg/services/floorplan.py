"""
Indoor geometry: floor plans, the candidate sensor grid and motion-sensor
activation regions.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import shapely
from shapely.geometry import MultiLineString, Point

from schemas.config_files import FloorPlanFile
from utils.file_utils import load_yaml_model, parse_yaml_model

Point2 = Tuple[float, float]
Rect = Tuple[float, float, float, float]


class FloorPlanError(Exception):
    """Raised when a floor plan or candidate grid is invalid"""
    pass


@dataclass(frozen=True)
class Zone:
    """Named axis-aligned room rectangle (x, y, w, h)"""
    name: str
    rect: Rect

    def contains(self, point: Point2) -> bool:
        x, y, w, h = self.rect
        return x <= point[0] <= x + w and y <= point[1] <= y + h


@dataclass(frozen=True, eq=False)
class FloorPlan:
    width: float
    height: float
    walls: Tuple[Rect, ...] = ()
    zones: Tuple[Zone, ...] = ()
    anchors: Dict[str, Point2] = field(default_factory=dict)
    entry_point: Point2 = (0.0, 0.0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise FloorPlanError(f"plan dimensions must be positive, got {self.width}x{self.height}")
        for wall in self.walls:
            x1, y1, x2, y2 = wall
            if math.hypot(x2 - x1, y2 - y1) == 0:
                raise FloorPlanError(f"wall {list(wall)} has zero length")
        for zone in self.zones:
            x, y, w, h = zone.rect
            if x < 0 or y < 0 or x + w > self.width or y + h > self.height:
                raise FloorPlanError(f"zone '{zone.name}' extends outside the {self.width}x{self.height} plan")
        for activity, point in self.anchors.items():
            if not self.in_bounds(point):
                raise FloorPlanError(f"anchor '{activity}' at {list(point)} lies outside the {self.width}x{self.height} plan")
        if not self.in_bounds(self.entry_point):
            raise FloorPlanError(f"entry point {list(self.entry_point)} lies outside the plan")

    def in_bounds(self, point: Point2) -> bool:
        return 0.0 <= point[0] <= self.width and 0.0 <= point[1] <= self.height

    @cached_property
    def wall_geometry(self) -> Optional[MultiLineString]:
        if not self.walls:
            return None
        return MultiLineString([((x1, y1), (x2, y2)) for x1, y1, x2, y2 in self.walls])

    def zone_of(self, point: Point2) -> Optional[str]:
        for zone in self.zones:
            if zone.contains(point):
                return zone.name
        return None

    def zone(self, name: str) -> Zone:
        for zone in self.zones:
            if zone.name == name:
                return zone
        raise FloorPlanError(f"unknown zone '{name}'")


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Row-major lattice of candidate sensor locations"""
    epsilon: float
    rows: int
    cols: int
    locations: np.ndarray

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def cell(self, index: int) -> Tuple[int, int]:
        if not 0 <= index < self.size:
            raise FloorPlanError(f"grid index {index} out of range [0, {self.size})")
        return divmod(index, self.cols)

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise FloorPlanError(f"cell ({row}, {col}) outside a {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def region(self, index: int, radius: float = 1.0) -> "ActivationRegion":
        self.cell(index)
        x, y = self.locations[index]
        return ActivationRegion(center_index=index, center=(float(x), float(y)), radius=radius)

    def indices_in_rect(self, rect: Rect) -> List[int]:
        x, y, w, h = rect
        inside = (
            (self.locations[:, 0] >= x) & (self.locations[:, 0] <= x + w)
            & (self.locations[:, 1] >= y) & (self.locations[:, 1] <= y + h)
        )
        return [int(i) for i in np.flatnonzero(inside)]

    def to_raster(self, values: Sequence[float]) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise FloorPlanError(f"expected {self.size} values, got {values.shape}")
        return values.reshape(self.rows, self.cols)


@dataclass(frozen=True)
class ActivationRegion:
    center_index: int
    center: Point2
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise FloorPlanError(f"activation radius must be positive, got {self.radius}")


def _interior_count(extent: float, epsilon: float) -> int:
    # round() guards against 8/0.1 = 79.99999...
    return math.ceil(round(extent / epsilon, 9)) - 1


def build_grid(plan: FloorPlan, epsilon: float) -> CandidateGrid:
    """
    Discretize the plan into H x W interior candidate locations.

    H = ceil(height/eps) - 1 and W = ceil(width/eps) - 1; points are spaced
    evenly so that every location sits strictly inside the plan.
    """
    if epsilon <= 0:
        raise FloorPlanError(f"grid spacing must be positive, got {epsilon}")
    rows = _interior_count(plan.height, epsilon)
    cols = _interior_count(plan.width, epsilon)
    if rows < 1:
        raise FloorPlanError(f"degenerate grid: height {plan.height} gives {rows} rows at spacing {epsilon}")
    if cols < 1:
        raise FloorPlanError(f"degenerate grid: width {plan.width} gives {cols} columns at spacing {epsilon}")

    step_x = plan.width / (cols + 1)
    step_y = plan.height / (rows + 1)
    rr, cc = np.divmod(np.arange(rows * cols), cols)
    locations = np.column_stack([(cc + 1) * step_x, (rr + 1) * step_y]).astype(float)
    locations.setflags(write=False)
    return CandidateGrid(epsilon=epsilon, rows=rows, cols=cols, locations=locations)


def covers(region: ActivationRegion, point: Point2, plan: FloorPlan) -> bool:
    """True iff the point is within the radius and in line of sight of the center"""
    return bool(covers_many(region, np.asarray([point], dtype=float), plan)[0])


def covers_many(region: ActivationRegion, points: np.ndarray, plan: FloorPlan) -> np.ndarray:
    """Vectorized covers over an (n, 2) array of points"""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    center = np.asarray(region.center, dtype=float)
    in_range = np.hypot(points[:, 0] - center[0], points[:, 1] - center[1]) <= region.radius
    walls = plan.wall_geometry
    if walls is None or not in_range.any():
        return in_range

    candidates = np.flatnonzero(in_range)
    targets = points[candidates]
    same = np.all(targets == center, axis=1)
    blocked = np.zeros(len(candidates), dtype=bool)
    if (~same).any():
        segments = np.stack([np.broadcast_to(center, targets[~same].shape), targets[~same]], axis=1)
        blocked[~same] = shapely.intersects(shapely.linestrings(segments), walls)
    if same.any():
        blocked[same] = Point(center).intersects(walls)
    in_range[candidates[blocked]] = False
    return in_range


def plan_from_model(model: FloorPlanFile) -> FloorPlan:
    return FloorPlan(
        width=model.width,
        height=model.height,
        walls=tuple(tuple(float(v) for v in wall) for wall in model.walls),
        zones=tuple(Zone(name=z.name, rect=tuple(float(v) for v in z.rect)) for z in model.zones),
        anchors={name.strip(): (float(p[0]), float(p[1])) for name, p in model.anchors.items()},
        entry_point=(float(model.entry[0]), float(model.entry[1])),
    )


def load_floorplan(source: str) -> FloorPlan:
    """
    Parse floor-plan YAML text.

    Raises:
        ConfigFileError: syntax or schema problems (line / field path)
        FloorPlanError: geometry that violates the plan invariants
    """
    return plan_from_model(parse_yaml_model(source, FloorPlanFile, source="floorplan"))


def load_floorplan_file(path: Union[str, Path]) -> FloorPlan:
    return plan_from_model(load_yaml_model(path, FloorPlanFile))
