"""
Occupant simulator: ADL schedules, walking/dwelling trajectories on a floor
plan and the motion-sensor trigger datasets they produce.
"""
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd
import shapely
from joblib import Parallel, delayed
from shapely.geometry import LineString

from schemas.config_files import AdlPlanFile, SimulatorConfig
from services.floorplan import CandidateGrid, FloorPlan, covers_many
from utils.file_utils import FileProcessingError, load_yaml_model, read_csv, write_csv

logger = logging.getLogger(__name__)

Point2 = Tuple[float, float]
Cell = Tuple[int, int]


class SimulationError(Exception):
    """Raised when an occupant cannot carry out the plan"""
    pass


# --- ADL plans -------------------------------------------------------------

@dataclass(frozen=True)
class PlanEntry:
    activity: str
    minutes: float
    group: Optional[str] = None


@dataclass(frozen=True)
class ADLPlanSpec:
    entries: Tuple[PlanEntry, ...]
    sampling_period_seconds: float = 3.0

    def __post_init__(self):
        if not self.entries:
            raise SimulationError("ADL plan has no entries")
        for entry in self.entries:
            if entry.minutes <= 0:
                raise SimulationError(f"activity '{entry.activity}' has non-positive duration {entry.minutes}")
        if self.sampling_period_seconds <= 0:
            raise SimulationError("sampling period must be positive")

    @property
    def total_minutes(self) -> float:
        return sum(e.minutes for e in self.entries)

    @property
    def labels(self) -> Tuple[str, ...]:
        """Distinct activity labels in plan order"""
        return tuple(dict.fromkeys(e.activity for e in self.entries))

    @property
    def steps(self) -> int:
        return int(round(self.total_minutes * 60.0 / self.sampling_period_seconds))


@dataclass(frozen=True)
class ScheduledActivity:
    activity: str
    seconds: float


def plan_from_model(model: AdlPlanFile) -> ADLPlanSpec:
    return ADLPlanSpec(
        entries=tuple(PlanEntry(e.activity.strip(), float(e.minutes), e.group) for e in model.entries),
        sampling_period_seconds=model.sampling_period_seconds,
    )


def load_adl_plan(path: Union[str, Path]) -> ADLPlanSpec:
    return plan_from_model(load_yaml_model(path, AdlPlanFile))


def sample_schedule(spec: ADLPlanSpec, rng: np.random.Generator, jitter: float = 0.1) -> List[ScheduledActivity]:
    """
    Draw one concrete daily schedule.

    Members of a shuffle group are permuted among the positions the group
    occupies; every duration is scaled by U[1-jitter, 1+jitter] and the
    result renormalized to the plan's total duration.
    """
    order = list(spec.entries)
    groups: Dict[str, List[int]] = {}
    for position, entry in enumerate(spec.entries):
        if entry.group is not None:
            groups.setdefault(entry.group, []).append(position)
    for name in sorted(groups):
        positions = groups[name]
        shuffled = rng.permutation(len(positions))
        members = [spec.entries[p] for p in positions]
        for slot, pick in zip(positions, shuffled):
            order[slot] = members[pick]

    seconds = np.array([e.minutes * 60.0 for e in order])
    if jitter > 0:
        seconds = seconds * rng.uniform(1.0 - jitter, 1.0 + jitter, size=len(order))
        seconds *= spec.total_minutes * 60.0 / seconds.sum()
    return [ScheduledActivity(e.activity, float(s)) for e, s in zip(order, seconds)]


# --- Walking ---------------------------------------------------------------

class WalkableGrid:
    """Occupancy grid over the plan; edges crossing a wall are removed"""

    def __init__(self, plan: FloorPlan, cell_size: float = 0.25):
        self.plan = plan
        self.cell_size = cell_size
        self.rows = max(1, math.ceil(round(plan.height / cell_size, 9)))
        self.cols = max(1, math.ceil(round(plan.width / cell_size, 9)))
        self.graph = self._build_graph()
        self._routes: Dict[Tuple[Cell, Cell], List[Cell]] = {}

    def center(self, cell: Cell) -> Point2:
        r, c = cell
        x = min((c + 0.5) * self.cell_size, self.plan.width)
        y = min((r + 0.5) * self.cell_size, self.plan.height)
        return (x, y)

    def cell_of(self, point: Point2) -> Cell:
        r = min(max(int(point[1] // self.cell_size), 0), self.rows - 1)
        c = min(max(int(point[0] // self.cell_size), 0), self.cols - 1)
        return (r, c)

    def _build_graph(self) -> nx.Graph:
        graph = nx.grid_2d_graph(self.rows, self.cols)
        for r in range(self.rows - 1):
            for c in range(self.cols):
                if c + 1 < self.cols:
                    graph.add_edge((r, c), (r + 1, c + 1))
                if c > 0:
                    graph.add_edge((r, c), (r + 1, c - 1))

        edges = list(graph.edges())
        segments = np.array([[self.center(a), self.center(b)] for a, b in edges], dtype=float)
        walls = self.plan.wall_geometry
        if walls is not None and len(edges):
            blocked = shapely.intersects(shapely.linestrings(segments), walls)
            graph.remove_edges_from(e for e, b in zip(edges, blocked) if b)
        for (a, b), seg in zip(edges, segments):
            if graph.has_edge(a, b):
                graph[a][b]["weight"] = float(np.hypot(*(seg[1] - seg[0])))
        return graph

    def route(self, start: Point2, goal: Point2, activity: str = "") -> LineString:
        """Shortest walkable polyline from start to goal"""
        key = (self.cell_of(start), self.cell_of(goal))
        if key not in self._routes:
            def heuristic(a, b):
                (ax, ay), (bx, by) = self.center(a), self.center(b)
                return math.hypot(ax - bx, ay - by)
            try:
                self._routes[key] = nx.astar_path(self.graph, key[0], key[1], heuristic=heuristic, weight="weight")
            except nx.NetworkXNoPath:
                raise SimulationError(f"anchor of activity '{activity}' is unreachable from {tuple(start)}")
        start, goal = tuple(start), tuple(goal)
        centers = [self.center(c) for c in self._routes[key]]
        if len(centers) == 1:
            return LineString([start, goal])
        # start and goal connect straight to the second (second-to-last) center unless a wall is in the way
        keep_first = not self._clear(start, centers[1])
        keep_last = not self._clear(centers[-2], goal)
        middle = centers[1:-1]
        if not middle and not keep_first and not keep_last and not self._clear(start, goal):
            keep_first = keep_last = True
        points = [start] + centers[:1] * keep_first + middle + centers[-1:] * keep_last + [goal]
        return LineString(points)

    def _clear(self, a: Point2, b: Point2) -> bool:
        walls = self.plan.wall_geometry
        return walls is None or not LineString([a, b]).intersects(walls)


# --- Trajectories and datasets ---------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    occupant_id: int
    times: np.ndarray
    positions: np.ndarray
    labels: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class OccupantSeries:
    """Bit vectors (T x D) and class codes (T) of one occupant"""
    times: np.ndarray
    bits: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class TraceDataset:
    series: Tuple[OccupantSeries, ...]
    sensor_names: Tuple[str, ...]
    class_names: Tuple[str, ...]
    origin: Optional[datetime] = None

    def __post_init__(self):
        if not self.series:
            raise SimulationError("dataset has no occupant series")
        for s in self.series:
            if s.bits.ndim != 2 or s.bits.shape[1] != len(self.sensor_names):
                raise SimulationError(f"bit vectors must have length {len(self.sensor_names)}, got shape {s.bits.shape}")
            if len(s.times) != len(s.labels) or s.bits.shape[0] != len(s.labels):
                raise SimulationError("series times, bits and labels differ in length")
            if len(s.labels) and (s.labels.min() < 0 or s.labels.max() >= len(self.class_names)):
                raise SimulationError("label code outside the class set")

    @property
    def occupants(self) -> int:
        return len(self.series)

    @property
    def sensor_count(self) -> int:
        return len(self.sensor_names)

    def to_csv_dir(self, path: Union[str, Path]) -> List[Path]:
        """One CSV per occupant: t,<sensor...>,activity"""
        path = Path(path)
        written = []
        for i, s in enumerate(self.series):
            frame = pd.DataFrame(s.bits.astype(int), columns=list(self.sensor_names))
            frame.insert(0, "t", s.times)
            frame["activity"] = [self.class_names[c] for c in s.labels]
            target = path / f"occupant_{i}.csv"
            write_csv(frame, target)
            written.append(target)
        return written

    @classmethod
    def from_csv_dir(cls, path: Union[str, Path], class_names: Optional[Sequence[str]] = None) -> "TraceDataset":
        files = sorted(Path(path).glob("occupant_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
        if not files:
            raise FileProcessingError(f"no occupant CSVs under '{path}'")
        frames = [read_csv(f, dtype={"activity": str}) for f in files]
        sensors = tuple(frames[0].columns[1:-1])
        names = tuple(class_names) if class_names else tuple(
            dict.fromkeys(label for frame in frames for label in frame["activity"])
        )
        codes = {name: i for i, name in enumerate(names)}
        series = tuple(
            OccupantSeries(
                times=frame["t"].to_numpy(dtype=float),
                bits=frame[list(sensors)].to_numpy(dtype=np.uint8),
                labels=np.array([codes[a] for a in frame["activity"]], dtype=int),
            )
            for frame in frames
        )
        return cls(series=series, sensor_names=sensors, class_names=names)


def simulate_occupant(
    schedule: Sequence[ScheduledActivity],
    plan: FloorPlan,
    rng: np.random.Generator,
    settings: Optional[SimulatorConfig] = None,
    period: float = 3.0,
    occupant_id: int = 0,
    walk_grid: Optional[WalkableGrid] = None,
) -> Trajectory:
    """
    Walk from the entry point to each activity's anchor along the shortest
    walkable path, then dwell there with Gaussian positional noise.

    Walking time is taken out of the activity's own duration, so the
    trajectory length is fixed by the schedule.
    """
    settings = settings or SimulatorConfig()
    walk_grid = walk_grid or WalkableGrid(plan, settings.cell_size)
    for item in schedule:
        if item.activity not in plan.anchors:
            raise SimulationError(f"activity '{item.activity}' has no anchor in the floor plan")

    seconds = np.array([item.seconds for item in schedule])
    boundaries = np.concatenate([[0], np.rint(np.cumsum(seconds) / period).astype(int)])

    total = int(boundaries[-1])
    positions = np.empty((total, 2))
    labels: List[str] = []
    current = tuple(plan.entry_point)
    previous_activity: Optional[str] = None

    for k, item in enumerate(schedule):
        start, stop = int(boundaries[k]), int(boundaries[k + 1])
        n = stop - start
        if n <= 0:
            continue
        anchor = plan.anchors[item.activity]
        path = walk_grid.route(current, anchor, item.activity)
        walk_seconds = path.length / settings.walking_speed
        local = np.arange(n) * period
        walking = local < walk_seconds

        if walking.any():
            distances = local[walking] * settings.walking_speed
            walked = shapely.line_interpolate_point(path, distances)
            positions[start:start + int(walking.sum())] = shapely.get_coordinates(walked)
        dwell = int((~walking).sum())
        if dwell:
            noise = rng.normal(0.0, settings.dwell_sigma, size=(dwell, 2))
            points = np.asarray(anchor) + noise
            points[:, 0] = np.clip(points[:, 0], 0.0, plan.width)
            points[:, 1] = np.clip(points[:, 1], 0.0, plan.height)
            positions[start + int(walking.sum()):stop] = points

        transit = item.activity
        if settings.transit_label == "previous" and previous_activity is not None:
            transit = previous_activity
        labels.extend([transit] * int(walking.sum()) + [item.activity] * dwell)

        if walking.all():
            current = tuple(shapely.get_coordinates(shapely.line_interpolate_point(path, n * period * settings.walking_speed))[0])
        else:
            current = tuple(anchor)
        previous_activity = item.activity

    return Trajectory(
        occupant_id=occupant_id,
        times=np.arange(total) * period,
        positions=positions,
        labels=tuple(labels),
    )


def _placement_indices(placement) -> Tuple[int, ...]:
    return tuple(int(i) for i in getattr(placement, "indices", placement))


def _simulate_one(occupant_id, spec, plan, rng, settings, period, walk_grid):
    schedule = sample_schedule(spec, rng, settings.duration_jitter)
    return simulate_occupant(schedule, plan, rng, settings, period, occupant_id, walk_grid)


def generate_dataset(
    plan: FloorPlan,
    grid: CandidateGrid,
    placement,
    spec: ADLPlanSpec,
    occupants: int,
    radius: float,
    rng: np.random.Generator,
    settings: Optional[SimulatorConfig] = None,
    workers: int = 1,
    walk_grid: Optional[WalkableGrid] = None,
) -> TraceDataset:
    """
    Simulate independent occupants and record, per sampling step, which
    sensors of the placement see them.

    Each occupant draws from its own child generator, and results are
    assembled in occupant order, so output does not depend on workers.
    """
    indices = _placement_indices(placement)
    if not indices:
        raise SimulationError("placement must contain at least one sensor")
    if occupants < 1:
        raise SimulationError(f"need at least one occupant, got {occupants}")
    settings = settings or SimulatorConfig()
    period = settings.sampling_period_seconds or spec.sampling_period_seconds
    walk_grid = walk_grid or WalkableGrid(plan, settings.cell_size)

    children = rng.spawn(occupants)
    trajectories = Parallel(n_jobs=workers)(
        delayed(_simulate_one)(i, spec, plan, children[i], settings, period, walk_grid)
        for i in range(occupants)
    )

    regions = [grid.region(i, radius) for i in indices]
    codes = {name: c for c, name in enumerate(spec.labels)}
    series = []
    for trajectory in trajectories:
        bits = np.zeros((len(trajectory), len(regions)), dtype=np.uint8)
        for j, region in enumerate(regions):
            bits[:, j] = covers_many(region, trajectory.positions, plan)
        series.append(OccupantSeries(
            times=trajectory.times,
            bits=bits,
            labels=np.array([codes[a] for a in trajectory.labels], dtype=int),
        ))
    logger.debug("simulated occupants=%d sensors=%d steps=%d", occupants, len(indices), len(series[0]))
    return TraceDataset(
        series=tuple(series),
        sensor_names=tuple(f"L{i}" for i in indices),
        class_names=spec.labels,
    )
