"""
The stochastic black-box f(x): a placement goes in, macro-F1 of an activity
classifier trained on the data that placement would produce comes out.
"""
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from schemas.config_files import ClassifierConfig, SimulatorConfig
from services.classifier import evaluate_loocv, evaluate_split
from services.dataset import filter_sensors, split_by_days
from services.floorplan import CandidateGrid, FloorPlan
from services.simulator import ADLPlanSpec, TraceDataset, WalkableGrid, generate_dataset
from utils.file_utils import read_csv, write_csv
from utils.seeding import query_rng

logger = logging.getLogger(__name__)

Evaluator = Callable[["Placement", np.random.Generator], float]


class BudgetExhaustedError(Exception):
    """Raised when a query is issued after the budget is spent"""
    pass


class InvalidPlacementError(Exception):
    """Raised when a placement is empty, has duplicates or is out of range"""
    pass


@dataclass(frozen=True, order=True)
class Placement:
    """Sorted, duplicate-free grid indices where sensors are installed"""
    indices: Tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise InvalidPlacementError("placement must contain at least one sensor")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise InvalidPlacementError(f"placement indices must be strictly increasing: {list(self.indices)}")
        if self.indices[0] < 0:
            raise InvalidPlacementError(f"negative grid index in {list(self.indices)}")

    @classmethod
    def of(cls, indices: Iterable[int], n_locations: Optional[int] = None) -> "Placement":
        values = [int(i) for i in indices]
        if len(set(values)) != len(values):
            raise InvalidPlacementError(f"duplicate grid index in {values}")
        placement = cls(tuple(sorted(values)))
        if n_locations is not None:
            placement.validate(n_locations)
        return placement

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Placement":
        return cls(tuple(int(i) for i in np.flatnonzero(np.asarray(bits))))

    @property
    def size(self) -> int:
        return len(self.indices)

    def validate(self, n_locations: int) -> None:
        if self.indices[-1] >= n_locations:
            raise InvalidPlacementError(f"grid index {self.indices[-1]} out of range [0, {n_locations})")

    def encode(self, n_locations: int) -> np.ndarray:
        bits = np.zeros(n_locations, dtype=np.uint8)
        bits[list(self.indices)] = 1
        return bits

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Observation:
    placement: Placement
    value: float
    query_index: int
    wall_time: float
    charged: bool = True


class SimulationEvaluator:
    """Simulate occupants under the placement, then leave-one-occupant-out F1"""

    def __init__(self, plan: FloorPlan, grid: CandidateGrid, spec: ADLPlanSpec,
                 simulator: Optional[SimulatorConfig] = None, classifier: Optional[ClassifierConfig] = None,
                 workers: int = 1):
        self.plan = plan
        self.grid = grid
        self.spec = spec
        self.simulator = simulator or SimulatorConfig()
        self.classifier = classifier or ClassifierConfig()
        self.workers = workers
        self.walk_grid = WalkableGrid(plan, self.simulator.cell_size)

    def dataset(self, placement: Placement, rng: np.random.Generator) -> TraceDataset:
        return generate_dataset(
            self.plan, self.grid, placement, self.spec,
            occupants=self.simulator.occupants, radius=self.simulator.radius,
            rng=rng, settings=self.simulator, workers=self.workers, walk_grid=self.walk_grid,
        )

    def __call__(self, placement: Placement, rng: np.random.Generator) -> float:
        simulation_rng, classifier_rng = rng.spawn(2)
        return evaluate_loocv(self.dataset(placement, simulation_rng), self.classifier, classifier_rng)


class ReplayEvaluator:
    """Filter a recorded dataset to the placement's sensors, then day-split F1"""

    def __init__(self, train: TraceDataset, test: TraceDataset, classifier: Optional[ClassifierConfig] = None):
        self.train = train
        self.test = test
        self.classifier = classifier or ClassifierConfig()

    @classmethod
    def from_dataset(cls, ds: TraceDataset, train_fraction: float = 0.7,
                     classifier: Optional[ClassifierConfig] = None) -> "ReplayEvaluator":
        train, test = split_by_days(ds, train_fraction)
        return cls(train, test, classifier)

    def __call__(self, placement: Placement, rng: np.random.Generator) -> float:
        keep = list(placement.indices)
        return evaluate_split(filter_sensors(self.train, keep), filter_sensors(self.test, keep), self.classifier, rng)


def _timed(evaluator: Evaluator, placement: Placement, rng: np.random.Generator) -> Tuple[float, float]:
    started = time.perf_counter()
    value = float(evaluator(placement, rng))
    return value, time.perf_counter() - started


class BudgetedObjective:
    """
    Query stream over an evaluator with a hard query budget.

    Query i draws its noise from a generator seeded by (run_seed, i), so a
    logged observation can be reproduced exactly.
    """

    def __init__(
        self,
        evaluator: Evaluator,
        n_locations: int,
        budget: int = 1000,
        run_seed: int = 0,
        mode: Literal["simulate", "replay", "custom"] = "simulate",
        prior_budget_mode: Literal["charge", "free"] = "charge",
        memoize: bool = False,
        workers: int = 1,
    ):
        if budget < 0:
            raise ValueError("budget must be non-negative")
        self.evaluator = evaluator
        self.n_locations = n_locations
        self.budget = budget
        self.run_seed = run_seed
        self.mode = mode
        self.prior_budget_mode = prior_budget_mode
        self.memoize = memoize
        self.workers = workers
        self.log: List[Observation] = []
        self.prior_log: List[Observation] = []
        self._memo: Dict[Placement, float] = {}

    @property
    def spent(self) -> int:
        return len(self.log)

    @property
    def remaining(self) -> int:
        return self.budget - self.spent

    def _check(self, placement: Placement) -> Placement:
        if not isinstance(placement, Placement):
            placement = Placement.of(placement)
        placement.validate(self.n_locations)
        return placement

    def _resolve(self, jobs: List[Tuple[Placement, np.random.Generator]]) -> List[Tuple[float, float]]:
        results: List[Optional[Tuple[float, float]]] = [None] * len(jobs)
        pending = []
        for k, (placement, rng) in enumerate(jobs):
            if self.memoize and placement in self._memo:
                results[k] = (self._memo[placement], 0.0)
            else:
                pending.append(k)
        if pending:
            computed = Parallel(n_jobs=self.workers)(
                delayed(_timed)(self.evaluator, jobs[k][0], jobs[k][1]) for k in pending
            )
            for k, result in zip(pending, computed):
                results[k] = result
                if self.memoize:
                    self._memo[jobs[k][0]] = result[0]
        return results

    def evaluate(self, placement: Placement) -> Observation:
        """Charge one query and evaluate f at the placement"""
        observations = self.evaluate_batch([placement])
        return observations[0]

    def evaluate_batch(self, placements: Sequence[Placement]) -> List[Observation]:
        """
        Evaluate an ordered batch; query indices follow submission order.

        Only as many placements as the remaining budget allows are
        evaluated; the caller sees a shorter result list.
        """
        placements = [self._check(p) for p in placements]
        if placements and self.remaining <= 0:
            raise BudgetExhaustedError(f"query budget of {self.budget} is spent")
        placements = placements[:self.remaining]
        start = self.spent
        jobs = [(p, query_rng(self.run_seed, start + k)) for k, p in enumerate(placements)]
        observations = []
        for k, (placement, (value, seconds)) in enumerate(zip(placements, self._resolve(jobs))):
            observation = Observation(placement, _clip(value), start + k, seconds)
            self.log.append(observation)
            observations.append(observation)
            logger.debug("query index=%d D=%d value=%.4f seconds=%.2f",
                         observation.query_index, placement.size, observation.value, seconds)
        return observations

    def evaluate_single_sensor(self, index: int) -> Observation:
        return self.evaluate_single_sensors([index])[0]

    def evaluate_single_sensors(self, indices: Sequence[int]) -> List[Observation]:
        """
        Single-sensor queries at the given grid locations.

        In `free` prior mode they are recorded in prior_log and do not
        consume budget.
        """
        placements = [self._check(Placement((int(i),))) for i in indices]
        if self.prior_budget_mode == "charge":
            return self.evaluate_batch(placements)
        jobs = [(p, query_rng(self.run_seed, "prior", p.indices[0])) for p in placements]
        observations = []
        for placement, (value, seconds) in zip(placements, self._resolve(jobs)):
            observation = Observation(placement, _clip(value), placement.indices[0], seconds, charged=False)
            self.prior_log.append(observation)
            observations.append(observation)
        return observations

    def reproduce(self, observation: Observation) -> float:
        """Re-run the evaluator with the observation's own query seed"""
        if observation.charged:
            rng = query_rng(self.run_seed, observation.query_index)
        else:
            rng = query_rng(self.run_seed, "prior", observation.placement.indices[0])
        return _clip(float(self.evaluator(observation.placement, rng)))


def _clip(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def log_frame(observations: Sequence[Observation]) -> pd.DataFrame:
    return pd.DataFrame({
        "query_index": [o.query_index for o in observations],
        "D": [o.placement.size for o in observations],
        "indices": [";".join(str(i) for i in o.placement.indices) for o in observations],
        "value": [o.value for o in observations],
        "seconds": [o.wall_time for o in observations],
    }, columns=["query_index", "D", "indices", "value", "seconds"])


def export_log(observations: Sequence[Observation], path: Union[str, Path]) -> None:
    """CSV: query_index,D,indices(semicolon-joined),value,seconds"""
    write_csv(log_frame(observations), path)


def read_log(path: Union[str, Path]) -> List[Observation]:
    frame = read_csv(path, dtype={"indices": str})
    return [
        Observation(
            placement=Placement(tuple(int(i) for i in str(row.indices).split(";"))),
            value=float(row.value),
            query_index=int(row.query_index),
            wall_time=float(row.seconds),
        )
        for row in frame.itertuples(index=False)
    ]
