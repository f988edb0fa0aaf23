"""
Search strategies over sensor placements: BO, DGBO, a genetic algorithm and
greedy forward selection. All of them spend queries through one
BudgetedObjective and report a per-query incumbent trace.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from schemas.config_files import DGBOConfig, GAConfig, SamplerConfig, SurrogateConfig
from schemas.reports import QueryRecord, RunReport
from services import acquisition, surrogate
from services.acquisition import InformationProfile
from services.objective import BudgetedObjective, BudgetExhaustedError, Observation, Placement

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 50

SnapshotHook = Callable[[int, InformationProfile], None]


class OptimizerError(Exception):
    """Raised when an optimizer is asked for an impossible search"""
    pass


@dataclass(frozen=True)
class CandidateSampler:
    """Random size-D subsets plus single-swap neighbours of the incumbent"""
    n_random: int = 500
    n_neighbors: int = 500

    @classmethod
    def from_config(cls, config: SamplerConfig) -> "CandidateSampler":
        return cls(n_random=config.n_random, n_neighbors=config.n_neighbors)


def _check_size(size: int, n_locations: int) -> None:
    if not 1 <= size <= n_locations:
        raise OptimizerError(f"cannot place {size} sensors on {n_locations} locations")


def random_placement(size: int, n_locations: int, rng: np.random.Generator) -> Placement:
    return Placement.of(rng.choice(n_locations, size=size, replace=False))


def propose_candidates(sampler: CandidateSampler, size: int, n_locations: int,
                       incumbent: Optional[Placement], rng: np.random.Generator) -> List[Placement]:
    """
    Candidate batch for the acquisition argmax, de-duplicated in draw order.

    Neighbours drop one incumbent index and add one uniformly random
    non-member.
    """
    _check_size(size, n_locations)
    candidates: Dict[Placement, None] = {}
    if sampler.n_random:
        keys = rng.random((sampler.n_random, n_locations))
        for row in np.argsort(keys, axis=1)[:, :size]:
            candidates.setdefault(Placement.of(row), None)
    if incumbent is not None and size < n_locations:
        members = np.asarray(incumbent.indices)
        outside = np.setdiff1d(np.arange(n_locations), members)
        drops = rng.integers(0, size, sampler.n_neighbors)
        adds = outside[rng.integers(0, len(outside), sampler.n_neighbors)]
        for drop, add in zip(drops, adds):
            swapped = members.copy()
            swapped[drop] = add
            candidates.setdefault(Placement.of(swapped), None)
    if not candidates:
        candidates[random_placement(size, n_locations, rng)] = None
    return list(candidates)


def _argmax(candidates: Sequence[Placement], scores: np.ndarray) -> Placement:
    best = scores.max()
    return min(c for c, s in zip(candidates, scores) if s == best)


class _Trace:
    """Incumbent bookkeeping over charged queries"""

    def __init__(self, target_size: Optional[int]):
        self.target_size = target_size
        self.records: List[QueryRecord] = []
        self.best: Optional[Observation] = None

    def counts(self, observation: Observation) -> bool:
        return self.target_size is None or observation.placement.size == self.target_size

    def add(self, observations: Sequence[Observation], eligible: bool = True) -> None:
        for observation in observations:
            if not observation.charged:
                continue
            if eligible and self.counts(observation) and (self.best is None or observation.value > self.best.value):
                self.best = observation
            self.records.append(QueryRecord(
                query_index=observation.query_index,
                value=observation.value,
                incumbent=self.best.value if self.best else 0.0,
            ))
            if len(self.records) % PROGRESS_EVERY == 0:
                logger.info("progress queries=%d incumbent=%.4f", len(self.records), self.records[-1].incumbent)

    @property
    def best_value(self) -> Optional[float]:
        return self.best.value if self.best else None

    @property
    def best_placement(self) -> Optional[Placement]:
        return self.best.placement if self.best else None


def _report(method: str, grid, trace: _Trace, target_size: Optional[int], seed: int = 0,
            delivered: bool = True, **extra) -> RunReport:
    best = trace.best if delivered else None
    return RunReport(
        method=method,
        target_size=target_size,
        epsilon=getattr(grid, "epsilon", None),
        seed=seed,
        records=trace.records,
        best_placement=list(best.placement.indices) if best else [],
        best_value=best.value if best else None,
        grid_rows=getattr(grid, "rows", 1),
        grid_cols=getattr(grid, "cols", grid.size),
        **extra,
    )


def run_bo(
    obj: BudgetedObjective,
    grid,
    size: int,
    rng: np.random.Generator,
    surrogate_params: Optional[SurrogateConfig] = None,
    sampler: Optional[CandidateSampler] = None,
    seed: int = 0,
) -> RunReport:
    """
    PRF + expected improvement over sampled size-D candidates, starting
    from one uniformly random placement. Runs until the budget is spent.
    """
    n_locations = grid.size
    _check_size(size, n_locations)
    surrogate_params = surrogate_params or SurrogateConfig()
    sampler = sampler or CandidateSampler()
    trace = _Trace(size)

    try:
        trace.add([obj.evaluate(random_placement(size, n_locations, rng))])
        while obj.remaining > 0:
            observed = [o for o in obj.log if o.placement.size == size]
            model = surrogate.fit(observed, n_locations, rng, surrogate_params)
            candidates = propose_candidates(sampler, size, n_locations, trace.best_placement, rng)
            mu, sigma = model.predict_many(candidates)
            scores = acquisition.ei(mu, sigma, trace.best_value)
            trace.add([obj.evaluate(_argmax(candidates, scores))])
    except BudgetExhaustedError:
        pass

    logger.info("bo done D=%d queries=%d best=%s", size, obj.spent, trace.best_value)
    return _report("bo", grid, trace, size, seed=seed)


def run_dgbo(
    obj: BudgetedObjective,
    grid,
    size: int,
    rng: np.random.Generator,
    surrogate_params: Optional[SurrogateConfig] = None,
    sampler: Optional[CandidateSampler] = None,
    params: Optional[DGBOConfig] = None,
    on_snapshot: Optional[SnapshotHook] = None,
    seed: int = 0,
) -> RunReport:
    """
    Distribution-guided BO.

    After a single-sensor prior sweep, each iteration scores candidates by
    EI plus the mean expected information gain of their regions, then
    credits the observed value back to the regions of the new placement.
    Iteration 0 is the prior profile; `on_snapshot` sees every
    `snapshot_every`-th iteration.
    """
    n_locations = grid.size
    _check_size(size, n_locations)
    surrogate_params = surrogate_params or SurrogateConfig()
    sampler = sampler or CandidateSampler()
    params = params or DGBOConfig()
    trace = _Trace(size)
    snapshots: List[int] = []

    def snapshot(iteration: int, profile: InformationProfile) -> None:
        if params.snapshot_every and iteration % params.snapshot_every == 0:
            snapshots.append(iteration)
            if on_snapshot is not None:
                on_snapshot(iteration, profile)

    try:
        profile = acquisition.init_priors(obj, grid, surrogate_params.sigma_floor)
    except BudgetExhaustedError:
        trace.add(obj.log)
        logger.warning("dgbo prior sweep truncated D=%d queries=%d", size, obj.spent)
        return _report("dgbo", grid, trace, size, seed=seed, budget_exhausted=True)
    trace.add(obj.log)
    snapshot(0, profile)

    iteration = 0
    try:
        first = obj.evaluate(random_placement(size, n_locations, rng))
        trace.add([first])
        acquisition.credit(profile, first.placement, first.value)
        while obj.remaining > 0:
            iteration += 1
            observed = [o for o in obj.log if o.placement.size == size]
            model = surrogate.fit(observed, n_locations, rng, surrogate_params)
            i_star = acquisition.incumbent_gain(profile, trace.best_placement)
            gains = acquisition.region_expected_gains(profile, i_star, params.dg_sigma_squared)
            candidates = propose_candidates(sampler, size, n_locations, trace.best_placement, rng)
            mu, sigma = model.predict_many(candidates)
            scores = acquisition.ei(mu, sigma, trace.best_value) + acquisition.alpha_dg_many(candidates, gains)
            profile.expected_gain_prev = gains
            snapshot(iteration, profile)

            observation = obj.evaluate(_argmax(candidates, scores))
            trace.add([observation])
            acquisition.credit(profile, observation.placement, observation.value)
    except BudgetExhaustedError:
        pass

    logger.info("dgbo done D=%d queries=%d iterations=%d best=%s", size, obj.spent, iteration, trace.best_value)
    return _report("dgbo", grid, trace, size, seed=seed, snapshot_iterations=snapshots)


def run_greedy(obj: BudgetedObjective, grid, size: int, seed: int = 0) -> RunReport:
    """
    Forward selection: each step sweeps every unused location in ascending
    order and keeps the best one (lowest index on ties).

    A sweep the budget cannot finish ends the run with budget_exhausted set
    and no delivered placement; the committed prefix is kept as
    partial_placement.
    """
    n_locations = grid.size
    _check_size(size, n_locations)
    trace = _Trace(size)
    chosen: List[int] = []
    exhausted = False

    for step in range(size):
        batch = [Placement.of(chosen + [i]) for i in range(n_locations) if i not in chosen]
        try:
            observations = obj.evaluate_batch(batch)
        except BudgetExhaustedError:
            observations = []
        if len(observations) < len(batch):
            trace.add(observations, eligible=False)
            exhausted = True
            logger.info("greedy sweep truncated step=%d evaluated=%d of %d", step + 1, len(observations), len(batch))
            break
        trace.add(observations)
        best = observations[0]
        for observation in observations[1:]:
            if observation.value > best.value:
                best = observation
        added = next(i for i in best.placement.indices if i not in chosen)
        chosen.append(added)
        logger.debug("greedy step=%d added=%d value=%.4f", step + 1, added, best.value)

    if exhausted:
        return _report("greedy", grid, trace, size, delivered=False, seed=seed,
                       partial_placement=sorted(chosen), budget_exhausted=True)
    logger.info("greedy done D=%d queries=%d best=%s", size, obj.spent, trace.best_value)
    return _report("greedy", grid, trace, size, seed=seed, partial_placement=sorted(chosen))


def two_point_crossover(a: np.ndarray, b: np.ndarray, rng: Optional[np.random.Generator] = None,
                        cuts: Optional[Tuple[int, int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Swap the genes in [lo, hi) between the parents. Cuts are two distinct
    positions that exclude the first and last gene boundary.
    """
    length = len(a)
    if cuts is None:
        if length < 3:
            return a.copy(), b.copy()
        cuts = tuple(sorted(rng.choice(np.arange(1, length), size=2, replace=False)))
    lo, hi = cuts
    if not 0 < lo < hi < length:
        raise OptimizerError(f"invalid crossover cuts {cuts} for length {length}")
    child_a, child_b = a.copy(), b.copy()
    child_a[lo:hi], child_b[lo:hi] = b[lo:hi], a[lo:hi]
    return child_a, child_b


def mutate(chromosome: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Flip every gene independently with probability `rate`"""
    flips = rng.random(len(chromosome)) < rate
    return np.where(flips, 1 - chromosome, chromosome).astype(chromosome.dtype)


def repair(chromosome: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """An empty chromosome gets one random gene set"""
    if chromosome.any():
        return chromosome
    fixed = np.zeros_like(chromosome)
    fixed[rng.integers(0, len(chromosome))] = 1
    return fixed


def next_generation(population: np.ndarray, fitness: np.ndarray, params: GAConfig,
                    rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Elites (by fitness, stable order) plus offspring bred from the top
    parent_fraction; returns (elites, offspring).
    """
    size = len(population)
    order = np.argsort(-fitness, kind="stable")
    n_elite = min(size, max(1, int(round(params.elite_fraction * size))))
    n_parents = max(1, int(round(params.parent_fraction * size)))
    parents = population[order[:n_parents]]

    offspring = []
    while len(offspring) < size - n_elite:
        a, b = parents[rng.integers(0, n_parents, size=2)]
        for child in two_point_crossover(a, b, rng):
            offspring.append(repair(mutate(child, params.mutation_rate, rng), rng))
    offspring = np.array(offspring[:size - n_elite], dtype=np.uint8).reshape(-1, population.shape[1])
    return order[:n_elite], offspring


def run_ga(obj: BudgetedObjective, grid, rng: np.random.Generator,
           params: Optional[GAConfig] = None, seed: int = 0) -> RunReport:
    """
    Bit-vector GA with fitness f(x) - penalty * popcount(x). The number of
    sensors is left to the search; the trace follows the raw f maximum.
    """
    params = params or GAConfig()
    n_locations = grid.size
    trace = _Trace(None)

    def evaluate(chromosomes: np.ndarray) -> np.ndarray:
        placements = [Placement.from_bits(c) for c in chromosomes]
        observations = obj.evaluate_batch(placements)
        trace.add(observations)
        return np.array([o.value - params.penalty * o.placement.size for o in observations])

    population = rng.integers(0, 2, size=(params.population, n_locations)).astype(np.uint8)
    population = np.array([repair(c, rng) for c in population])
    generations = 0
    try:
        fitness = evaluate(population)
        population = population[:len(fitness)]
        while obj.remaining > 0:
            elite_rows, offspring = next_generation(population, fitness, params, rng)
            offspring_fitness = evaluate(offspring)
            population = np.vstack([population[elite_rows], offspring[:len(offspring_fitness)]])
            fitness = np.concatenate([fitness[elite_rows], offspring_fitness])
            generations += 1
    except BudgetExhaustedError:
        pass

    logger.info("ga done generations=%d queries=%d best=%s", generations, obj.spent, trace.best_value)
    return _report("ga", grid, trace, None, seed=seed)
