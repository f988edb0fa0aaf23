"""
Experiment harness: builds scenarios from config, runs the
(method x epsilon x D x seed) matrix into a RunStore and derives summary,
convergence, heatmap and information-profile outputs from stored reports.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import Config, get_config
from schemas.config_files import ExperimentConfig
from schemas.reports import CellFailure, RunReport
from services.acquisition import profile_frame
from services.dataset import DatasetError, SensorInventory, load_casas_file, rasterize
from services.floorplan import CandidateGrid, FloorPlanError, build_grid, load_floorplan_file
from services.objective import BudgetedObjective, Observation, ReplayEvaluator, SimulationEvaluator
from services.optimizers import CandidateSampler, run_bo, run_dgbo, run_ga, run_greedy
from services.simulator import SimulationError, WalkableGrid, load_adl_plan
from store.run_store import CellKey, RunStore, format_epsilon, format_size
from utils.file_utils import ConfigFileError, load_yaml_model, read_csv, write_csv, write_matrix_csv, write_pgm
from utils.seeding import derive_seed, query_rng

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["method", "epsilon", "D", "mean", "std", "seeds"]
CONVERGENCE_COLUMNS = ["epsilon", "D", "target", "dgbo_hit", "bo_hit", "reduction_percent", "dgbo_final", "bo_final"]
MISSING = "-"
UNREACHED = "unreached"


class HarnessError(Exception):
    """Raised when reports cannot support the requested analysis"""
    pass


def _resolve(path: Optional[str], base_dir: Path) -> Optional[str]:
    if not path:
        return path
    candidate = Path(path)
    if not candidate.is_absolute():
        beside = base_dir / candidate
        candidate = beside if beside.exists() or not candidate.exists() else candidate
    if not candidate.exists():
        raise ConfigFileError(f"scenario file not found: {path}")
    return str(candidate.resolve())


def resolve_scenario_paths(config: ExperimentConfig, base_dir: Union[str, Path]) -> ExperimentConfig:
    """Scenario paths are relative to the config file; all must exist"""
    base_dir = Path(base_dir)
    scenario = config.scenario.model_copy(update={
        "floorplan": _resolve(config.scenario.floorplan, base_dir),
        "adl_plan": _resolve(config.scenario.adl_plan, base_dir),
        "casas": _resolve(config.scenario.casas, base_dir),
    })
    return config.model_copy(update={"scenario": scenario})


def load_experiment_config(path: Union[str, Path], settings: Optional[Config] = None,
                           casas: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment YAML file.

    GREYPLACE_SEED, when set, replaces the file's seed list. A `casas` path
    switches the experiment to replay mode on that log.

    Raises:
        ConfigFileError: unreadable file, schema violation or missing scenario file
    """
    path = Path(path)
    updates = None
    if casas is not None:
        if not Path(casas).exists():
            raise ConfigFileError(f"CASAS log not found: {casas}")
        updates = {"mode": "replay", "scenario": {"casas": str(Path(casas).resolve())}}
    config = resolve_scenario_paths(load_yaml_model(path, ExperimentConfig, updates), path.parent)
    settings = settings or get_config()
    if settings.seed_override is not None:
        logger.info("seed override seeds=%s", settings.seed_override)
        config = config.model_copy(update={"seeds": settings.seed_override})
    return config


class Scenario:
    """Loaded scenario data plus per-epsilon grids and evaluators"""

    def __init__(self, config: ExperimentConfig, workers: int = 1):
        self.config = config
        self.workers = workers
        self._grids: Dict[Optional[float], Any] = {}
        self._evaluators: Dict[Optional[float], Any] = {}
        if config.mode == "simulate":
            self.plan = load_floorplan_file(config.scenario.floorplan)
            self.spec = load_adl_plan(config.scenario.adl_plan)
        else:
            events, inventory, diagnostics = load_casas_file(config.scenario.casas)
            logger.info("casas loaded %s", " ".join(f"{k}={v}" for k, v in diagnostics.as_dict().items()))
            self.inventory = inventory
            self.dataset = rasterize(
                events, inventory, config.replay.period_seconds,
                extra_annotations=diagnostics.orphan_annotations,
                unlabeled=config.replay.unlabeled,
            )

    def grid(self, epsilon: Optional[float]) -> Union[CandidateGrid, SensorInventory]:
        if self.config.mode == "replay":
            return self.inventory
        if epsilon not in self._grids:
            self._grids[epsilon] = build_grid(self.plan, epsilon)
        return self._grids[epsilon]

    def evaluator(self, epsilon: Optional[float]):
        if epsilon not in self._evaluators:
            if self.config.mode == "replay":
                self._evaluators[epsilon] = ReplayEvaluator.from_dataset(
                    self.dataset, self.config.replay.train_fraction, self.config.classifier,
                )
            else:
                self._evaluators[epsilon] = SimulationEvaluator(
                    self.plan, self.grid(epsilon), self.spec, self.config.simulator, self.config.classifier,
                    workers=self.workers,
                )
        return self._evaluators[epsilon]


def load_scenario(config: ExperimentConfig, workers: int = 1) -> Scenario:
    """Load scenario files; invalid geometry or plans are reported as config errors"""
    try:
        return Scenario(config, workers)
    except (FloorPlanError, SimulationError, DatasetError) as e:
        raise ConfigFileError(f"invalid scenario: {e}") from e


def validate_scenario(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Load everything a run needs without running it: grid sizes per epsilon,
    and for simulation every plan activity must have a reachable anchor.
    """
    scenario = load_scenario(config)
    facts: Dict[str, Any] = {"mode": config.mode, "cells": len(matrix_cells(config))}
    if config.mode == "replay":
        facts["sensors"] = scenario.inventory.size
        facts["windows"] = len(scenario.dataset.series[0])
        return facts

    try:
        facts["locations"] = {format_epsilon(e): scenario.grid(e).size for e in config.epsilons}
        walk_grid = WalkableGrid(scenario.plan, config.simulator.cell_size)
        for activity in scenario.spec.labels:
            if activity not in scenario.plan.anchors:
                raise SimulationError(f"activity '{activity}' has no anchor in the floor plan")
            walk_grid.route(scenario.plan.entry_point, scenario.plan.anchors[activity], activity)
    except (FloorPlanError, SimulationError) as e:
        raise ConfigFileError(f"invalid scenario: {e}") from e
    facts["activities"] = len(scenario.spec.labels)
    return facts


def matrix_cells(config: ExperimentConfig) -> List[CellKey]:
    """Every cell of the matrix; GA picks its own D and gets one cell per (epsilon, seed)"""
    epsilons = list(config.epsilons) if config.mode == "simulate" else [None]
    cells = []
    for method in config.methods:
        sizes = [None] if method == "ga" else list(config.sensor_counts)
        for epsilon in epsilons:
            for size in sizes:
                for seed in config.seeds:
                    cells.append(CellKey(method, epsilon, size, seed))
    return cells


def _config_snapshot(config: ExperimentConfig, run_seed: int) -> Dict[str, Any]:
    snapshot = config.model_dump(exclude={"name", "methods", "epsilons", "sensor_counts", "seeds"})
    snapshot["run_seed"] = run_seed
    return snapshot


def run_cell(scenario: Scenario, key: CellKey, workers: int = 1) -> Tuple[RunReport, List[Observation], Dict[int, pd.DataFrame]]:
    """Run one optimizer on one cell; returns the report, query log and profile snapshots"""
    config = scenario.config
    grid = scenario.grid(key.epsilon)
    run_seed = derive_seed(key.seed, format_epsilon(key.epsilon), format_size(key.size))
    obj = BudgetedObjective(
        scenario.evaluator(key.epsilon),
        n_locations=grid.size,
        budget=config.budget,
        run_seed=run_seed,
        mode=config.mode,
        prior_budget_mode=config.objective.prior_budget_mode,
        memoize=config.objective.memoize,
        workers=workers,
    )
    rng = query_rng(key.seed, "search", key.method, format_epsilon(key.epsilon), format_size(key.size))
    sampler = CandidateSampler.from_config(config.sampler)
    profiles: Dict[int, pd.DataFrame] = {}

    if key.method == "bo":
        report = run_bo(obj, grid, key.size, rng, config.surrogate, sampler, seed=key.seed)
    elif key.method == "dgbo":
        report = run_dgbo(
            obj, grid, key.size, rng, config.surrogate, sampler, config.dgbo,
            on_snapshot=lambda n, profile: profiles.__setitem__(n, profile_frame(profile, grid)),
            seed=key.seed,
        )
    elif key.method == "greedy":
        report = run_greedy(obj, grid, key.size, seed=key.seed)
    elif key.method == "ga":
        report = run_ga(obj, grid, rng, config.ga, seed=key.seed)
    else:
        raise HarnessError(f"unknown method '{key.method}'")

    report = report.model_copy(update={"config": _config_snapshot(config, run_seed)})
    return report, list(obj.log), profiles


def run_matrix(config: ExperimentConfig, out_dir: Union[str, Path], workers: int = 1) -> pd.DataFrame:
    """
    Run every missing cell into out_dir and rebuild summary.csv.

    Completed cells are skipped. A cell that raises is recorded in
    failures.csv and the matrix moves on.
    """
    store = RunStore(out_dir)
    scenario = load_scenario(config, workers)
    cells = matrix_cells(config)
    failures: List[CellFailure] = []
    logger.info("matrix start name=%s cells=%d out=%s", config.name, len(cells), out_dir)

    for key in cells:
        if store.is_complete(key):
            logger.info("cell skipped %s", key)
            continue
        try:
            report, observations, profiles = run_cell(scenario, key, workers)
            store.write_cell(key, report, observations, profiles)
            logger.info("cell done %s best=%s queries=%d", key, report.best_value, report.queries_used)
        except Exception as e:
            logger.error("cell failed %s error=%s", key, e)
            failures.append(CellFailure(
                method=key.method, epsilon=key.epsilon, target_size=key.size, seed=key.seed,
                error=f"{type(e).__name__}: {e}",
            ))

    store.record_failures(failures)
    summary = summarize(report for _, report in store.iter_reports())
    write_csv(summary, store.root / "summary.csv")
    write_csv(best_sizes(summary), store.root / "best.csv")
    logger.info("matrix done cells=%d failures=%d", len(cells), len(failures))
    return summary


def _group_key(report: RunReport) -> Tuple[str, str, str]:
    return report.method, format_epsilon(report.epsilon), format_size(report.target_size)


def group_reports(reports: Iterable[RunReport]) -> Dict[Tuple[str, str, str], List[RunReport]]:
    groups: Dict[Tuple[str, str, str], List[RunReport]] = {}
    for report in reports:
        groups.setdefault(_group_key(report), []).append(report)
    for members in groups.values():
        members.sort(key=lambda r: r.seed)
    return dict(sorted(groups.items()))


def summarize(reports: Iterable[RunReport]) -> pd.DataFrame:
    """
    One row per (method, epsilon, D): mean and sample std of the best values
    over seeds. A group where any run delivered no placement gets '-'. The
    GA row's D is the median size of its best placements.
    """
    rows = []
    for (method, epsilon, size), members in group_reports(reports).items():
        if size == "auto":
            size = float(np.median([len(r.best_placement) for r in members]))
        if all(r.found for r in members):
            values = pd.Series([r.best_value for r in members], dtype=float)
            mean, std = values.mean(), values.std()
        else:
            mean = std = MISSING
        rows.append([method, epsilon, size, mean, std, len(members)])
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def best_sizes(summary: pd.DataFrame) -> pd.DataFrame:
    """
    Best-performing sensor count per (method, epsilon): the summary row with
    the highest mean, ties to the smaller D. A (method, epsilon) where no D
    delivered a placement for every seed is left out.
    """
    frame = summary.assign(
        _mean=pd.to_numeric(summary["mean"], errors="coerce"),
        _size=pd.to_numeric(summary["D"], errors="coerce"),
    ).dropna(subset=["_mean"])
    frame = frame.sort_values(["method", "epsilon", "_mean", "_size"],
                              ascending=[True, True, False, True], kind="mergesort")
    return frame.groupby(["method", "epsilon"], sort=True).head(1)[SUMMARY_COLUMNS].reset_index(drop=True)


def read_summary(path: Union[str, Path]) -> pd.DataFrame:
    frame = read_csv(path, dtype={"epsilon": str, "D": str})
    for column in ("mean", "std"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    return frame


def mean_incumbent_trace(reports: Sequence[RunReport]) -> np.ndarray:
    """Pointwise mean by query position; shorter traces hold their last value"""
    traces = [r.incumbent_trace for r in reports if r.records]
    if not traces:
        return np.zeros(0)
    length = max(len(t) for t in traces)
    padded = np.array([t + [t[-1]] * (length - len(t)) for t in traces], dtype=float)
    return padded.mean(axis=0)


def first_hit(trace: Sequence[float], target: float) -> Optional[int]:
    """Number of queries after which the trace first reaches target"""
    hits = np.flatnonzero(np.asarray(trace, dtype=float) >= target)
    return int(hits[0]) + 1 if len(hits) else None


@dataclass(frozen=True)
class ConvergenceResult:
    target: float
    dgbo_hit: Optional[int]
    bo_hit: Optional[int]
    dgbo_final: float
    bo_final: float

    @property
    def reduction_percent(self) -> Optional[float]:
        """100 * (dgbo - bo) / bo over first-hit query counts; negative means DGBO was faster"""
        if self.dgbo_hit is None or self.bo_hit is None:
            return None
        return 100.0 * (self.dgbo_hit - self.bo_hit) / self.bo_hit

    def row(self) -> List[Any]:
        reduction = self.reduction_percent
        return [
            self.target,
            UNREACHED if self.dgbo_hit is None else self.dgbo_hit,
            UNREACHED if self.bo_hit is None else self.bo_hit,
            UNREACHED if reduction is None else reduction,
            self.dgbo_final,
            self.bo_final,
        ]


def ci_lower_bound(values: Sequence[float], z: float = 1.96) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.mean() - z * values.std(ddof=1) / np.sqrt(len(values)))


def convergence_analysis(dgbo_reports: Sequence[RunReport], bo_reports: Sequence[RunReport],
                         target: Optional[float] = None) -> ConvergenceResult:
    """
    First query counts at which the seed-mean incumbents of DGBO and BO reach
    the lower 95% bound of DGBO's final performance (or an explicit target).
    """
    if len(dgbo_reports) < 2 or len(bo_reports) < 2:
        raise HarnessError(
            f"convergence analysis needs at least 2 seeds per method, got dgbo={len(dgbo_reports)} bo={len(bo_reports)}"
        )
    dgbo_mean = mean_incumbent_trace(dgbo_reports)
    bo_mean = mean_incumbent_trace(bo_reports)
    if target is None:
        finals = [r.incumbent_trace[-1] if r.records else 0.0 for r in dgbo_reports]
        target = ci_lower_bound(finals)
    return ConvergenceResult(
        target=float(target),
        dgbo_hit=first_hit(dgbo_mean, target),
        bo_hit=first_hit(bo_mean, target),
        dgbo_final=float(dgbo_mean[-1]) if len(dgbo_mean) else 0.0,
        bo_final=float(bo_mean[-1]) if len(bo_mean) else 0.0,
    )


def best_size_convergence(groups: Dict[Tuple[str, str, str], List[RunReport]],
                          target: Optional[float] = None) -> pd.DataFrame:
    """DGBO vs BO convergence per epsilon, at DGBO's best-performing D"""
    best = best_sizes(summarize(r for members in groups.values() for r in members))
    rows = []
    for _, row in best[best["method"] == "dgbo"].iterrows():
        epsilon, size = row["epsilon"], str(row["D"])
        if ("bo", epsilon, size) not in groups:
            continue
        result = convergence_analysis(groups[("dgbo", epsilon, size)], groups[("bo", epsilon, size)], target)
        rows.append([epsilon, size, *result.row()])
    return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)


def heatmap(reports: Sequence[RunReport]) -> np.ndarray:
    """Per grid cell, the fraction of runs whose best placement uses it"""
    if not reports:
        raise HarnessError("heatmap needs at least one report")
    shapes = {(r.grid_rows, r.grid_cols) for r in reports}
    if len(shapes) != 1:
        raise HarnessError(f"reports cover different grids: {sorted(shapes)}")
    rows, cols = shapes.pop()
    counts = np.zeros(rows * cols)
    for report in reports:
        counts[report.best_placement] += 1
    return (counts / len(reports)).reshape(rows, cols)


def profile_snapshot(store: RunStore, cell: Path, iteration: int) -> np.ndarray:
    """Expected-gain raster of a stored DGBO run at the given iteration"""
    report = store.read_report(cell)
    if iteration not in report.snapshot_iterations:
        raise HarnessError(
            f"no profile snapshot at iteration {iteration}; available: {report.snapshot_iterations}"
        )
    frame = store.read_profile(cell, iteration)
    return frame["expected_gain"].to_numpy(dtype=float).reshape(report.grid_rows, report.grid_cols)


def profile_change(before: np.ndarray, after: np.ndarray, floor: float = 1e-6) -> float:
    """Mean absolute relative change between two profile rasters"""
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    return float(np.mean(np.abs(after - before) / np.maximum(np.abs(before), floor)))


def _normalized(raster: np.ndarray) -> np.ndarray:
    peak = np.nanmax(raster) if raster.size else 0.0
    return raster / peak if peak > 0 else raster


def build_reports(in_dir: Union[str, Path], convergence: bool = False, heatmaps: bool = False,
                  profile_iter: Optional[int] = None, target: Optional[float] = None) -> List[Path]:
    """Rebuild summary.csv and the requested derived outputs; returns the written paths"""
    store = RunStore(in_dir)
    stored = list(store.iter_reports())
    if not stored:
        raise HarnessError(f"no run reports under {in_dir}")
    reports = [report for _, report in stored]
    written = []

    summary = summarize(reports)
    for name, frame in (("summary.csv", summary), ("best.csv", best_sizes(summary))):
        path = store.root / name
        write_csv(frame, path)
        written.append(path)
    groups = group_reports(reports)

    if convergence:
        rows = []
        for (method, epsilon, size), members in groups.items():
            if method != "dgbo" or ("bo", epsilon, size) not in groups:
                continue
            result = convergence_analysis(members, groups[("bo", epsilon, size)], target)
            rows.append([epsilon, size, *result.row()])
        if not rows:
            raise HarnessError("convergence analysis needs matching dgbo and bo cells")
        path = store.root / "convergence.csv"
        write_csv(pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS), path)
        written.append(path)
        at_best = best_size_convergence(groups, target)
        if not at_best.empty:
            path = store.root / "convergence_best.csv"
            write_csv(at_best, path)
            written.append(path)

    if heatmaps:
        for (method, epsilon, size), members in groups.items():
            raster = heatmap(members)
            stem = store.root / f"heatmap_{method}_eps_{epsilon}_D_{size}"
            write_matrix_csv(raster, stem.with_suffix(".csv"))
            write_pgm(raster, stem.with_suffix(".pgm"))
            written.extend([stem.with_suffix(".csv"), stem.with_suffix(".pgm")])

    if profile_iter is not None:
        cells = [(cell, report) for cell, report in stored
                 if report.method == "dgbo" and profile_iter in report.snapshot_iterations]
        if not cells:
            raise HarnessError(f"no dgbo run has a profile snapshot at iteration {profile_iter}")
        for cell, report in cells:
            raster = profile_snapshot(store, cell, profile_iter)
            stem = store.root / (
                f"profile_eps_{format_epsilon(report.epsilon)}_D_{format_size(report.target_size)}"
                f"_seed_{report.seed}_iter_{profile_iter}"
            )
            write_matrix_csv(raster, stem.with_suffix(".csv"))
            write_pgm(_normalized(raster), stem.with_suffix(".pgm"))
            written.extend([stem.with_suffix(".csv"), stem.with_suffix(".pgm")])

    logger.info("reports written count=%d dir=%s", len(written), in_dir)
    return written
