"""
Acceptance-scale tendency runs. Deselected by default; run with `pytest -m slow`.
"""
import numpy as np
import pytest

from config import get_config
from schemas.config_files import ClassifierConfig, DGBOConfig, ReplayConfig, SimulatorConfig
from scripts.manual_placement import evaluate_full_inventory
from services.acquisition import profile_frame
from services.classifier import macro_f1
from services.dataset import load_casas_file, rasterize
from services.floorplan import build_grid, load_floorplan_file
from services.harness import (
    first_hit,
    group_reports,
    load_experiment_config,
    mean_incumbent_trace,
    profile_change,
    run_matrix,
)
from services.objective import BudgetedObjective, Placement, ReplayEvaluator, SimulationEvaluator
from services.optimizers import CandidateSampler, run_bo, run_dgbo, run_ga, run_greedy
from services.simulator import load_adl_plan
from store.run_store import RunStore
from utils.seeding import query_rng

SEEDS = [0, 1, 2, 3, 4]


def test_manual_placement_on_fixture(data_dir):
    scores = evaluate_full_inventory(
        data_dir / "casas" / "aruba_fixture.txt", reps=2,
        replay=ReplayConfig(period_seconds=60), classifier=ClassifierConfig(n_trees=5),
    )
    assert scores.shape == (2,)
    assert np.all((scores >= 0) & (scores <= 1))


@pytest.mark.slow
def test_planted_optimum(open_grid, zone_fraction, planted_zone):
    objective = zone_fraction(planted_zone, noise=0.01)
    sampler = CandidateSampler(n_random=200, n_neighbors=200)
    hits = {"bo": 0, "dgbo": 0}
    for seed in SEEDS:
        for method in ("bo", "dgbo", "ga", "greedy"):
            obj = BudgetedObjective(objective, n_locations=open_grid.size, budget=200, run_seed=seed)
            rng = query_rng(seed, "search", method)
            if method == "bo":
                report = run_bo(obj, open_grid, 3, rng, sampler=sampler, seed=seed)
            elif method == "dgbo":
                report = run_dgbo(obj, open_grid, 3, rng, sampler=sampler, seed=seed)
            elif method == "ga":
                report = run_ga(obj, open_grid, rng, seed=seed)
            else:
                report = run_greedy(obj, open_grid, 3, seed=seed)
            assert obj.spent <= 200
            if method in hits and report.best_value is not None and report.best_value >= 0.99:
                hits[method] += 1
    assert hits["bo"] >= 4
    assert hits["dgbo"] >= 4


@pytest.mark.slow
def test_dgbo_sample_efficiency(data_dir, tmp_path):
    config = load_experiment_config(data_dir / "experiments" / "t1.yaml")
    config = config.model_copy(update={
        "methods": ["bo", "dgbo"],
        "epsilons": [1.0],
        "sensor_counts": [9],
        "seeds": SEEDS,
        "budget": 300,
        "objective": config.objective.model_copy(update={"prior_budget_mode": "free"}),
    })
    run_matrix(config, tmp_path, workers=get_config().workers)
    groups = group_reports(report for _, report in RunStore(tmp_path).iter_reports())
    bo = {r.seed: r for r in groups[("bo", "1", "9")]}
    dgbo = {r.seed: r for r in groups[("dgbo", "1", "9")]}

    target = float(mean_incumbent_trace(list(bo.values()))[-1])
    never = config.budget + 1
    faster = 0
    for seed in SEEDS:
        dgbo_hit = first_hit(dgbo[seed].incumbent_trace, target) or never
        bo_hit = first_hit(bo[seed].incumbent_trace, target) or never
        faster += dgbo_hit <= bo_hit
    assert faster >= 3

    dgbo_final = float(mean_incumbent_trace(list(dgbo.values()))[-1])
    assert dgbo_final >= target - 0.02


@pytest.mark.slow
def test_expected_gain_settles(data_dir):
    plan = load_floorplan_file(data_dir / "floorplans" / "t1.yaml")
    spec = load_adl_plan(data_dir / "plans" / "table1.yaml")
    grid = build_grid(plan, 1.0)
    evaluator = SimulationEvaluator(plan, grid, spec, SimulatorConfig(), ClassifierConfig(n_trees=50))
    obj = BudgetedObjective(evaluator, n_locations=grid.size, budget=61, run_seed=0,
                            prior_budget_mode="free", workers=get_config().workers)
    rasters = {}
    run_dgbo(
        obj, grid, 9, query_rng(0, "search", "dgbo"), params=DGBOConfig(snapshot_every=10),
        on_snapshot=lambda n, profile: rasters.__setitem__(
            n, profile_frame(profile, grid)["expected_gain"].to_numpy().reshape(grid.rows, grid.cols)),
    )

    assert {0, 10, 50, 60} <= set(rasters)
    assert profile_change(rasters[50], rasters[60]) < profile_change(rasters[0], rasters[10])

    def zone_mean(name):
        cells = grid.indices_in_rect(plan.zone(name).rect)
        return float(rasters[50].ravel()[cells].mean())

    assert min(zone_mean("kitchen"), zone_mean("living")) > zone_mean("balcony")


def _nearest(grid, point):
    return int(np.argmin(np.hypot(*(grid.locations - np.asarray(point)).T)))


def _constant_baseline(dataset):
    """Mean fold macro-F1 of always predicting the training majority"""
    n = len(dataset.class_names)
    scores = []
    for i, held in enumerate(dataset.series):
        training = np.concatenate([s.labels for j, s in enumerate(dataset.series) if j != i])
        majority = int(np.bincount(training, minlength=n).argmax())
        scores.append(macro_f1(np.full(len(held), majority), held.labels, n))
    return float(np.mean(scores))


@pytest.mark.slow
def test_single_sensor_kitchen_and_corner(data_dir):
    plan = load_floorplan_file(data_dir / "floorplans" / "t1.yaml")
    spec = load_adl_plan(data_dir / "plans" / "table1.yaml")
    grid = build_grid(plan, 1.0)
    evaluator = SimulationEvaluator(plan, grid, spec, SimulatorConfig(), ClassifierConfig(n_trees=20))
    kitchen = Placement.of([_nearest(grid, plan.anchors["Clean kitchen"])])
    corner = Placement.of([_nearest(grid, (0.5, 0.5))])

    silent = evaluator.dataset(corner, np.random.default_rng(1))
    assert all(s.bits.sum() == 0 for s in silent.series)
    baseline = _constant_baseline(silent)
    assert evaluator(kitchen, np.random.default_rng(2)) > baseline
    assert evaluator(corner, np.random.default_rng(3)) == pytest.approx(baseline, abs=0.02)


@pytest.mark.slow
def test_aruba_replay():
    path = get_config().aruba_path
    if path is None or not path.exists():
        pytest.skip("GREYPLACE_ARUBA_PATH is not set")

    scores = evaluate_full_inventory(path, reps=1)
    assert 0.0 <= scores[0] <= 1.0

    events, inventory, diagnostics = load_casas_file(path)
    dataset = rasterize(events, inventory, extra_annotations=diagnostics.orphan_annotations)
    obj = BudgetedObjective(ReplayEvaluator.from_dataset(dataset), n_locations=inventory.size,
                            budget=100, mode="replay")
    report = run_bo(obj, inventory, 5, query_rng(0, "search", "bo"))
    assert report.queries_used == 100
    assert report.found
