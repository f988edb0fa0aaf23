import numpy as np
import pytest

from schemas.config_files import ClassifierConfig, SimulatorConfig
from services.dataset import load_casas_file, rasterize
from services.floorplan import build_grid
from services.objective import (
    BudgetedObjective,
    BudgetExhaustedError,
    InvalidPlacementError,
    Placement,
    ReplayEvaluator,
    SimulationEvaluator,
    export_log,
    read_log,
)


def noisy(placement, rng):
    return 0.1 * placement.size + rng.normal(0.0, 0.05)


class CountingEvaluator:
    def __init__(self):
        self.calls = 0

    def __call__(self, placement, rng):
        self.calls += 1
        return rng.random()


def test_placement_validation():
    assert Placement.of([5, 1, 3]).indices == (1, 3, 5)
    assert Placement.from_bits([0, 1, 0, 1]).indices == (1, 3)
    assert Placement.of([2, 0]).encode(4).tolist() == [1, 0, 1, 0]
    with pytest.raises(InvalidPlacementError):
        Placement(())
    with pytest.raises(InvalidPlacementError):
        Placement.of([1, 1])
    with pytest.raises(InvalidPlacementError):
        Placement((3, 2))
    with pytest.raises(InvalidPlacementError):
        Placement.of([0, 10], n_locations=10)
    with pytest.raises(InvalidPlacementError):
        Placement.of([-1, 2])


def test_budget_is_enforced():
    obj = BudgetedObjective(noisy, n_locations=10, budget=1000)
    observations = obj.evaluate_batch([Placement.of([i % 10]) for i in range(1000)])
    assert len(observations) == 1000
    assert obj.spent == 1000
    assert obj.remaining == 0
    with pytest.raises(BudgetExhaustedError):
        obj.evaluate(Placement.of([1]))
    assert obj.spent == 1000


def test_batch_truncates_to_remaining_budget():
    obj = BudgetedObjective(noisy, n_locations=10, budget=3)
    observations = obj.evaluate_batch([Placement.of([i]) for i in range(5)])
    assert [o.query_index for o in observations] == [0, 1, 2]
    assert [o.placement.indices for o in observations] == [(0,), (1,), (2,)]


def test_out_of_range_placement_is_rejected_before_charging():
    obj = BudgetedObjective(noisy, n_locations=4, budget=5)
    with pytest.raises(InvalidPlacementError):
        obj.evaluate(Placement.of([4]))
    assert obj.spent == 0


def test_log_fidelity():
    obj = BudgetedObjective(noisy, n_locations=10, budget=20, run_seed=123)
    for k in range(20):
        obj.evaluate(Placement.of([k % 10, (k + 3) % 10]))
    assert [o.query_index for o in obj.log] == list(range(20))
    for observation in obj.log:
        assert obj.reproduce(observation) == observation.value


def test_same_seed_same_values():
    placements = [Placement.of([i, i + 1]) for i in range(5)]
    a = BudgetedObjective(noisy, n_locations=10, budget=5, run_seed=9).evaluate_batch(placements)
    b = BudgetedObjective(noisy, n_locations=10, budget=5, run_seed=9).evaluate_batch(placements)
    c = BudgetedObjective(noisy, n_locations=10, budget=5, run_seed=10).evaluate_batch(placements)
    assert [o.value for o in a] == [o.value for o in b]
    assert [o.value for o in a] != [o.value for o in c]


def test_batch_matches_sequential_and_workers():
    placements = [Placement.of([i]) for i in range(6)]
    sequential = BudgetedObjective(noisy, n_locations=10, budget=6, run_seed=4)
    for p in placements:
        sequential.evaluate(p)
    batched = BudgetedObjective(noisy, n_locations=10, budget=6, run_seed=4, workers=2)
    batched.evaluate_batch(placements)
    assert [o.value for o in sequential.log] == [o.value for o in batched.log]


def test_values_are_clipped():
    obj = BudgetedObjective(lambda p, rng: 1.7, n_locations=3, budget=2)
    assert obj.evaluate(Placement.of([0])).value == 1.0
    obj.evaluator = lambda p, rng: -0.2
    assert obj.evaluate(Placement.of([0])).value == 0.0


def test_free_priors_do_not_consume_budget():
    obj = BudgetedObjective(noisy, n_locations=6, budget=2, prior_budget_mode="free", run_seed=1)
    priors = obj.evaluate_single_sensors(range(6))
    assert len(priors) == 6
    assert obj.spent == 0
    assert len(obj.prior_log) == 6
    assert not any(o.charged for o in priors)
    assert [o.query_index for o in priors] == list(range(6))
    assert obj.reproduce(priors[3]) == priors[3].value


def test_charged_priors_consume_budget():
    obj = BudgetedObjective(noisy, n_locations=6, budget=10, prior_budget_mode="charge")
    obj.evaluate_single_sensors(range(6))
    assert obj.spent == 6
    assert obj.prior_log == []
    assert obj.evaluate_single_sensor(2).query_index == 6


def test_memoize_charges_but_skips_evaluation():
    evaluator = CountingEvaluator()
    obj = BudgetedObjective(evaluator, n_locations=4, budget=3, memoize=True)
    first = obj.evaluate(Placement.of([1, 2]))
    second = obj.evaluate(Placement.of([1, 2]))
    assert evaluator.calls == 1
    assert obj.spent == 2
    assert second.value == first.value
    assert second.query_index == 1


def test_export_and_read_log(tmp_path):
    obj = BudgetedObjective(noisy, n_locations=10, budget=4, run_seed=2)
    obj.evaluate_batch([Placement.of([0]), Placement.of([1, 7]), Placement.of([2, 3, 9]), Placement.of([4])])
    export_log(obj.log, tmp_path / "observations.csv")
    back = read_log(tmp_path / "observations.csv")
    assert [o.placement for o in back] == [o.placement for o in obj.log]
    assert [o.value for o in back] == pytest.approx([o.value for o in obj.log])
    assert [o.query_index for o in back] == [0, 1, 2, 3]


def test_simulation_evaluator_is_reproducible(tiny_plan, tiny_spec):
    grid = build_grid(tiny_plan, 1.0)
    evaluator = SimulationEvaluator(
        tiny_plan, grid, tiny_spec,
        SimulatorConfig(occupants=2), ClassifierConfig(n_trees=5),
    )
    obj = BudgetedObjective(evaluator, n_locations=grid.size, budget=2, run_seed=3)
    observation = obj.evaluate(Placement.of([0, 2, 6]))
    assert 0.0 <= observation.value <= 1.0
    assert obj.reproduce(observation) == observation.value


def test_simulation_evaluator_workers_reach_the_simulator(tiny_plan, tiny_spec):
    grid = build_grid(tiny_plan, 1.0)
    settings = (tiny_plan, grid, tiny_spec, SimulatorConfig(occupants=3), ClassifierConfig(n_trees=5))
    serial = SimulationEvaluator(*settings)
    parallel = SimulationEvaluator(*settings, workers=2)
    assert parallel.workers == 2
    placement = Placement.of([0, 2, 6])
    a = serial.dataset(placement, np.random.default_rng(4))
    b = parallel.dataset(placement, np.random.default_rng(4))
    assert all(np.array_equal(x.bits, y.bits) and np.array_equal(x.labels, y.labels)
               for x, y in zip(a.series, b.series))
    assert serial(placement, np.random.default_rng(5)) == parallel(placement, np.random.default_rng(5))


def test_replay_evaluator_on_fixture(data_dir):
    events, inventory, _ = load_casas_file(data_dir / "casas" / "aruba_fixture.txt")
    ds = rasterize(events, inventory, 60.0)
    evaluator = ReplayEvaluator.from_dataset(ds, 0.7, ClassifierConfig(n_trees=5))
    obj = BudgetedObjective(evaluator, n_locations=inventory.size, budget=2, mode="replay")
    full = obj.evaluate(Placement.of(range(inventory.size)))
    single = obj.evaluate(Placement.of([0]))
    assert 0.0 <= single.value <= 1.0
    assert 0.0 <= full.value <= 1.0
