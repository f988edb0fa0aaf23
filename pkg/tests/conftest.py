from pathlib import Path

import numpy as np
import pytest

from services.floorplan import FloorPlan, Zone, build_grid
from services.simulator import ADLPlanSpec, PlanEntry

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


class ZoneFraction:
    """Toy objective: fraction of the placement inside a marked set of locations, plus noise"""

    def __init__(self, zone, noise: float = 0.0):
        self.zone = frozenset(int(i) for i in zone)
        self.noise = noise

    def __call__(self, placement, rng: np.random.Generator) -> float:
        inside = sum(1 for i in placement.indices if i in self.zone)
        value = inside / placement.size
        if self.noise:
            value += rng.normal(0.0, self.noise)
        return value


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def open_plan() -> FloorPlan:
    return FloorPlan(width=8.0, height=8.0, anchors={"Sleep": (2.0, 2.0)}, entry_point=(0.5, 0.5))


@pytest.fixture
def open_grid(open_plan):
    return build_grid(open_plan, 1.0)


@pytest.fixture
def tiny_plan() -> FloorPlan:
    """4 m x 4 m, one dividing wall with a door at y in [3, 4]"""
    return FloorPlan(
        width=4.0,
        height=4.0,
        walls=((2.0, 0.0, 2.0, 3.0),),
        zones=(Zone("west", (0.0, 0.0, 2.0, 4.0)), Zone("east", (2.0, 0.0, 2.0, 4.0))),
        anchors={"Sleep": (1.0, 1.0), "Cook": (3.0, 1.0)},
        entry_point=(1.0, 1.0),
    )


@pytest.fixture
def tiny_spec() -> ADLPlanSpec:
    return ADLPlanSpec(entries=(PlanEntry("Sleep", 1.0), PlanEntry("Cook", 1.0)))


@pytest.fixture
def zone_fraction():
    return ZoneFraction


@pytest.fixture
def planted_zone(open_grid):
    """The four 1 m grid locations inside [3, 4] x [3, 4] on the open plan"""
    return open_grid.indices_in_rect((2.9, 2.9, 1.2, 1.2))


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv("GREYPLACE_SEED", raising=False)
