"""
Probabilistic random forest surrogate over placement bit vectors.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from schemas.config_files import SurrogateConfig
from services.objective import Observation, Placement

logger = logging.getLogger(__name__)


class SurrogateError(Exception):
    """Raised when the surrogate is fitted on nothing or queried with the wrong width"""
    pass


def encode_many(placements: Sequence[Placement], n_locations: int) -> np.ndarray:
    """Stack placements into an (n, L) uint8 matrix, bit i = sensor at location i"""
    bits = np.zeros((len(placements), n_locations), dtype=np.uint8)
    for row, placement in enumerate(placements):
        bits[row, list(placement.indices)] = 1
    return bits


class PRFModel:
    """
    Regression forest whose spread across trees is the predictive std.

    mu is the mean of the per-tree predictions and sigma their standard
    deviation, floored at sigma_floor.
    """

    def __init__(self, forest: RandomForestRegressor, n_locations: int, sigma_floor: float = 1e-6):
        self.forest = forest
        self.n_locations = n_locations
        self.sigma_floor = sigma_floor

    @property
    def n_trees(self) -> int:
        return len(self.forest.estimators_)

    def tree_predictions(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != self.n_locations:
            raise SurrogateError(f"expected encodings of length {self.n_locations}, got shape {features.shape}")
        return np.stack([tree.predict(features) for tree in self.forest.estimators_])

    def predict_encoded(self, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        per_tree = self.tree_predictions(features)
        mu = per_tree.mean(axis=0)
        sigma = np.maximum(per_tree.std(axis=0), self.sigma_floor)
        return mu, sigma

    def predict_many(self, placements: Sequence[Placement]) -> Tuple[np.ndarray, np.ndarray]:
        return self.predict_encoded(encode_many(placements, self.n_locations))


def fit(
    observations: Sequence[Observation],
    n_locations: int,
    rng: Optional[np.random.Generator] = None,
    params: Optional[SurrogateConfig] = None,
    n_jobs: int = 1,
) -> PRFModel:
    """Fit trees on bootstrap resamples of the (encoding, value) pairs"""
    if not observations:
        raise SurrogateError("cannot fit the surrogate on an empty log")
    params = params or SurrogateConfig()
    rng = rng or np.random.default_rng(0)
    features = encode_many([o.placement for o in observations], n_locations)
    values = np.array([o.value for o in observations], dtype=float)
    forest = RandomForestRegressor(
        n_estimators=params.n_trees,
        criterion="squared_error",
        min_samples_leaf=params.min_leaf,
        bootstrap=True,
        n_jobs=n_jobs,
        random_state=int(rng.integers(0, 2**31 - 1)),
    )
    forest.fit(features, values)
    logger.debug("surrogate fitted observations=%d trees=%d", len(values), params.n_trees)
    return PRFModel(forest, n_locations, params.sigma_floor)


def predict(model: PRFModel, placement: Placement) -> Tuple[float, float]:
    mu, sigma = model.predict_many([placement])
    return float(mu[0]), float(sigma[0])
