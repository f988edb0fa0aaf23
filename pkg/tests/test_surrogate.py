import numpy as np
import pytest
from scipy.stats import spearmanr

from schemas.config_files import SurrogateConfig
from services import surrogate
from services.objective import Observation, Placement
from services.surrogate import SurrogateError, encode_many


def _observation(indices, value, k=0):
    return Observation(Placement.of(indices), value, k, 0.0)


def test_encode_many():
    bits = encode_many([Placement.of([0, 2]), Placement.of([3])], 4)
    assert bits.tolist() == [[1, 0, 1, 0], [0, 0, 0, 1]]


def test_single_observation():
    model = surrogate.fit([_observation([1, 2], 0.42)], 5, np.random.default_rng(0))
    for query in ([1, 2], [0], [0, 3, 4]):
        mu, sigma = surrogate.predict(model, Placement.of(query))
        assert mu == pytest.approx(0.42)
        assert sigma == pytest.approx(1e-6)


def test_constant_log():
    rng = np.random.default_rng(1)
    log = [_observation(rng.choice(8, size=3, replace=False), 0.3, k) for k in range(20)]
    model = surrogate.fit(log, 8, rng, SurrogateConfig(n_trees=20, sigma_floor=1e-4))
    mu, sigma = model.predict_many([o.placement for o in log[:5]])
    assert np.allclose(mu, 0.3)
    assert np.allclose(sigma, 1e-4)


def test_rank_correlation_on_popcount():
    n_locations = 10
    rng = np.random.default_rng(7)

    def draw():
        size = int(rng.integers(1, n_locations + 1))
        return Placement.of(rng.choice(n_locations, size=size, replace=False))

    train = [draw() for _ in range(50)]
    log = [Observation(p, p.size / n_locations, k, 0.0) for k, p in enumerate(train)]
    model = surrogate.fit(log, n_locations, rng, SurrogateConfig(n_trees=100))

    held_out = [draw() for _ in range(50)]
    mu, sigma = model.predict_many(held_out)
    truth = [p.size / n_locations for p in held_out]
    assert spearmanr(mu, truth)[0] > 0.8
    assert np.all(sigma >= 1e-6)


def test_fit_is_deterministic_for_a_seed():
    log = [_observation([i, (i + 1) % 6], i / 10, i) for i in range(6)]
    queries = [Placement.of([0, 3]), Placement.of([2])]
    a = surrogate.fit(log, 6, np.random.default_rng(3)).predict_many(queries)
    b = surrogate.fit(log, 6, np.random.default_rng(3)).predict_many(queries)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_empty_log():
    with pytest.raises(SurrogateError):
        surrogate.fit([], 4)


def test_wrong_width():
    model = surrogate.fit([_observation([0], 0.5)], 4)
    with pytest.raises(SurrogateError):
        model.predict_encoded(np.zeros((1, 5)))
