import numpy as np
import pytest
from scipy.stats import norm

from services import acquisition
from services.acquisition import (
    InformationProfile,
    alpha_dg,
    alpha_dg_many,
    credit,
    dgbo_score,
    ei,
    expected_gain,
    incumbent_gain,
    init_priors,
    profile_frame,
    region_expected_gains,
    region_gaussian,
)
from services.dataset import SensorInventory
from services.floorplan import build_grid, FloorPlan
from services.objective import BudgetedObjective, BudgetExhaustedError, Placement

PHI_0 = 0.3989422804014327


@pytest.fixture(scope="module")
def standard_draws():
    """10**6 stratified standard-normal draws"""
    n = 10 ** 6
    u = (np.arange(n) + np.random.default_rng(0).random(n)) / n
    return norm.ppf(u)


def _monte_carlo(mu, sigma, threshold, z):
    return float(np.maximum(mu + sigma * z - threshold, 0.0).mean())


def test_ei_matches_monte_carlo(standard_draws):
    rng = np.random.default_rng(1)
    for _ in range(100):
        mu = rng.uniform(0.0, 1.0)
        sigma = rng.uniform(1e-3, 1.0)
        threshold = rng.uniform(0.0, 1.0)
        assert float(ei(mu, sigma, threshold)) == pytest.approx(
            _monte_carlo(mu, sigma, threshold, standard_draws), abs=1e-3)


def test_region_gain_matches_monte_carlo(standard_draws):
    rng = np.random.default_rng(2)
    for _ in range(100):
        profile = InformationProfile.from_priors(rng.uniform(0.0, 1.0, size=3), sigma_floor=1e-3)
        for _ in range(int(rng.integers(1, 4))):
            credit(profile, Placement.of(rng.choice(3, size=2, replace=False)), rng.uniform(0.0, 1.0))
        threshold = rng.uniform(0.0, 1.0)
        gains = region_expected_gains(profile, threshold)
        for i in range(3):
            mu, sigma = region_gaussian(profile, i)
            assert gains[i] == pytest.approx(_monte_carlo(mu, sigma, threshold, standard_draws), abs=1e-3)


def test_ei_closed_form_cases():
    assert float(ei(0.5, 1.0, 0.5)) == pytest.approx(PHI_0, abs=1e-9)
    assert float(ei(0.5 - 10, 1e-6, 0.5)) <= 1e-5
    assert float(ei(0.5, 1e-6, 0.5)) <= 1e-5
    assert float(ei(1.5, 1e-6, 0.5)) == pytest.approx(1.0, abs=1e-6)


def test_ei_is_vectorized_and_nonnegative():
    values = ei(np.array([0.1, 0.5, 0.9]), np.array([0.1, 0.1, 0.1]), 0.5)
    assert values.shape == (3,)
    assert np.all(values >= 0)
    assert values[0] < values[1] < values[2]


def test_sigma_squared_variant():
    assert float(expected_gain(0.0, 0.5, 0.0, sigma_squared=True)) == pytest.approx(0.25 * PHI_0)
    assert float(expected_gain(0.0, 0.5, 0.0)) == pytest.approx(0.5 * PHI_0)


def test_credit_hand_case():
    profile = InformationProfile.from_priors([0.2, 0.3, 0.9])
    shares = credit(profile, Placement.of([0, 1]), 0.6)
    assert shares == pytest.approx([0.24, 0.36], abs=1e-15)
    assert profile.credited[0] == pytest.approx([0.24], abs=1e-15)
    assert profile.credited[1] == pytest.approx([0.36], abs=1e-15)
    assert profile.credited[2] == []


def test_credit_single_sensor_and_zero_value():
    profile = InformationProfile.from_priors([0.4, 0.1])
    assert credit(profile, Placement.of([0]), 0.7) == pytest.approx([0.7])
    assert credit(profile, Placement.of([0, 1]), 0.0) == [0.0, 0.0]


def test_credit_zero_priors_split_equally():
    profile = InformationProfile.from_priors([0.0, 0.0, 0.5])
    assert credit(profile, Placement.of([0, 1]), 0.5) == pytest.approx([0.25, 0.25])


def test_credit_conserves_mass():
    rng = np.random.default_rng(3)
    profile = InformationProfile.from_priors(rng.uniform(0.0, 1.0, size=20))
    for _ in range(1000):
        size = int(rng.integers(1, 8))
        placement = Placement.of(rng.choice(20, size=size, replace=False))
        value = float(rng.uniform(0.0, 1.0))
        before = {i: len(profile.credited[i]) for i in range(20)}
        shares = credit(profile, placement, value)
        assert abs(sum(shares) - value) <= 1e-12
        for i in range(20):
            grew = len(profile.credited[i]) - before[i]
            assert grew == (1 if i in placement.indices else 0)


def test_region_gaussian():
    profile = InformationProfile.from_priors([0.2, 0.3], sigma_floor=1e-6)
    assert region_gaussian(profile, 0) == (pytest.approx(0.2), pytest.approx(1e-6))
    credit(profile, Placement.of([0, 1]), 0.6)
    mu, sigma = region_gaussian(profile, 0)
    assert mu == pytest.approx(0.22, abs=1e-12)
    assert sigma == pytest.approx(0.02, abs=1e-12)

    constant = InformationProfile.from_priors([0.5], sigma_floor=1e-3)
    credit(constant, Placement.of([0]), 0.5)
    assert region_gaussian(constant, 0)[1] == pytest.approx(1e-3)


def test_incumbent_gain():
    profile = InformationProfile.from_priors([0.2, 0.4, 0.9])
    assert incumbent_gain(profile, Placement.of([0, 1])) == pytest.approx(0.3)
    assert incumbent_gain(profile, Placement.of([2])) == pytest.approx(0.9)
    profile.expected_gain_prev = np.full(3, 0.05)
    assert incumbent_gain(profile, Placement.of([0, 1, 2])) == pytest.approx(0.05)


def test_alpha_dg():
    profile = InformationProfile(prior=np.array([0.5, 0.5]), credited=[[], []],
                                 expected_gain_prev=np.zeros(2), sigma_floor=1e-6)
    profile.stds[:] = 1.0
    assert alpha_dg(Placement.of([0, 1]), profile, 0.5) == pytest.approx(PHI_0)

    flat = InformationProfile.from_priors([0.1, 0.2, 0.3])
    assert alpha_dg(Placement.of([0, 1, 2]), flat, 0.3) <= 1e-5
    # one region reduces to the EI-shaped formula
    assert alpha_dg(Placement.of([2]), flat, 0.1) == pytest.approx(float(expected_gain(0.3, 1e-6, 0.1)))


def test_alpha_dg_many_matches_alpha_dg():
    rng = np.random.default_rng(4)
    profile = InformationProfile.from_priors(rng.uniform(0.0, 1.0, size=10))
    for _ in range(5):
        credit(profile, Placement.of(rng.choice(10, size=3, replace=False)), rng.uniform())
    i_star = 0.4
    gains = region_expected_gains(profile, i_star)
    candidates = [Placement.of(rng.choice(10, size=3, replace=False)) for _ in range(20)]
    batch = alpha_dg_many(candidates, gains)
    assert batch == pytest.approx([alpha_dg(c, profile, i_star) for c in candidates])


def test_dgbo_score():
    zero = InformationProfile.from_priors([0.0, 0.0])
    placement = Placement.of([0, 1])
    assert dgbo_score(placement, 0.6, 0.1, 0.5, zero, 0.5) == pytest.approx(float(ei(0.6, 0.1, 0.5)))

    profile = InformationProfile.from_priors([0.8, 0.6])
    flat_surrogate = dgbo_score(placement, 0.5, 1e-6, 0.5, profile, 0.2)
    assert flat_surrogate == pytest.approx(alpha_dg(placement, profile, 0.2), abs=1e-6)
    assert dgbo_score(placement, 0.5, 1e-6, 0.5, zero, 0.5) == pytest.approx(0.0, abs=1e-6)


def test_init_priors_queries_every_location(open_grid, zone_fraction, planted_zone):
    obj = BudgetedObjective(zone_fraction(planted_zone), n_locations=open_grid.size, budget=100)
    profile = init_priors(obj, open_grid)
    assert obj.spent == 49
    assert profile.size == 49
    assert np.all((profile.prior >= 0) & (profile.prior <= 1))
    assert profile.prior[planted_zone].tolist() == [1.0] * 4
    assert np.array_equal(profile.expected_gain_prev, profile.prior)
    assert all(c == [] for c in profile.credited)


def test_init_priors_truncated_sweep(open_grid, zone_fraction, planted_zone):
    obj = BudgetedObjective(zone_fraction(planted_zone), n_locations=open_grid.size, budget=30)
    with pytest.raises(BudgetExhaustedError):
        init_priors(obj, open_grid)


def test_profile_frame():
    grid = build_grid(FloorPlan(width=3.0, height=3.0), 1.0)
    profile = InformationProfile.from_priors(np.linspace(0, 1, grid.size))
    frame = profile_frame(profile, grid)
    assert list(frame.columns) == acquisition.PROFILE_COLUMNS
    assert len(frame) == 4
    assert frame["x"].tolist() == grid.locations[:, 0].tolist()

    inventory = SensorInventory(("M001", "M002"))
    replay = profile_frame(InformationProfile.from_priors([0.1, 0.2]), inventory)
    assert replay["x"].isna().all()
