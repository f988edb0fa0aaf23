"""
Acquisition scores: expected improvement, the per-region information
profile and the distribution-guided term added to EI by DGBO.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm

from services.objective import BudgetedObjective, BudgetExhaustedError, Placement

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
PROFILE_COLUMNS = ["region_index", "x", "y", "prior", "mean", "std", "expected_gain"]


def expected_gain(mu, sigma, threshold, sigma_squared: bool = False):
    """
    Closed-form E[max(N(mu, sigma) - threshold, 0)], vectorized.

    With sigma_squared the last term is sigma**2 * pdf(z) instead of
    sigma * pdf(z).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    z = (mu - threshold) / sigma
    spread = sigma ** 2 if sigma_squared else sigma
    return np.maximum((mu - threshold) * norm.cdf(z) + spread * norm.pdf(z), 0.0)


def ei(mu, sigma, f_star):
    """Expected improvement of N(mu, sigma) over the incumbent value f_star"""
    return expected_gain(mu, sigma, f_star)


@dataclass
class InformationProfile:
    """
    Per-region record of single-sensor priors and the shares of later
    observations credited to each region.
    """
    prior: np.ndarray
    credited: List[List[float]]
    expected_gain_prev: np.ndarray
    sigma_floor: float = SIGMA_FLOOR
    means: np.ndarray = field(init=False, repr=False)
    stds: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=float)
        self.means = self.prior.copy()
        self.stds = np.full(len(self.prior), self.sigma_floor)
        for i, values in enumerate(self.credited):
            if values:
                self.refresh(i)

    @classmethod
    def from_priors(cls, priors: Sequence[float], sigma_floor: float = SIGMA_FLOOR) -> "InformationProfile":
        priors = np.asarray(priors, dtype=float)
        return cls(
            prior=priors,
            credited=[[] for _ in range(len(priors))],
            expected_gain_prev=priors.copy(),
            sigma_floor=sigma_floor,
        )

    @property
    def size(self) -> int:
        return len(self.prior)

    def refresh(self, i: int) -> None:
        values = np.array([self.prior[i], *self.credited[i]])
        self.means[i] = values.mean()
        self.stds[i] = max(values.std(), self.sigma_floor)


def init_priors(obj: BudgetedObjective, grid, sigma_floor: float = SIGMA_FLOOR) -> InformationProfile:
    """Query f once per grid location with a single sensor there"""
    observations = obj.evaluate_single_sensors(range(grid.size))
    if len(observations) < grid.size:
        raise BudgetExhaustedError(
            f"prior sweep needs {grid.size} queries, only {len(observations)} fit in the budget"
        )
    logger.info("priors done locations=%d mode=%s", grid.size, obj.prior_budget_mode)
    return InformationProfile.from_priors([o.value for o in observations], sigma_floor)


def credit(profile: InformationProfile, placement: Placement, value: float) -> List[float]:
    """
    Split the observed value over the placement's regions in proportion to
    their priors; an all-zero prior sum splits it equally.
    """
    indices = list(placement.indices)
    weights = profile.prior[indices]
    total = weights.sum()
    if total > 0:
        shares = weights / total * value
    else:
        shares = np.full(len(indices), value / len(indices))
    for i, share in zip(indices, shares):
        profile.credited[i].append(float(share))
        profile.refresh(i)
    return [float(s) for s in shares]


def region_gaussian(profile: InformationProfile, i: int) -> Tuple[float, float]:
    return float(profile.means[i]), float(profile.stds[i])


def incumbent_gain(profile: InformationProfile, x_star: Placement) -> float:
    return float(profile.expected_gain_prev[list(x_star.indices)].mean())


def region_expected_gains(profile: InformationProfile, threshold: float, sigma_squared: bool = False) -> np.ndarray:
    """E[I+(R_i)] for every region against the incumbent's average gain"""
    return expected_gain(profile.means, profile.stds, threshold, sigma_squared)


def alpha_dg(placement: Placement, profile: InformationProfile, i_star: float, sigma_squared: bool = False) -> float:
    indices = list(placement.indices)
    return float(expected_gain(profile.means[indices], profile.stds[indices], i_star, sigma_squared).mean())


def alpha_dg_many(candidates: Sequence[Placement], gains: np.ndarray) -> np.ndarray:
    """Mean precomputed region gain over each candidate's regions"""
    return np.array([gains[list(c.indices)].mean() for c in candidates])


def dgbo_score(placement: Placement, mu: float, sigma: float, f_star: float,
               profile: InformationProfile, i_star: float, sigma_squared: bool = False) -> float:
    return float(ei(mu, sigma, f_star)) + alpha_dg(placement, profile, i_star, sigma_squared)


def profile_frame(profile: InformationProfile, grid) -> pd.DataFrame:
    """
    Snapshot rows: region_index,x,y,prior,mean,std,expected_gain. A sensor
    inventory without coordinates gets NaN x and y.
    """
    locations = getattr(grid, "locations", None)
    if locations is None:
        locations = np.full((profile.size, 2), np.nan)
    return pd.DataFrame({
        "region_index": np.arange(profile.size),
        "x": locations[:, 0],
        "y": locations[:, 1],
        "prior": profile.prior,
        "mean": profile.means,
        "std": profile.stds,
        "expected_gain": profile.expected_gain_prev,
    }, columns=PROFILE_COLUMNS)
