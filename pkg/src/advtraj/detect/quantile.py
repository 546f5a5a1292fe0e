"""Transport-cost quantile detector.

Needs no adversarial samples: fit the 0.02 and 0.98 empirical quantiles of
the transport cost over clean data, then flag any input whose cost falls
outside that band. By construction about 4% of clean data is flagged,
giving a fixed false-positive rate.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError

MIN_FIT_SAMPLES = 50


@dataclass
class QuantileCostDetector:
    low: float
    high: float
    q_low: float = 0.02
    q_high: float = 0.98

    def __post_init__(self):
        if self.low > self.high:
            raise ContractError(f"quantile thresholds inverted: {self.low} > {self.high}")

    def to_dict(self):
        return {"low": self.low, "high": self.high,
                "q_low": self.q_low, "q_high": self.q_high}

    @classmethod
    def from_dict(cls, doc):
        return cls(low=float(doc["low"]), high=float(doc["high"]),
                   q_low=float(doc["q_low"]), q_high=float(doc["q_high"]))


def fit_quantile_detector(clean_costs, q_low=0.02, q_high=0.98):
    """Thresholds from linear interpolation of the clean-cost order statistics."""
    costs = np.asarray(clean_costs, dtype=np.float64)
    if costs.ndim != 1 or costs.size < MIN_FIT_SAMPLES:
        raise ContractError(
            f"need at least {MIN_FIT_SAMPLES} clean costs for stable quantiles, got {costs.size}")
    low = float(np.quantile(costs, q_low, method="linear"))
    high = float(np.quantile(costs, q_high, method="linear"))
    return QuantileCostDetector(low=low, high=high, q_low=q_low, q_high=q_high)


def predict_quantile(det, cost):
    """1 (adversarial) iff the cost lies outside [low, high]."""
    cost = np.asarray(cost, dtype=np.float64)
    flagged = (cost < det.low) | (cost > det.high)
    if flagged.ndim == 0:
        return int(flagged)
    return flagged.astype(np.int64)
