"""Closed-form quantities: normal CDF, analytic associational differences,
the accuracy-to-bias worst-case bound, and its attaining predictor.

The bound says that a predictor with misclassification rate ``eps`` can
shift the estimated treatment effect by up to ``eps / min(p, 1-p)`` where
``p`` is the treatment probability -- at least ``2 * eps`` for any
randomization. The worst case concentrates every error in the smaller
treatment group, all pushing the same direction; ``worst_case_predictor``
builds exactly that prediction vector on a finite dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .scm import Dataset


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the C library erf.

    Absolute error is below 1e-15 over |z| <= 8, well inside the 1e-9
    contract for this function.
    """
    if not math.isfinite(z):
        raise DomainError(f"normal_cdf requires a finite argument, got {z}")
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def analytic_ad(sigma2_y: float) -> float:
    """Exact associational difference of the true outcome in the synthetic
    RCT: phi(1 / sqrt(2 + sigma2_y)) - 0.5. Equals the ATE by randomization."""
    if not sigma2_y > 0.0:
        raise DomainError(f"sigma2_y must be > 0, got {sigma2_y}")
    return normal_cdf(1.0 / math.sqrt(2.0 + sigma2_y)) - 0.5


def analytic_discretized_ad() -> float:
    """Limit associational difference of the 0.5-thresholded oracle
    predictor: phi(1 / sqrt(2)) - 0.5, independent of the outcome noise."""
    return normal_cdf(1.0 / math.sqrt(2.0)) - 0.5


@dataclass(frozen=True)
class BoundInput:
    """Inputs to the worst-case bias bound.

    epsilon: misclassification rate in [0, 1].
    p_t: treatment probability in (0, 1).
    """

    epsilon: float
    p_t: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise DomainError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.p_t < 1.0:
            raise DomainError(f"p_t must lie in (0, 1), got {self.p_t}")


def teb_upper_bound(inp: BoundInput) -> float:
    """Worst-case |treatment effect bias| of a hard predictor with accuracy
    1 - epsilon: epsilon / min(p_t, 1 - p_t). Always >= 2 * epsilon."""
    return inp.epsilon / min(inp.p_t, 1.0 - inp.p_t)


def worst_case_predictor(dataset: Dataset, epsilon: float,
                         direction: str = "over") -> np.ndarray:
    """Hard predictions attaining the worst-case bias on a finite dataset.

    Copies the true labels, then flips floor(epsilon * n) of them, all inside
    the smaller treatment group and all in one direction: "over" turns 0s
    into 1s, "under" turns 1s into 0s. Flip candidates are taken in dataset
    order, which makes the construction deterministic. The result has
    empirical |TEB| equal to floor(epsilon * n) / n_minority exactly.

    Raises InfeasibleError when the minority group does not contain enough
    flippable labels, reporting the largest attainable epsilon.
    """
    if direction not in ("over", "under"):
        raise DomainError(f"direction must be 'over' or 'under', got {direction!r}")
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    t = np.asarray(dataset.t)
    y = np.asarray(dataset.y)
    n = len(y)
    n1 = int(t.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise DomainError("dataset must contain both treatment groups")
    minority_t = 1 if n1 <= n0 else 0
    source_label = 0 if direction == "over" else 1
    eligible = np.flatnonzero((t == minority_t) & (y == source_label))
    # slack guards the floor against binary rounding of decimal rates
    # (0.3 * 10 is 2.999... in floats but means 3 flips)
    n_flip = int(math.floor(epsilon * n + 1e-9))
    if n_flip > len(eligible):
        max_eps = len(eligible) / n
        raise InfeasibleError(
            f"cannot flip {n_flip} predictions: only {len(eligible)} samples "
            f"in treatment group t={minority_t} have label {source_label}; "
            f"maximum attainable epsilon is {max_eps}")
    predictions = y.astype(np.int8).copy()
    predictions[eligible[:n_flip]] = 1 - source_label
    return predictions
