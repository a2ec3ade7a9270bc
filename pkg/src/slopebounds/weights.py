"""Slope weight schedules, the Lasso tuning threshold and the lambda <-> delta map."""
import math
from dataclasses import dataclass

import numpy as np

from .norms import WeightSchedule, _weights_of, conjugate_exponent

#: 4 + sqrt(2), the Gaussian-width constant appearing in every tuning rule.
NOISE_CONSTANT = 4.0 + math.sqrt(2.0)

#: 2 (4 + sqrt 2) plus a margin: A must exceed (4 + sqrt 2) / gamma, and gamma = 1/2 by default.
DEFAULT_A = 2.0 * NOISE_CONSTANT + 1e-9


@dataclass(frozen=True)
class SlopeWeightConfig:
    p: int
    n: int
    sigma: float
    A: float = DEFAULT_A
    gamma: float | None = None

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise ValueError(f"p and n must be >= 1, got p={self.p}, n={self.n}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if self.gamma is not None:
            _check_gamma(self.gamma)
            if not self.A > NOISE_CONSTANT / self.gamma:
                raise ValueError(
                    f"A={self.A} must exceed (4+sqrt2)/gamma={NOISE_CONSTANT / self.gamma}"
                )


@dataclass(frozen=True)
class LassoTuning:
    lam: float
    gamma: float
    delta_lambda: float


def _check_gamma(gamma, closed=False):
    if not (0.0 < gamma < 1.0 or (closed and gamma == 1.0)):
        raise ValueError(f"gamma must lie in (0, 1{']' if closed else ')'}, got {gamma}")


def slope_weights(cfg: SlopeWeightConfig) -> WeightSchedule:
    """lambda_j = A * sigma * sqrt(log(2p/j) / n) for j = 1..p."""
    j = np.arange(1, cfg.p + 1, dtype=float)
    lam = cfg.A * cfg.sigma * np.sqrt(np.log(2.0 * cfg.p / j) / cfg.n)
    return WeightSchedule(lam)


def is_slope_schedule(w, rtol=1e-9):
    """True when ``w`` is proportional to sqrt(log(2p/j)) with a positive factor."""
    lam = _weights_of(w)
    p = lam.size
    shape = np.sqrt(np.log(2.0 * p / np.arange(1, p + 1)))
    ratio = lam / shape
    return bool(ratio[0] > 0 and np.allclose(ratio, ratio[0], rtol=rtol, atol=0.0))


def lasso_lambda_min(gamma, sigma, n, p, s):
    """Smallest tuning parameter admitted by the Lasso oracle inequalities.

    Returns ``(4+sqrt2) sigma / gamma * sqrt(log(2ep/s) / n)``; at this
    value ``delta_of_lambda`` equals ``s / (2ep)``.
    """
    _check_gamma(gamma)
    if not (1 <= s <= p):
        raise ValueError(f"s must lie in [1, p={p}], got {s}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return NOISE_CONSTANT * sigma / gamma * math.sqrt(math.log(2.0 * math.e * p / s) / n)


def delta_of_lambda(lam, gamma, sigma, n):
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    _check_gamma(gamma, closed=True)
    return math.exp(-((gamma * lam * math.sqrt(n) / (NOISE_CONSTANT * sigma)) ** 2))


def log_inv_delta_of_lambda(lam, gamma, sigma, n):
    """log(1/delta(lambda)) without the underflow of exp for large lambda."""
    _check_gamma(gamma, closed=True)
    return (gamma * lam * math.sqrt(n) / (NOISE_CONSTANT * sigma)) ** 2


def lambda_of_delta(delta, gamma, sigma, n):
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    _check_gamma(gamma, closed=True)
    return NOISE_CONSTANT * sigma / gamma * math.sqrt(-math.log(delta) / n)


def lasso_tuning(gamma, sigma, n, p, s, lam=None):
    """Bundle lambda (default: the minimal admissible one) with gamma and delta(lambda)."""
    if lam is None:
        lam = lasso_lambda_min(gamma, sigma, n, p, s)
    return LassoTuning(lam=lam, gamma=gamma, delta_lambda=delta_of_lambda(lam, gamma, sigma, n))


def capital_lambda_q(w, s, q):
    """(sum_{j<=s} lambda_j^(q/(q-1)))^(1-1/q), the top-s weight aggregate."""
    lam = _weights_of(w)
    if not (1 <= s <= lam.size):
        raise ValueError(f"s must lie in [1, {lam.size}], got {s}")
    if q < 2:
        raise ValueError(f"q must lie in [2, inf], got {q}")
    top = lam[:s]
    if math.isinf(q):
        return float(np.sum(top))
    r = conjugate_exponent(q)
    return float(np.sum(top**r) ** (1.0 - 1.0 / q))


def capital_lambda_upper(A, sigma, n, p, s, q):
    """A sigma s^(1-1/q) sqrt(log(2ep/s)/n), which dominates capital_lambda_q on Slope weights."""
    expo = 1.0 if math.isinf(q) else 1.0 - 1.0 / q
    return A * sigma * s**expo * math.sqrt(math.log(2.0 * math.e * p / s) / n)
