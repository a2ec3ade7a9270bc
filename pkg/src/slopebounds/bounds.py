"""Oracle-inequality constants and right-hand sides for Lasso and Slope.

Restricted eigenvalue constants enter as plug-ins. When they come from
``re_conditions`` they are upper bounds on the true minima, so the
right-hand sides computed here are lower bounds on the certified ones;
reports carry the provenance label to say so.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .norms import _as_vector, _weights_of, conjugate_exponent, lq_norm, rearrange_desc
from .weights import (
    NOISE_CONSTANT,
    capital_lambda_q,
    is_slope_schedule,
    lasso_lambda_min,
    log_inv_delta_of_lambda,
)

logger = logging.getLogger(__name__)


def c0_of(gamma, tau):
    """Cone constant (1 + gamma + tau) / (1 - gamma - tau)."""
    return (1.0 + gamma + tau) / (1.0 - gamma - tau)


@dataclass(frozen=True)
class BoundParams:
    """Parameters shared by the Lasso and Slope bounds.

    ``re_constant`` is theta_q (Lasso) or nu_q (Slope) at ``c0(gamma, tau)``.
    ``re_constant_sparse`` is the same constant at ``c0(gamma, 0)``, used
    by the exactly-sparse lq bound; when omitted ``re_constant`` is used,
    which is valid because the constant can only grow as the cone shrinks.
    """

    q: float
    s: int
    gamma: float
    tau: float
    delta0: float
    re_constant: float
    re_constant_sparse: float | None = None
    re_label: str = "estimated"

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (0.0 <= self.tau < 1.0 - self.gamma):
            raise ValueError(f"tau must lie in [0, 1 - gamma), got {self.tau}")
        if not (0.0 < self.delta0 < 1.0):
            raise ValueError(f"delta0 must lie in (0, 1), got {self.delta0}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if not self.q >= 1:
            raise ValueError(f"q must lie in [1, inf], got {self.q}")
        if not self.re_constant > 0:
            raise ValueError(f"re_constant must be positive, got {self.re_constant}")
        if self.re_constant_sparse is not None and not self.re_constant_sparse > 0:
            raise ValueError(f"re_constant_sparse must be positive, got {self.re_constant_sparse}")

    @property
    def c0(self):
        return c0_of(self.gamma, self.tau)

    @property
    def c0_sparse(self):
        return c0_of(self.gamma, 0.0)

    @property
    def re_sparse(self):
        return self.re_constant if self.re_constant_sparse is None else self.re_constant_sparse

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class BoundReport:
    """Right-hand sides of the oracle inequalities.

    ``rhs_l1`` bounds ``||beta_hat - beta*||_1`` for Lasso and the
    sorted-l1 error ``||beta_hat - beta*||_*`` for Slope (``l1_norm`` says
    which). ``rhs_prediction`` is the excess over the oracle risk term.
    Fields that need ``tau > 0`` are ``None`` when ``tau == 0``.
    """

    estimator: str
    constant: float
    constant_sparse: float
    rhs_l1: float | None
    rhs_lq_sparse: float
    rhs_lq_compressible: float | None
    rhs_prediction: float
    q: float
    l1_norm: str
    labels: dict = field(default_factory=dict)
    sparse_only: bool = False

    def as_dict(self):
        return {
            "estimator": self.estimator,
            "constant": self.constant,
            "constant_sparse": self.constant_sparse,
            "rhs_l1": self.rhs_l1,
            "rhs_lq_sparse": self.rhs_lq_sparse,
            "rhs_lq_compressible": self.rhs_lq_compressible,
            "rhs_prediction": self.rhs_prediction,
            "q": _q_out(self.q),
            "l1_norm": self.l1_norm,
            "labels": dict(self.labels),
            "sparse_only": self.sparse_only,
        }


def _q_out(q):
    return "inf" if math.isinf(q) else q


def _s_power(s, expo_finite, expo_inf, q):
    return s ** (expo_inf if math.isinf(q) else expo_finite(q))


def _branch_max(prefactor, noise_branch, re_branch):
    return prefactor * max(noise_branch, re_branch)


def c_gamma_tau(params: BoundParams, lam, n, p, sigma=1.0, tau=None, re_constant=None, _warn=True):
    """Lasso constant C_{gamma,tau}(q, s, lambda, delta0).

    ``(1+gamma+tau)^2 * max(log(1/delta0) / (s log(1/delta(lambda))),
    s^(1-2/q) / theta^2)``. ``tau`` and ``re_constant`` override the
    values in ``params`` (used for the tau = 0 variant).
    """
    tau = params.tau if tau is None else tau
    theta = params.re_constant if re_constant is None else re_constant
    q, s, gamma = params.q, params.s, params.gamma
    if q < 2:
        raise ValueError(f"the direct Lasso bound needs q in [2, inf], got {q}")
    lam_min = lasso_lambda_min(gamma, sigma, n, p, s)
    if _warn and lam < lam_min * (1 - 1e-12):
        logger.warning("lambda=%g is below the admissible threshold %g", lam, lam_min)
    noise = math.log(1.0 / params.delta0) / (s * log_inv_delta_of_lambda(lam, gamma, sigma, n))
    re = _s_power(s, lambda q: 1.0 - 2.0 / q, 1.0, q) / theta**2
    return _branch_max((1.0 + gamma + tau) ** 2, noise, re)


def c_prime_gamma_tau(params: BoundParams, n, p, tau=None, re_constant=None):
    """Slope constant C'_{gamma,tau}(q, s, delta0).

    ``(1+gamma+tau)^2 * max(log(1/delta0) / (s log(2p/s)), 1 / nu^2)``.
    """
    del n  # the constant does not depend on n; kept for a uniform signature
    tau = params.tau if tau is None else tau
    nu = params.re_constant if re_constant is None else re_constant
    s, gamma = params.s, params.gamma
    if params.q < 2:
        raise ValueError(f"the Slope bounds need q in [2, inf], got {params.q}")
    if not (1 <= s <= p):
        raise ValueError(f"s must lie in [1, {p}], got {s}")
    noise = math.log(1.0 / params.delta0) / (s * math.log(2.0 * p / s))
    return _branch_max((1.0 + gamma + tau) ** 2, noise, 1.0 / nu**2)


def interpolated_lq_bound(rhs_l1, rhs_l2, q):
    """rhs_l1^(2/q - 1) * rhs_l2^(2 - 2/q), the l1/l2 interpolation for q in [1, 2]."""
    if not (1.0 <= q <= 2.0):
        raise ValueError(f"q must lie in [1, 2], got {q}")
    if rhs_l1 < 0 or rhs_l2 < 0:
        raise ValueError("bounds must be nonnegative")
    a = 2.0 / q - 1.0
    b = 2.0 - 2.0 / q
    # 0**0 is 1, matching the endpoint cases q = 1 and q = 2
    return float(rhs_l1**a * rhs_l2**b)


def _compressible_factors(gamma, tau):
    lead = max(2.0 / (1.0 + gamma), (1.0 - gamma - tau) / (4.0 * tau))
    tail = max(1.0 / (1.0 + gamma), (1.0 - gamma - tau) / tau)
    return lead, tail


def _check_sigma_s(tau, sigma_s):
    if sigma_s < 0:
        raise ValueError(f"best s-term error must be nonnegative, got {sigma_s}")
    if tau == 0 and sigma_s > 0:
        logger.warning("tau = 0 only supports the exactly sparse bound; returning sparse-only report")


def lasso_bound_rhs(params: BoundParams, lam, sigma_s_l1, n, p, sigma=1.0) -> BoundReport:
    """All Lasso right-hand sides at tuning ``lam``.

    For q in [1, 2) the lq bound is obtained by interpolating the l1 and
    l2 bounds (exactly sparse case only, ``tau > 0`` and ``re_constant``
    taken as theta_2).
    """
    q, s, gamma, tau = params.q, params.s, params.gamma, params.tau
    _check_sigma_s(tau, sigma_s_l1)
    labels = {"re_constant": params.re_label}
    if q < 2:
        if tau == 0:
            raise ValueError("the interpolated lq bound needs tau > 0")
        base = lasso_bound_rhs(params.replace(q=2.0), lam, sigma_s_l1, n, p, sigma)
        sparse_l1 = base.constant / (2.0 * tau) * lam * s
        rhs_lq = interpolated_lq_bound(sparse_l1, base.rhs_lq_sparse, q)
        labels["lq_route"] = "interpolated"
        return BoundReport(
            "lasso", base.constant, base.constant_sparse, base.rhs_l1, rhs_lq, None,
            base.rhs_prediction, q, "l1", labels, sparse_only=True,
        )

    C = c_gamma_tau(params, lam, n, p, sigma)
    C0 = c_gamma_tau(params, lam, n, p, sigma, tau=0.0, re_constant=params.re_sparse, _warn=False)
    s_q = _s_power(s, lambda q: 1.0 / q, 0.0, q)
    rhs_lq_sparse = C0 / (1.0 + gamma) * lam * s_q
    rhs_prediction = C * lam**2 * s + 4.0 * lam * sigma_s_l1
    if tau > 0:
        rhs_l1 = C / (2.0 * tau) * lam * s + 2.0 / tau * sigma_s_l1
        lead, tail = _compressible_factors(gamma, tau)
        rhs_lq = lead * C * lam * s_q + tail * s_q / s * sigma_s_l1
    else:
        rhs_l1 = rhs_lq = None
    if q == 2:
        # the interpolation route must reproduce the direct l2 bound
        check = interpolated_lq_bound(C / (2.0 * tau) * lam * s, rhs_lq_sparse, 2.0) if tau > 0 else rhs_lq_sparse
        if not math.isclose(check, rhs_lq_sparse, rel_tol=1e-10):
            raise ArithmeticError("l2 bound disagrees with its interpolation route")
    labels["lq_route"] = "direct"
    return BoundReport(
        "lasso", C, C0, rhs_l1, rhs_lq_sparse, rhs_lq, rhs_prediction, q, "l1", labels,
        sparse_only=tau == 0,
    )


def slope_bound_rhs(params: BoundParams, w, sigma_s_star, n, p, sigma=None) -> BoundReport:
    """All Slope right-hand sides for the weight schedule ``w``.

    When ``sigma`` is given the weights are checked against the
    requirement A > (4 + sqrt 2) / gamma.
    """
    lam = _weights_of(w)
    if lam.size != p:
        raise ValueError(f"{lam.size} weights for p={p}")
    q, s, gamma, tau = params.q, params.s, params.gamma, params.tau
    _check_sigma_s(tau, sigma_s_star)
    if sigma is not None:
        _check_slope_level(lam, gamma, sigma, n)
    C = c_prime_gamma_tau(params, n, p)
    C0 = c_prime_gamma_tau(params, n, p, tau=0.0, re_constant=params.re_sparse)
    Lq = capital_lambda_q(lam, s, q)
    rhs_lq_sparse = C0 / (1.0 + gamma) * Lq
    rhs_prediction = C * Lq**2 + 4.0 * sigma_s_star
    if tau > 0:
        rhs_l1 = C / (2.0 * tau) * Lq**2 + 2.0 / tau * sigma_s_star
        lead, tail = _compressible_factors(gamma, tau)
        rhs_lq = lead * C * Lq + tail * sigma_s_star / Lq
    else:
        rhs_l1 = rhs_lq = None
    return BoundReport(
        "slope", C, C0, rhs_l1, rhs_lq_sparse, rhs_lq, rhs_prediction, q, "sorted-l1",
        {"re_constant": params.re_label, "lq_route": "direct"}, sparse_only=tau == 0,
    )


def _check_slope_level(lam, gamma, sigma, n):
    if not is_slope_schedule(lam):
        logger.warning("weights are not of the form A sigma sqrt(log(2p/j)/n)")
        return
    p = lam.size
    A = lam[0] / (sigma * math.sqrt(math.log(2.0 * p) / n))
    if not A > NOISE_CONSTANT / gamma:
        logger.warning("A=%g does not exceed (4+sqrt2)/gamma=%g", A, NOISE_CONSTANT / gamma)


@dataclass(frozen=True)
class BalancedBounds:
    """Bounds at gamma = 1/2, tau = 1/4 with the branch-balancing delta0."""

    prediction: float
    l1: float
    lq_sparse: float
    lq_compressible: float
    delta0: float
    probability: float


def lasso_balanced_bounds(lam, theta, q, s, p, sigma_s_l1=0.0, log_inv_delta_lambda=None):
    """Lasso bounds with the 49/16 family of constants (theta = theta_q(s, 7)).

    ``log_inv_delta_lambda`` is log(1/delta(lambda)); it fixes delta0 and
    defaults to its smallest admissible value log(2ep/s).
    """
    if q < 2:
        raise ValueError(f"q must lie in [2, inf], got {q}")
    k = _s_power(s, lambda q: 2.0 - 2.0 / q, 2.0, q) / theta**2
    if log_inv_delta_lambda is None:
        log_inv_delta_lambda = math.log(2.0 * math.e * p / s)
    s_q1 = _s_power(s, lambda q: 1.0 - 1.0 / q, 1.0, q)
    return BalancedBounds(
        prediction=49.0 * lam**2 * k / 16.0 + 4.0 * lam * sigma_s_l1,
        l1=49.0 * lam * k / 8.0 + 8.0 * sigma_s_l1,
        lq_sparse=49.0 * lam * s_q1 / (24.0 * theta**2),
        lq_compressible=49.0 * lam * s_q1 / (12.0 * theta**2)
        + _s_power(s, lambda q: 1.0 / q - 1.0, -1.0, q) * sigma_s_l1,
        delta0=math.exp(-k * log_inv_delta_lambda),
        probability=1.0 - 0.5 * (s / (2.0 * math.e * p)) ** k,
    )


def slope_balanced_bounds(w, nu, q, s, sigma_s_star=0.0):
    """Slope bounds with the 49/16 family of constants (nu = nu_q(s, 7))."""
    lam = _weights_of(w)
    p = lam.size
    Lq = capital_lambda_q(lam, s, q)
    k = s / nu**2
    return BalancedBounds(
        prediction=49.0 * Lq**2 / (16.0 * nu**2) + 4.0 * sigma_s_star,
        l1=49.0 * Lq**2 / (8.0 * nu**2) + 8.0 * sigma_s_star,
        lq_sparse=49.0 * Lq / (24.0 * nu**2),
        lq_compressible=49.0 * Lq / (12.0 * nu**2) + sigma_s_star / Lq,
        delta0=(s / (2.0 * p)) ** k,
        probability=1.0 - 0.5 * (s / (2.0 * p)) ** k,
    )


@dataclass(frozen=True)
class EventFunctionals:
    H: float
    G: float
    H_tilde: float
    F: float
    lhs: float

    @property
    def holds(self):
        """Whether (1/n) xi^T X u <= max(H(u), G(u))."""
        return self.lhs <= max(self.H, self.G)


def _log_profile(p):
    return np.sqrt(np.log(2.0 * p / np.arange(1, p + 1)))


def event_functionals(u, inst, s, q, lam, gamma, delta0) -> EventFunctionals:
    """Noise functionals controlling (1/n) xi^T X u, evaluated at ``u``.

    ``H`` weights the rearranged |u| by sqrt(log(2p/j)); ``G`` scales
    ``||Xu||_2 / sqrt(n)``; ``H_tilde`` and ``F`` are successive upper
    bounds of ``H`` (the second one valid once lambda meets the tuning
    threshold).
    """
    u = _as_vector(u, "u")
    if not np.any(u):
        raise ValueError("u must be nonzero")
    if inst.f is None:
        raise ValueError("the instance must carry f (or beta_star) to form the noise")
    n, p = inst.n, inst.p
    if u.size != p:
        raise ValueError(f"u has {u.size} entries, expected {p}")
    if not (1 <= s <= p):
        raise ValueError(f"s must lie in [1, {p}], got {s}")
    sigma = inst.sigma
    prof = _log_profile(p)
    us = rearrange_desc(u)
    scale = NOISE_CONSTANT * sigma / math.sqrt(n)
    Xu = inst.X @ u
    H = scale * float(us @ prof)
    G = scale * math.sqrt(math.log(1.0 / delta0)) * float(np.linalg.norm(Xu)) / math.sqrt(n)
    nq = lq_norm(u, q)
    if math.isinf(q):
        head = float(np.sum(prof[:s]))
    else:
        r = conjugate_exponent(q)
        head = float(np.sum(prof[:s] ** r) ** (1.0 - 1.0 / q))
    tail_w = float(us[s:] @ prof[s:])
    H_tilde = scale * (nq * head + tail_w)
    s_fac = s if math.isinf(q) else s ** (1.0 - 1.0 / q)
    F = lam * gamma * (s_fac * nq + float(np.sum(us[s:])))
    lhs = float(inst.noise @ Xu) / n
    return EventFunctionals(H, G, H_tilde, F, lhs)


def minimax_rate(n, p, s, q, sigma):
    """sigma * s^(1/q) * sqrt(log(ep/s) / n)."""
    if not (1 <= s <= p):
        raise ValueError(f"s must lie in [1, {p}], got {s}")
    if s > p / 2:
        logger.warning("s=%d lies outside [1, p/2] where the lower bound applies", s)
    s_fac = 1.0 if math.isinf(q) else s ** (1.0 / q)
    return sigma * s_fac * math.sqrt(math.log(math.e * p / s) / n)
