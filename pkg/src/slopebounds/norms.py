"""Rearrangements, the sorted-l1 norm and best s-term approximation errors.

All routines work on dense 1-d float arrays. ``q`` arguments accept
``math.inf`` for the sup-norm case; the Hoelder conjugate exponent
``q / (q - 1)`` is then taken as exactly 1.
"""
import math
from dataclasses import dataclass

import numpy as np


def _as_vector(v, name="v"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.size == 0:
        raise ValueError(f"{name} must be nonempty")
    return v


def conjugate_exponent(q):
    """Return q / (q - 1), with the q = inf limit handled exactly."""
    if math.isinf(q):
        return 1.0
    if q <= 1:
        raise ValueError(f"q must exceed 1, got {q}")
    return q / (q - 1.0)


def lq_norm(v, q):
    v = np.asarray(v, dtype=float)
    if math.isinf(q):
        return float(np.max(np.abs(v))) if v.size else 0.0
    if q == 1:
        return float(np.sum(np.abs(v)))
    if q == 2:
        return float(np.linalg.norm(v))
    a = np.abs(v)
    m = a.max() if a.size else 0.0
    if m == 0.0:
        return 0.0
    # scale first so large q does not overflow
    return float(m * np.sum((a / m) ** q) ** (1.0 / q))


class WeightSchedule:
    """Non-increasing nonnegative weights defining the sorted-l1 norm.

    Parameters
    ----------
    weights : array_like
        lambda_1 >= lambda_2 >= ... >= lambda_p >= 0.
    """

    def __init__(self, weights):
        w = _as_vector(weights, "weights").copy()
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diff(w) > 0):
            raise ValueError("weights must be non-increasing")
        w.setflags(write=False)
        self.weights = w

    def __len__(self):
        return self.weights.size

    def __repr__(self):
        return f"WeightSchedule({self.weights.tolist()!r})"

    def __eq__(self, other):
        return isinstance(other, WeightSchedule) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.weights.tobytes())

    @classmethod
    def constant(cls, lam, p):
        return cls(np.full(p, float(lam)))

    def scaled(self, factor):
        return WeightSchedule(self.weights * float(factor))


def _weights_of(w):
    return w.weights if isinstance(w, WeightSchedule) else WeightSchedule(w).weights


def rearrange_desc(v):
    """Absolute values of ``v`` sorted in non-increasing order."""
    v = _as_vector(v)
    return -np.sort(-np.abs(v))


def sorted_l1_norm(v, w):
    """sum_j lambda_j * v_j^#, the sorted-l1 norm of ``v``."""
    v = _as_vector(v)
    lam = _weights_of(w)
    if lam.size != v.size:
        raise ValueError(f"dimension mismatch: {v.size} entries, {lam.size} weights")
    return float(np.dot(lam, rearrange_desc(v)))


def top_s_support(beta, s):
    """Indices of the s largest |beta_j|, ties broken by lowest index."""
    a = np.abs(np.asarray(beta, dtype=float))
    # stable sort on -|beta| keeps lower indices first among ties
    return np.argsort(-a, kind="stable")[:s]


def _check_s(s, p, lo=0):
    if not (lo <= s <= p):
        raise ValueError(f"s must lie in [{lo}, {p}], got {s}")


def best_s_term_error_star(beta, w, s):
    """sigma_s(beta)_*: sorted-norm distance from beta to the s-sparse vectors.

    Attained by zeroing the s largest entries of ``beta``; because the
    norm is monotone in absolute values, no other s-sparse z does better.
    """
    beta = _as_vector(beta, "beta")
    lam = _weights_of(w)
    if lam.size != beta.size:
        raise ValueError(f"dimension mismatch: {beta.size} entries, {lam.size} weights")
    _check_s(s, beta.size)
    tail = beta.copy()
    tail[top_s_support(beta, s)] = 0.0
    return sorted_l1_norm(tail, lam)


def best_s_term_error_l1(beta, s):
    """sigma_s(beta)_1 = sum of all but the s largest magnitudes."""
    beta = _as_vector(beta, "beta")
    _check_s(s, beta.size)
    return float(np.sum(rearrange_desc(beta)[s:]))


def q_ratio_sparsity(delta, q):
    """(||delta||_1 / ||delta||_q)^(q/(q-1)); equals k on flat k-sparse vectors."""
    delta = _as_vector(delta, "delta")
    nq = lq_norm(delta, q)
    if nq == 0.0:
        raise ValueError("q-ratio sparsity is undefined for the zero vector")
    return float((lq_norm(delta, 1) / nq) ** conjugate_exponent(q))


def lr_quasinorm(beta, r):
    """(sum |beta_j|^r)^(1/r) for 0 < r < 1."""
    a = np.abs(np.asarray(beta, dtype=float))
    m = a.max() if a.size else 0.0
    if m == 0.0:
        return 0.0
    return float(m * np.sum((a / m) ** r) ** (1.0 / r))


def lr_compressibility_bound(beta, w, s, r):
    """Control of sigma_s(beta)_* by the l_r quasi-norm of beta.

    Returns
    -------
    (lhs, rhs) : tuple of float
        ``lhs = sigma_s(beta)_*`` and ``rhs = lambda_1 * s**(r/(1-r)) * ||beta||_r``.

    Notes
    -----
    The residual left after removing the top ``s`` entries is re-sorted, so its
    largest entry meets ``lambda_1``.  Scaling by ``lambda_s`` instead gives a
    quantity that can fall below ``lhs`` when the weights drop steeply after
    position ``s`` (``beta = (1, 1, 1)``, ``w = (1, 0, 0)``, ``s = 2``).  Both
    agree for constant weights.
    """
    if not (0.0 < r < 1.0):
        raise ValueError(f"r must lie in (0, 1), got {r}")
    beta = _as_vector(beta, "beta")
    lam = _weights_of(w)
    _check_s(s, beta.size, lo=1)
    lhs = best_s_term_error_star(beta, lam, s)
    rhs = lam[0] * s ** (r / (1.0 - r)) * lr_quasinorm(beta, r)
    return lhs, float(rhs)


@dataclass(frozen=True)
class SparsityReport:
    s: int
    sigma_s_star: float
    sigma_s_l1: float
    q_ratio: float


def sparsity_report(beta, w, s, q=2.0):
    beta = _as_vector(beta, "beta")
    q_ratio = q_ratio_sparsity(beta, q) if np.any(beta) else 0.0
    return SparsityReport(
        s=int(s),
        sigma_s_star=best_s_term_error_star(beta, w, s),
        sigma_s_l1=best_s_term_error_l1(beta, s),
        q_ratio=q_ratio,
    )
