"""Lasso and Slope estimators by (accelerated) proximal gradient descent.

Both estimators minimize

    (1/n) ||y - X beta||^2 + h(beta)

with ``h = 2 lambda ||.||_1`` (Lasso) or ``h = 2 ||.||_*`` (Slope).
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .norms import _weights_of, sorted_l1_norm
from .prox import _prox_sorted, soft_threshold

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemInstance:
    """Design, response and (optionally) the truth behind them.

    ``f`` defaults to ``X @ beta_star`` when the signal is known; the
    noise is then ``y - f``.
    """

    X: np.ndarray
    y: np.ndarray
    sigma: float = 1.0
    beta_star: np.ndarray | None = None
    f: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError(f"X must be a matrix, got shape {X.shape}")
        n, p = X.shape
        if n == 0 or p == 0:
            raise ValueError(f"degenerate design of shape {X.shape}")
        if y.size != n:
            raise ValueError(f"y has {y.size} entries but X has {n} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        beta_star = self.beta_star
        if beta_star is not None:
            beta_star = np.asarray(beta_star, dtype=float).ravel()
            if beta_star.size != p:
                raise ValueError(f"beta_star has {beta_star.size} entries, expected {p}")
            object.__setattr__(self, "beta_star", beta_star)
        f = self.f
        if f is None and beta_star is not None:
            f = X @ beta_star
        if f is not None:
            f = np.asarray(f, dtype=float).ravel()
            if f.size != n:
                raise ValueError(f"f has {f.size} entries, expected {n}")
        object.__setattr__(self, "f", f)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def noise(self):
        if self.f is None:
            raise ValueError("the noise is unknown without f or beta_star")
        return self.y - self.f

    @property
    def column_normalized(self):
        """max_j ||X e_j||_2 / sqrt(n) <= 1 (up to rounding)."""
        return bool(max_column_scale(self.X) <= 1.0 + 1e-12)


def max_column_scale(X):
    X = np.asarray(X, dtype=float)
    return float(np.max(np.linalg.norm(X, axis=0)) / math.sqrt(X.shape[0]))


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 50_000
    tol: float = 1e-9
    step: float | None = None
    acceleration: bool = True
    record_history: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.step is not None and not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    objective: float
    iterations: int
    converged: bool
    stationarity_residual: float
    history: tuple = field(default=(), repr=False)


def spectral_norm(X, max_iter=100, tol=1e-10, seed=0):
    """Largest singular value of X by power iteration on X^T X.

    Falls back to a dense SVD when the iteration has not settled.
    """
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = X.T @ (X @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - est) <= tol * new:
            return new
        est = new
    return float(np.linalg.norm(X, 2))


def lipschitz_constant(X):
    """Lipschitz constant 2 ||X||_op^2 / n of the gradient of the quadratic loss."""
    return 2.0 * spectral_norm(X) ** 2 / X.shape[0]


def _objective(Xb, y, penalty):
    r = y - Xb
    return float(r @ r) / y.size + penalty


def _proximal_gradient(inst, prox, penalty, cfg):
    X, y = inst.X, inst.y
    n, p = X.shape
    if cfg.step is not None:
        step = cfg.step
    else:
        L = lipschitz_constant(X)
        step = 1.0 / L if L > 0 else 1.0
    Xt_y = X.T @ y

    x = np.zeros(p)
    Xx = np.zeros(n)
    F = _objective(Xx, y, penalty(x))
    yk, Xy = x, Xx
    t = 1.0
    history = [F] if cfg.record_history else None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        grad = (2.0 / n) * (X.T @ Xy - Xt_y)
        x_new = prox(yk - step * grad, step)
        Xx_new = X @ x_new
        F_new = _objective(Xx_new, y, penalty(x_new))
        if cfg.acceleration and t > 1.0 and F_new > F:
            # momentum overshoot: restart from the last accepted iterate
            yk, Xy, t = x, Xx, 1.0
            continue
        fixed_point = float(np.linalg.norm(x_new - yk))
        change = abs(F - F_new)
        scale = max(abs(F), abs(F_new))
        if cfg.acceleration:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            yk = x_new + mom * (x_new - x)
            Xy = Xx_new + mom * (Xx_new - Xx)
            t = t_new
        else:
            yk, Xy = x_new, Xx_new
        x, Xx, F = x_new, Xx_new, F_new
        if history is not None:
            history.append(F)
        if fixed_point <= cfg.tol and change <= cfg.tol * scale:
            converged = True
            break
    if not converged:
        logger.warning("proximal gradient stopped at max_iter=%d without converging", cfg.max_iter)
    grad = (2.0 / n) * (X.T @ Xx - Xt_y)
    fixed_point = float(np.linalg.norm(x - prox(x - step * grad, step)))
    F = _objective(X @ x, y, penalty(x))
    return x, F, it, converged, fixed_point, tuple(history or ())


def lasso_kkt_residual(inst, beta, lam):
    """Largest violation of the Lasso optimality conditions at ``beta``."""
    c = inst.X.T @ (inst.y - inst.X @ beta) / inst.n
    on = beta != 0
    viol = np.maximum(np.abs(c) - lam, 0.0)
    viol[on] = np.abs(c[on] - lam * np.sign(beta[on]))
    return float(np.max(viol))


def lasso_objective(inst, beta, lam):
    r = inst.y - inst.X @ beta
    return float(r @ r) / inst.n + 2.0 * lam * float(np.sum(np.abs(beta)))


def slope_objective(inst, beta, w):
    r = inst.y - inst.X @ beta
    return float(r @ r) / inst.n + 2.0 * sorted_l1_norm(beta, w)


def lasso_fit(inst: ProblemInstance, lam: float, cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Lasso with penalty 2 lambda ||beta||_1.

    ``stationarity_residual`` is the KKT violation
    ``max_j dist((1/n) X^T (y - X beta)_j, lambda * d|beta_j|)``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    beta, F, it, conv, _, hist = _proximal_gradient(
        inst,
        lambda v, step: soft_threshold(v, 2.0 * lam * step),
        lambda b: 2.0 * lam * float(np.sum(np.abs(b))),
        cfg,
    )
    return FitResult(beta, F, it, conv, lasso_kkt_residual(inst, beta, lam), hist)


def slope_fit(inst: ProblemInstance, w, cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Slope with penalty 2 ||beta||_* for the weight schedule ``w``.

    ``stationarity_residual`` is the fixed-point residual
    ``||beta - prox(beta - step * grad)||_2``.
    """
    lam = _weights_of(w)
    if lam.size != inst.p:
        raise ValueError(f"{lam.size} weights for {inst.p} coefficients")
    beta, F, it, conv, fp, hist = _proximal_gradient(
        inst,
        lambda v, step: _prox_sorted(v, 2.0 * step * lam),
        lambda b: 2.0 * float(np.dot(lam, -np.sort(-np.abs(b)))),
        cfg,
    )
    return FitResult(beta, F, it, conv, fp, hist)
