"""Restricted eigenvalue quantities of a design matrix.

The strong (SRE) and weighted (WRE) restricted eigenvalues are minima of
the nonconvex ratio ``||X d||_2 / (sqrt(n) ||d||_q)`` over a cone. They
cannot be certified in general, so the estimators below return the best
value found together with a witness vector: every estimate is an upper
bound on the true minimum.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .norms import WeightSchedule, _as_vector, _weights_of, lq_norm, sorted_l1_norm
from .solvers import max_column_scale
from .weights import capital_lambda_q, is_slope_schedule

logger = logging.getLogger(__name__)

SLACK = 1e-12

EXACT = "exact-enumeration"
RANDOMIZED = "randomized-search"
UPPER_BOUND = "upper-bound-on-minimum"


@dataclass(frozen=True)
class ConeSpec:
    kind: str
    q: float
    s: int
    c0: float
    weights: WeightSchedule | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("SRE", "WRE"):
            raise ValueError(f"kind must be SRE or WRE, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not self.q >= 2:
            raise ValueError(f"q must lie in [2, inf], got {self.q}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if not self.c0 > 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if kind == "WRE":
            if self.weights is None:
                raise ValueError("a WRE cone needs a weight schedule")
            if not isinstance(self.weights, WeightSchedule):
                object.__setattr__(self, "weights", WeightSchedule(self.weights))
            if self.s > len(self.weights):
                raise ValueError(f"s={self.s} exceeds p={len(self.weights)}")

    def radius(self, p):
        """Factor K with the cone written as lhs(d) <= K ||d||_q."""
        if self.s > p:
            raise ValueError(f"s={self.s} exceeds p={p}")
        if self.kind == "SRE":
            return (1.0 + self.c0) * _sparsity_factor(self.s, self.q)
        return (1.0 + self.c0) * capital_lambda_q(self.weights, self.s, self.q)


def _sparsity_factor(s, q):
    return s if math.isinf(q) else s ** (1.0 - 1.0 / q)


def _sre_member(delta, q, s, c0):
    # s may be any positive real here
    return lq_norm(delta, 1) <= (1.0 + c0) * _sparsity_factor(s, q) * lq_norm(delta, q) * (1 + SLACK)


def cone_member(delta, spec: ConeSpec) -> bool:
    delta = _as_vector(delta, "delta")
    nq = lq_norm(delta, spec.q)
    if nq == 0.0:
        raise ValueError("cone membership is undefined for the zero vector")
    K = spec.radius(delta.size)
    if spec.kind == "SRE":
        lhs = lq_norm(delta, 1)
    else:
        lhs = sorted_l1_norm(delta, spec.weights)
    return bool(lhs <= K * nq * (1 + SLACK))


def sre_cone(q, s, c0):
    return ConeSpec("SRE", q, s, c0)


def wre_cone(w, q, s, c0):
    return ConeSpec("WRE", q, s, c0, w)


# -- batched helpers: rows of D are candidate directions ---------------------

def _rows_lq(D, q):
    A = np.abs(D)
    if math.isinf(q):
        return A.max(axis=1)
    if q == 2:
        return np.sqrt(np.einsum("ij,ij->i", D, D))
    m = A.max(axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sum((A / safe[:, None]) ** q, axis=1) ** (1.0 / q)


def _rows_lhs(D, spec):
    A = np.abs(D)
    if spec.kind == "SRE":
        return A.sum(axis=1)
    return -np.sort(-A, axis=1) @ spec.weights.weights


def _rows_ratio(D, X, q):
    XD = D @ X.T
    return np.sqrt(np.einsum("ij,ij->i", XD, XD) / X.shape[0]) / _rows_lq(D, q)


def _project(D, spec, K, iters=60):
    """Pull rows into the cone by shrinking every entry outside their top s.

    Rows already inside are returned unchanged. For the others the
    largest tail factor t in [0, 1] keeping the row inside is found by
    bisection; t = 0 leaves an s-sparse vector, which always lies in the cone.
    """
    D = np.array(D, dtype=float, copy=True)
    outside = _rows_lhs(D, spec) > K * _rows_lq(D, spec.q)
    if not np.any(outside):
        return D
    sub = D[outside]
    order = np.argsort(-np.abs(sub), axis=1, kind="stable")
    tail = np.ones_like(sub, dtype=bool)
    np.put_along_axis(tail, order[:, : spec.s], False, axis=1)
    head = np.where(tail, 0.0, sub)
    rest = np.where(tail, sub, 0.0)
    lo = np.zeros(sub.shape[0])
    hi = np.ones(sub.shape[0])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        trial = head + mid[:, None] * rest
        ok = _rows_lhs(trial, spec) <= K * _rows_lq(trial, spec.q)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    D[outside] = head + lo[:, None] * rest
    return D


def _rows_grad(D, X, q):
    n = X.shape[0]
    XD = D @ X.T
    a = np.sqrt(np.einsum("ij,ij->i", XD, XD) / n)
    b = _rows_lq(D, q)
    ga = (XD @ X) / (n * np.where(a > 0, a, 1.0))[:, None]
    if math.isinf(q):
        idx = np.argmax(np.abs(D), axis=1)
        gb = np.zeros_like(D)
        gb[np.arange(D.shape[0]), idx] = np.sign(D[np.arange(D.shape[0]), idx])
    else:
        gb = np.sign(D) * (np.abs(D) / b[:, None]) ** (q - 1.0)
    return ga / b[:, None] - (a / b**2)[:, None] * gb


def _lhs_grad(d, spec):
    if spec.kind == "SRE":
        return np.sign(d)
    order = np.argsort(-np.abs(d), kind="stable")
    g = np.empty_like(d)
    g[order] = spec.weights.weights
    return np.sign(d) * g


def _polish(rows, X, spec, K):
    """Local SLSQP refinement on the unit l2 sphere with the cone as a constraint.

    Projected gradient tends to stall on the cone boundary, where the
    radial tail projection undoes most of each step; a constrained local
    solve moves along the boundary instead. Finite q only.
    """
    q = spec.q
    out = []
    for d0 in rows:
        d0 = d0 / np.linalg.norm(d0)

        def ratio(d):
            return float(_rows_ratio(d[None, :], X, q)[0])

        def ratio_grad(d):
            return _rows_grad(d[None, :], X, q)[0]

        def slack(d):
            return K * float(_rows_lq(d[None, :], q)[0]) - float(_rows_lhs(d[None, :], spec)[0])

        def slack_grad(d):
            b = float(_rows_lq(d[None, :], q)[0])
            gb = np.sign(d) * (np.abs(d) / b) ** (q - 1.0)
            return K * gb - _lhs_grad(d, spec)

        res = optimize.minimize(
            ratio, d0, jac=ratio_grad, method="SLSQP",
            constraints=[
                {"type": "ineq", "fun": slack, "jac": slack_grad},
                {"type": "eq", "fun": lambda d: float(d @ d) - 1.0, "jac": lambda d: 2.0 * d},
            ],
            options={"maxiter": 200, "ftol": 1e-12},
        )
        if np.all(np.isfinite(res.x)) and np.any(res.x):
            out.append(res.x)
    return np.array(out).reshape(-1, X.shape[1])


def _normalize(D, q):
    return D / _rows_lq(D, q)[:, None]


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 200
    steps: int = 500
    step: float = 1e-2
    seed: int = 0
    exhaustive_budget: int = 10**6
    strict: bool = False
    polish: int = 5


@dataclass(frozen=True)
class REEstimate:
    value: float
    method: str
    restarts: int
    witness: np.ndarray = field(repr=False)
    kind: str = "SRE"
    q: float = 2.0
    s: int = 1
    c0: float = 1.0
    direction: str = UPPER_BOUND

    def ratio(self, X):
        return float(_rows_ratio(self.witness[None, :], np.asarray(X, float), self.q)[0])


def _check_design(X, strict):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be a matrix, got shape {X.shape}")
    if max_column_scale(X) > 1.0 + 1e-12:
        msg = "design columns exceed the normalization max_j ||X e_j|| / sqrt(n) <= 1"
        if strict:
            raise ValueError(msg)
        logger.warning(msg)
    return X


def _supports(p, s):
    return itertools.combinations(range(p), s)


def _sparse_candidates(X, s, budget):
    """Flat sign patterns and per-support smallest eigenvectors, all s-sparse."""
    n, p = X.shape
    if math.comb(p, s) * 2**s > budget:
        return None
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=s - 1)), dtype=float)
    signs = np.hstack([np.ones((signs.shape[0], 1)), signs]) if s > 1 else np.ones((1, 1))
    G = X.T @ X / n
    out = []
    chunk = max(1, 200_000 // max(1, signs.shape[0]))
    it = _supports(p, s)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=int)
        if block.size == 0:
            break
        m = block.shape[0]
        D = np.zeros((m * signs.shape[0], p))
        rows = np.repeat(np.arange(m), signs.shape[0])
        np.put_along_axis(D, block[rows], np.tile(signs, (m, 1)), axis=1)
        sub = G[block[:, :, None], block[:, None, :]]
        _, vecs = np.linalg.eigh(sub)
        E = np.zeros((m, p))
        np.put_along_axis(E, block, vecs[:, :, 0], axis=1)
        out.append(D)
        out.append(E)
    return np.vstack(out)


def _restart_starts(p, s, cfg):
    starts = np.empty((cfg.restarts, p))
    for i in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, i])
        z = rng.standard_normal(p)
        if i % 2:
            # alternate dense starts with s-sparse starts plus a small tail
            keep = rng.choice(p, size=min(s, p), replace=False)
            tail = np.ones(p, dtype=bool)
            tail[keep] = False
            z[tail] *= 0.05
        starts[i] = z
    return starts


def _search(X, spec, cfg, warm_starts=None):
    n, p = X.shape
    q = spec.q
    K = spec.radius(p)

    pools = []
    exact = False
    cand = _sparse_candidates(X, spec.s, cfg.exhaustive_budget)
    if cand is not None:
        exact = True
        pools.append(cand)
    _, _, Vt = np.linalg.svd(X, full_matrices=True)
    pools.append(Vt[-min(p, 5):])
    if warm_starts is not None:
        pools.append(np.atleast_2d(np.asarray(warm_starts, dtype=float)))
    seeds = _project(np.vstack(pools), spec, K)
    seeds = seeds[_rows_lq(seeds, q) > 0]
    seed_ratio = _rows_ratio(seeds, X, q)
    best_i = int(np.argmin(seed_ratio))
    best_val, best_vec = float(seed_ratio[best_i]), seeds[best_i]

    # projected gradient on random restarts plus the best few seeds
    top = seeds[np.argsort(seed_ratio, kind="stable")[:10]]
    D = np.vstack([_restart_starts(p, spec.s, cfg), top]) if cfg.restarts else top
    D = _normalize(_project(D, spec, K), q)
    r = _rows_ratio(D, X, q)
    eta = np.full(D.shape[0], cfg.step)
    for _ in range(cfg.steps):
        g = _rows_grad(D, X, q)
        trial = _project(D - eta[:, None] * g, spec, K)
        good_norm = _rows_lq(trial, q) > 0
        trial[~good_norm] = D[~good_norm]
        trial = _normalize(trial, q)
        r_trial = _rows_ratio(trial, X, q)
        better = r_trial < r
        D[better] = trial[better]
        r[better] = r_trial[better]
        eta = np.where(better, eta * 1.25, eta * 0.5)
        if np.all(eta < 1e-14):
            break
    i = int(np.argmin(r))
    if r[i] < best_val:
        best_val, best_vec = float(r[i]), D[i]

    if not math.isinf(q) and cfg.polish:
        pool = np.vstack([best_vec[None, :], D[np.argsort(r, kind="stable")[: cfg.polish]]])
        polished = _polish(pool, X, spec, K)
        if polished.size:
            # SLSQP may end a hair outside; the tail shrink puts it back
            polished = _project(polished, spec, K)
            polished = polished[_rows_lq(polished, q) > 0]
        if polished.size:
            pr = _rows_ratio(polished, X, q)
            j = int(np.argmin(pr))
            if pr[j] < best_val:
                best_val, best_vec = float(pr[j]), polished[j]

    best_vec = best_vec / lq_norm(best_vec, q)
    best_val = float(_rows_ratio(best_vec[None, :], X, q)[0])
    assert cone_member(best_vec, spec)
    return REEstimate(
        value=best_val,
        method=EXACT if exact else RANDOMIZED,
        restarts=cfg.restarts,
        witness=best_vec,
        kind=spec.kind,
        q=q,
        s=spec.s,
        c0=spec.c0,
    )


def estimate_theta_q(X, q, s, c0, cfg: SearchConfig = SearchConfig(), warm_starts=None) -> REEstimate:
    """Upper estimate of the SRE constant theta_q(s, c0) with a witness.

    Candidates are all flat s-sparse sign vectors and smallest
    per-support eigenvectors (when at most ``exhaustive_budget`` of them),
    the smallest right singular vectors of X, ``warm_starts`` and
    ``cfg.restarts`` seeded random points; the best are refined by
    projected gradient descent on the ratio.
    """
    X = _check_design(X, cfg.strict)
    return _search(X, sre_cone(q, s, c0), cfg, warm_starts)


def estimate_nu_q(X, w, q, s, c0, cfg: SearchConfig = SearchConfig(), warm_starts=None) -> REEstimate:
    """Upper estimate of the WRE constant nu_q(s, c0); see estimate_theta_q."""
    X = _check_design(X, cfg.strict)
    if len(_weights_of(w)) != X.shape[1]:
        raise ValueError("weight schedule length must match the number of columns")
    return _search(X, wre_cone(w, q, s, c0), cfg, warm_starts)


def estimate_path(X, kind, q, s, c0_values, w=None, cfg: SearchConfig = SearchConfig()):
    """Estimates over increasing c0, each warm-started with the previous witness.

    Cones grow with c0, so earlier witnesses stay admissible and the
    returned values are non-increasing.
    """
    out = []
    warm = None
    for c0 in sorted(c0_values):
        if kind.upper() == "SRE":
            est = estimate_theta_q(X, q, s, c0, cfg, warm)
        else:
            est = estimate_nu_q(X, w, q, s, c0, cfg, warm)
        warm = est.witness if warm is None else np.vstack([warm, est.witness])
        out.append(est)
    return out


def max_sparse_eigenvalue(X, s, randomized=False, budget=10**6, samples=20_000, seed=0):
    """max over s-sparse d of ||X d||_2 / (sqrt(n) ||d||_2).

    Exhaustive over all supports when there are at most ``budget`` of
    them; with ``randomized=True`` larger problems sample supports and the
    result is then only a lower bound.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if not (1 <= s <= p):
        raise ValueError(f"s must lie in [1, {p}], got {s}")
    G = X.T @ X / n
    if s == 1:
        return float(math.sqrt(max(np.max(np.diag(G)), 0.0)))
    total = math.comb(p, s)
    if total <= budget:
        it = _supports(p, s)
        best = 0.0
        while True:
            block = np.array(list(itertools.islice(it, 50_000)), dtype=int)
            if block.size == 0:
                break
            vals = np.linalg.eigvalsh(G[block[:, :, None], block[:, None, :]])
            best = max(best, float(vals[:, -1].max()))
        return math.sqrt(max(best, 0.0))
    if not randomized:
        raise ValueError(
            f"{total} supports exceed the exhaustive budget {budget}; pass randomized=True"
        )
    rng = np.random.default_rng(seed)
    block = np.array([rng.choice(p, size=s, replace=False) for _ in range(samples)])
    vals = np.linalg.eigvalsh(G[block[:, :, None], block[:, None, :]])
    return math.sqrt(max(float(vals[:, -1].max()), 0.0))


def s_q_threshold(s, p, q):
    """ceil(s * (sqrt(log(2ep/s) / log 2))^(q/(q-1)))."""
    if not (1 <= s <= p):
        raise ValueError(f"s must lie in [1, {p}], got {s}")
    if not q >= 2:
        raise ValueError(f"q must lie in [2, inf], got {q}")
    base = math.sqrt(math.log(2.0 * math.e * p / s) / math.log(2.0))
    expo = 1.0 if math.isinf(q) else q / (q - 1.0)
    return math.ceil(s * base**expo)


def check_prop2_containment(delta, q, s, c0) -> bool:
    """SRE(q, s, c0) membership implies l2-cone membership at sparsity s^(2-2/q)."""
    delta = _as_vector(delta, "delta")
    if not _sre_member(delta, q, s, c0):
        return True
    s2 = s**2 if math.isinf(q) else s ** (2.0 - 2.0 / q)
    return _sre_member(delta, 2.0, s2, c0)


def check_prop3_containment(delta, w, q, s, c0) -> bool:
    """WRE(q, s, c0) membership under Slope weights implies SRE(q, s_q, c0) membership."""
    delta = _as_vector(delta, "delta")
    if not is_slope_schedule(w):
        raise ValueError("the containment needs weights proportional to sqrt(log(2p/j))")
    if not cone_member(delta, wre_cone(w, q, s, c0)):
        return True
    return _sre_member(delta, q, s_q_threshold(s, delta.size, q), c0)


def check_sre_wre_containment(delta, w, q, s, c0) -> bool:
    """SRE(q, s, c0) membership implies WRE(q, s, 1 + c0) membership under Slope weights."""
    delta = _as_vector(delta, "delta")
    if not is_slope_schedule(w):
        raise ValueError("the containment needs weights proportional to sqrt(log(2p/j))")
    if not cone_member(delta, sre_cone(q, s, c0)):
        return True
    return cone_member(delta, wre_cone(w, q, s, 1.0 + c0))
