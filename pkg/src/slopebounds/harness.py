"""Random instances, Monte Carlo runs of the oracle inequalities and rate sweeps.

A batch fixes one design (drawn from the master seed) and estimates its
restricted eigenvalue constants once. Each trial then draws its own signal
and noise from a seed derived from ``(master seed, trial index)``.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bounds import BoundParams, c0_of, event_functionals, lasso_bound_rhs, slope_bound_rhs
from .config import DesignSpec, SignalSpec, SweepConfig, TrialConfig
from .norms import (
    WeightSchedule,
    best_s_term_error_l1,
    best_s_term_error_star,
    lq_norm,
    sorted_l1_norm,
)
from .re_conditions import SearchConfig, estimate_path
from .solvers import ProblemInstance, SolverConfig, lasso_fit, slope_fit
from .weights import SlopeWeightConfig, lasso_lambda_min, slope_weights

logger = logging.getLogger(__name__)

_DESIGN_TAG = 1
_TRIAL_TAG = 2
_SWEEP_TAG = 3

EVENT_NOTE = (
    "event_holds checks the noise event only at the realized error vector; "
    "the bounds need it for every direction, so the empirical frequency is "
    "an upper bound on the probability of the full event"
)
RE_NOTE = (
    "searched restricted eigenvalue constants are upper bounds on the true "
    "minima, so the right-hand sides may be too small; re_flip_factor is the "
    "largest factor k <= 1 such that the check holds with the constant "
    "multiplied by k (0 if none)"
)

ESTIMATORS = ("lasso", "slope")
BOUND_KEYS = ("prediction", "l1", "lq_sparse", "lq")
CHECKS = tuple(f"{e}_{k}" for e in ESTIMATORS for k in BOUND_KEYS)


def derive_seed(*parts):
    """A 32-bit seed determined by the integers in ``parts``."""
    return int(np.random.SeedSequence([int(x) for x in parts]).generate_state(1)[0])


def design_seed(master_seed):
    return derive_seed(master_seed, _DESIGN_TAG)


def gen_design(spec: DesignSpec, seed) -> np.ndarray:
    """Design matrix of ``spec``; columns rescaled to norm sqrt(n) when normalized."""
    n, p = spec.n, spec.p
    if spec.kind == "scaled_identity":
        return math.sqrt(n) * np.eye(n)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    if spec.kind == "anisotropic":
        cov = np.asarray(spec.covariance, dtype=float)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        try:
            L = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        Z = Z @ L.T
    if spec.normalize:
        norms = np.linalg.norm(Z, axis=0)
        if np.any(norms == 0):
            raise ValueError("cannot normalize a zero column")
        Z = Z * (math.sqrt(n) / norms)
    return Z


def gen_signal(spec: SignalSpec, seed) -> np.ndarray:
    """Exactly s-sparse vector or a point on the l_r sphere of radius R_r."""
    p = spec.p
    rng = np.random.default_rng(seed)
    beta = np.zeros(p)
    if spec.kind == "exact_sparse":
        if spec.s > p:
            raise ValueError(f"s={spec.s} exceeds p={p}")
        if spec.s == 0:
            return beta
        support = rng.choice(p, size=spec.s, replace=False)
        if spec.law == "rademacher":
            vals = rng.choice([-1.0, 1.0], size=spec.s)
        else:
            vals = rng.standard_normal(spec.s)
            # a zero amplitude would break the exact support size
            vals[vals == 0.0] = 1.0
        beta[support] = spec.amplitude * vals
        return beta
    # power-law profile over a random permutation, random signs
    profile = np.arange(1, p + 1, dtype=float) ** (-2.0 / spec.r)
    beta[rng.permutation(p)] = profile * rng.choice([-1.0, 1.0], size=p)
    mass = float(np.sum(np.abs(beta) ** spec.r))
    return beta * (spec.radius / mass) ** (1.0 / spec.r)


@dataclass(frozen=True)
class DesignContext:
    """A fixed design with its restricted eigenvalue plug-ins.

    ``re`` maps ``theta``, ``theta_sparse``, ``nu``, ``nu_sparse`` to
    values at c0(gamma, tau) and c0(gamma, 0); ``re_labels`` carries the
    matching provenance.
    """

    X: np.ndarray
    weights: WeightSchedule | None
    lam: float | None
    re: dict
    re_labels: dict
    re_q: float


def _re_q(q):
    # for q < 2 the bounds run through the l2 constant
    return max(q, 2.0)


def _estimator_weights(cfg: TrialConfig, n, p):
    if cfg.sigma == 0:
        return None, None
    b = cfg.bounds
    w = slope_weights(SlopeWeightConfig(p=p, n=n, sigma=cfg.sigma, A=b.A))
    lam = lasso_lambda_min(b.gamma, cfg.sigma, n, p, b.s)
    return w, lam


def prepare_design(cfg: TrialConfig, master_seed, X=None, estimate_re=True) -> DesignContext:
    """Draw (or take) the batch design and fix its restricted eigenvalue plug-ins."""
    if X is None:
        X = gen_design(cfg.design, design_seed(master_seed))
    n, p = X.shape
    w, lam = _estimator_weights(cfg, n, p)
    b = cfg.bounds
    q = _re_q(b.q)
    re, labels = {}, {}
    if cfg.re_override is not None:
        o = cfg.re_override
        for key in ("theta", "theta_sparse", "nu", "nu_sparse"):
            val = getattr(o, key)
            if val is not None:
                re[key], labels[key] = val, o.label
    elif cfg.design.kind == "scaled_identity":
        # ||X d|| / (sqrt n ||d||_q) = ||d||_2 / ||d||_q >= 1 with equality at e_1,
        # which lies in every cone
        for key in ("theta", "theta_sparse", "nu", "nu_sparse"):
            re[key], labels[key] = 1.0, "exact"
    if estimate_re and w is not None:
        scfg = SearchConfig(
            restarts=cfg.search.restarts,
            steps=cfg.search.steps,
            step=cfg.search.step,
            seed=cfg.search.seed,
            exhaustive_budget=cfg.search.exhaustive_budget,
        )
        c0s = [c0_of(b.gamma, 0.0), c0_of(b.gamma, b.tau)]
        for kind, key in (("SRE", "theta"), ("WRE", "nu")):
            if key in re and f"{key}_sparse" in re:
                continue
            path = estimate_path(X, kind, q, b.s, c0s, w=w if kind == "WRE" else None, cfg=scfg)
            est_sparse, est = path
            for k, e in ((f"{key}_sparse", est_sparse), (key, est)):
                if k not in re:
                    re[k] = e.value
                    labels[k] = e.method
    return DesignContext(X, w, lam, re, labels, q)


@dataclass(frozen=True)
class TrialReport:
    seed: int
    errors: dict
    bound_rhs: dict
    inequality_holds: dict
    inequality_lhs: dict
    event_holds: dict
    re_flip_factor: dict
    solver_diagnostics: dict
    re_values: dict = field(default_factory=dict)

    @property
    def re_sensitive(self):
        """Whether some failed check would pass under a smaller RE constant."""
        return any(
            not ok and self.re_flip_factor.get(k, 0.0) > 0.0
            for k, ok in self.inequality_holds.items()
        )

    def row(self):
        """Flat record for per-trial CSV output (fixed column order)."""
        out = {"seed": self.seed}
        for est in ESTIMATORS:
            for k, v in self.errors.get(est, {}).items():
                out[f"{est}_err_{k}"] = v
        for c in CHECKS:
            out[f"{c}_lhs"] = self.inequality_lhs.get(c)
            rhs = self.bound_rhs.get(c)
            out[f"{c}_rhs"] = rhs
            out[f"{c}_holds"] = self.inequality_holds.get(c)
            out[f"{c}_flip"] = self.re_flip_factor.get(c)
        for est in ESTIMATORS:
            out[f"{est}_event"] = self.event_holds.get(est)
            d = self.solver_diagnostics.get(est, {})
            out[f"{est}_iterations"] = d.get("iterations")
            out[f"{est}_converged"] = d.get("converged")
            out[f"{est}_residual"] = d.get("stationarity_residual")
        out["re_sensitive"] = self.re_sensitive
        return out

    def as_dict(self):
        return {
            "seed": self.seed,
            "errors": self.errors,
            "bound_rhs": self.bound_rhs,
            "inequality_holds": self.inequality_holds,
            "inequality_lhs": self.inequality_lhs,
            "event_holds": self.event_holds,
            "re_flip_factor": self.re_flip_factor,
            "solver_diagnostics": self.solver_diagnostics,
            "re_values": self.re_values,
            "re_sensitive": self.re_sensitive,
        }


def _error_norms(u, q, w=None):
    out = {"l1": lq_norm(u, 1.0), "l2": lq_norm(u, 2.0), "lq": lq_norm(u, q), "linf": lq_norm(u, math.inf)}
    if w is not None:
        out["sorted"] = sorted_l1_norm(u, w)
    return out


def _rhs_fields(report):
    return {
        "prediction": report.rhs_prediction,
        "l1": report.rhs_l1,
        "lq_sparse": report.rhs_lq_sparse,
        "lq": report.rhs_lq_compressible,
    }


def _lhs_fields(u, Xu_sq, tau, lam_l1_like, q):
    return {
        "prediction": 2.0 * tau * lam_l1_like + Xu_sq,
        "l1": None,
        "lq_sparse": lq_norm(u, q),
        "lq": lq_norm(u, q),
    }


def _holds(lhs, rhs, rtol):
    return bool(lhs <= rhs * (1.0 + rtol) + 1e-300)


def _flip_factor(rhs_of_k, lhs, rtol, iters=50):
    """Largest k in (0, 1] with lhs <= rhs(k), or 0 when even k -> 0 fails."""
    if _holds(lhs, rhs_of_k(1.0), rtol):
        return 1.0
    lo_k = 1e-6
    if not _holds(lhs, rhs_of_k(lo_k), rtol):
        return 0.0
    lo, hi = lo_k, 1.0
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if _holds(lhs, rhs_of_k(mid), rtol):
            lo = mid
        else:
            hi = mid
    return lo


def _bound_report(est, params, ctx, sigma_s, n, p, sigma):
    if est == "lasso":
        return lasso_bound_rhs(params, ctx.lam, sigma_s, n, p, sigma)
    return slope_bound_rhs(params, ctx.weights, sigma_s, n, p)


def run_trial(cfg: TrialConfig, seed, context: DesignContext | None = None, with_bounds=True) -> TrialReport:
    """One draw of signal and noise, both fits and every applicable check.

    Without a ``context`` the design is drawn from ``seed`` itself and its
    restricted eigenvalue constants are estimated on the spot.
    """
    if context is None:
        context = prepare_design(cfg, seed, estimate_re=with_bounds)
    X = context.X
    n, p = X.shape
    b = cfg.bounds
    q = b.q
    sig_ss, noise_ss = np.random.SeedSequence(int(seed)).spawn(2)
    beta_star = gen_signal(cfg.signal, sig_ss)
    xi = cfg.sigma * np.random.default_rng(noise_ss).standard_normal(n)
    inst = ProblemInstance(X, X @ beta_star + xi, sigma=cfg.sigma, beta_star=beta_star)
    scfg = SolverConfig(max_iter=cfg.solver.max_iter, tol=cfg.solver.tol, acceleration=cfg.solver.acceleration)

    noiseless = context.weights is None
    fits = {}
    if noiseless:
        zero = np.zeros(p)
        fits["lasso"] = fits["slope"] = slope_fit(inst, zero, scfg)
    else:
        fits["lasso"] = lasso_fit(inst, context.lam, scfg)
        fits["slope"] = slope_fit(inst, context.weights, scfg)

    errors, diagnostics, us = {}, {}, {}
    for est in ESTIMATORS:
        fit = fits[est]
        u = fit.beta_hat - beta_star
        us[est] = u
        errors[est] = _error_norms(u, q, context.weights if est == "slope" and not noiseless else None)
        diagnostics[est] = {
            "iterations": fit.iterations,
            "converged": fit.converged,
            "stationarity_residual": fit.stationarity_residual,
            "objective": fit.objective,
        }
        if not fit.converged:
            logger.warning("trial seed=%d: %s solver did not converge", seed, est)

    event = {}
    for est in ESTIMATORS:
        u = us[est]
        if noiseless or not np.any(u):
            event[est] = True
        else:
            ev = event_functionals(u, inst, b.s, context.re_q, context.lam, b.gamma, b.delta0)
            event[est] = ev.holds

    rhs_out, holds, lhs_out, flips = {}, {}, {}, {}
    if with_bounds and not noiseless:
        sparse = int(np.count_nonzero(beta_star)) <= b.s
        for est in ESTIMATORS:
            key = "theta" if est == "lasso" else "nu"
            if key not in context.re:
                continue
            if est == "slope" and q < 2:
                continue  # the Slope bounds are stated for q >= 2
            re_val = context.re[key]
            re_sp = context.re.get(f"{key}_sparse", re_val)
            label = context.re_labels.get(key, "estimated")
            params = BoundParams(
                q=q, s=b.s, gamma=b.gamma, tau=b.tau, delta0=b.delta0,
                re_constant=re_val, re_constant_sparse=re_sp, re_label=label,
            )
            u = us[est]
            Xu = X @ u
            xu_sq = float(Xu @ Xu) / n
            if est == "lasso":
                sigma_s = best_s_term_error_l1(beta_star, b.s)
                l1_like = context.lam * lq_norm(u, 1.0)
                l1_lhs = lq_norm(u, 1.0)
            else:
                sigma_s = best_s_term_error_star(beta_star, context.weights, b.s)
                l1_like = sorted_l1_norm(u, context.weights)
                l1_lhs = l1_like
            if b.tau == 0 and sigma_s > 0:
                continue
            report = _bound_report(est, params, context, sigma_s, n, p, cfg.sigma)
            rhs = _rhs_fields(report)
            lhs = _lhs_fields(u, xu_sq, b.tau, l1_like, q)
            lhs["l1"] = l1_lhs
            if not sparse:
                rhs["lq_sparse"] = None
            if q < 2:
                # only the interpolated exactly-sparse lq bound exists here
                rhs["lq"] = None
            for k in BOUND_KEYS:
                if rhs[k] is None:
                    continue
                name = f"{est}_{k}"
                rhs_out[name] = rhs[k]
                lhs_out[name] = lhs[k]
                holds[name] = _holds(lhs[k], rhs[k], cfg.check_rtol)

                def rhs_of_k(kf, _k=k):
                    scaled = params.replace(re_constant=kf * re_val, re_constant_sparse=kf * re_sp)
                    with _quiet():
                        return _rhs_fields(_bound_report(est, scaled, context, sigma_s, n, p, cfg.sigma))[_k]

                flips[name] = 1.0 if holds[name] else _flip_factor(rhs_of_k, lhs[k], cfg.check_rtol)

    return TrialReport(
        seed=int(seed),
        errors=errors,
        bound_rhs=rhs_out,
        inequality_holds=holds,
        inequality_lhs=lhs_out,
        event_holds=event,
        re_flip_factor=flips,
        solver_diagnostics=diagnostics,
        re_values=dict(context.re),
    )


class _quiet:
    """Silence bound warnings while probing rescaled constants."""

    def __enter__(self):
        self._logger = logging.getLogger("slopebounds.bounds")
        self._level = self._logger.level
        self._logger.setLevel(logging.ERROR)

    def __exit__(self, *exc):
        self._logger.setLevel(self._level)
        return False


def wilson_interval(k, n, level=0.95):
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SimulationReport:
    n_trials: int
    master_seed: int
    coverage: dict
    event: dict
    re_values: dict
    re_labels: dict
    re_sensitive_trials: int
    nonconverged_trials: int
    trials: tuple = field(repr=False)
    notes: tuple = (EVENT_NOTE, RE_NOTE)

    def summary(self):
        """JSON-ready aggregate (per-trial data lives in ``rows()``)."""
        return {
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "coverage": self.coverage,
            "event": self.event,
            "re_values": self.re_values,
            "re_labels": self.re_labels,
            "re_sensitive_trials": self.re_sensitive_trials,
            "nonconverged_trials": self.nonconverged_trials,
            "notes": list(self.notes),
        }

    def rows(self):
        return [t.row() for t in self.trials]


def _aggregate(trials, master_seed, ctx, delta0):
    n_trials = len(trials)
    coverage = {}
    for c in CHECKS:
        verdicts = [t.inequality_holds[c] for t in trials if c in t.inequality_holds]
        if not verdicts:
            continue
        k = sum(verdicts)
        lo, hi = wilson_interval(k, len(verdicts))
        coverage[c] = {
            "holds": k,
            "applicable": len(verdicts),
            "fraction": k / len(verdicts),
            "wilson_low": lo,
            "wilson_high": hi,
        }
    target = 1.0 - delta0 / 2.0
    se = math.sqrt(target * (1.0 - target) / n_trials)
    event = {}
    for est in ESTIMATORS:
        k = sum(t.event_holds[est] for t in trials)
        freq = k / n_trials
        event[est] = {
            "holds": k,
            "frequency": freq,
            "target": target,
            "binomial_se": se,
            "threshold": target - 3.0 * se,
            "passes": freq >= target - 3.0 * se,
        }
    return SimulationReport(
        n_trials=n_trials,
        master_seed=int(master_seed),
        coverage=coverage,
        event=event,
        re_values=dict(ctx.re),
        re_labels=dict(ctx.re_labels),
        re_sensitive_trials=sum(t.re_sensitive for t in trials),
        nonconverged_trials=sum(
            not all(d["converged"] for d in t.solver_diagnostics.values()) for t in trials
        ),
        trials=tuple(trials),
    )


def _trial_job(args):
    cfg, seed, ctx = args
    return run_trial(cfg, seed, ctx)


def trial_seed(master_seed, index):
    return derive_seed(master_seed, _TRIAL_TAG, index)


def monte_carlo(cfg: TrialConfig, n_trials, master_seed, n_jobs=1) -> SimulationReport:
    """Run ``n_trials`` trials on one design and aggregate them in index order."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    ctx = prepare_design(cfg, master_seed)
    jobs = [(cfg, trial_seed(master_seed, i), ctx) for i in range(n_trials)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trials = list(pool.map(_trial_job, jobs))
    else:
        trials = [_trial_job(j) for j in jobs]
    return _aggregate(trials, master_seed, ctx, cfg.bounds.delta0)


@dataclass(frozen=True)
class SweepTable:
    axis: str
    estimator: str
    points: tuple
    slope: float | None
    intercept: float | None
    flag: str | None

    def summary(self):
        return {
            "axis": self.axis,
            "estimator": self.estimator,
            "slope": self.slope,
            "intercept": self.intercept,
            "flag": self.flag,
            "points": [dict(p) for p in self.points],
        }


def rate_predictor(sigma, s, p, n):
    """sigma * sqrt(s log(ep/s) / n)."""
    return sigma * math.sqrt(s * math.log(math.e * p / s) / n)


def _at_grid_point(cfg: SweepConfig, axis, value):
    design = cfg.design.model_dump()
    signal = cfg.signal.model_dump()
    bounds = cfg.bounds.model_dump()
    if axis == "s":
        signal["s"] = value
        bounds["s"] = value
    elif axis == "p":
        design["p"] = signal["p"] = value
        if cfg.design.kind == "scaled_identity":
            design["n"] = value
    else:
        design["n"] = value
        if cfg.design.kind == "scaled_identity":
            design["p"] = signal["p"] = value
    return TrialConfig(
        design=DesignSpec(**design),
        signal=SignalSpec(**signal),
        sigma=cfg.sigma,
        bounds=bounds,
        solver=cfg.solver,
        search=cfg.search,
        check_rtol=cfg.check_rtol,
    )


def rate_sweep(cfg: SweepConfig) -> SweepTable:
    """Median l2 error over a grid and its log-log slope against the rate predictor."""
    grid = list(cfg.grid)
    if grid != sorted(grid):
        raise ValueError("grid must be sorted ascending")
    points = []
    for k, value in enumerate(grid):
        tcfg = _at_grid_point(cfg, cfg.axis, value)
        X = gen_design(tcfg.design, derive_seed(cfg.seed, _SWEEP_TAG, k))
        ctx = prepare_design(tcfg, cfg.seed, X=X, estimate_re=False)
        errs = []
        iters = []
        for i in range(cfg.trials):
            t = run_trial(tcfg, derive_seed(cfg.seed, _SWEEP_TAG, k, i), ctx, with_bounds=False)
            errs.append(t.errors[cfg.estimator]["l2"])
            iters.append(t.solver_diagnostics[cfg.estimator]["converged"])
        d, s_eff = tcfg.design, tcfg.signal.s if tcfg.signal.kind == "exact_sparse" else tcfg.bounds.s
        points.append({
            "value": value,
            "n": d.n,
            "p": d.p,
            "s": s_eff,
            "predictor": rate_predictor(cfg.sigma, max(s_eff, 1), d.p, d.n),
            "median_l2": float(np.median(errs)),
            "mean_l2": float(np.mean(errs)),
            "trials": cfg.trials,
            "converged": int(sum(iters)),
        })
    slope = intercept = None
    flag = None
    if len(points) < 2:
        flag = "single grid point: no slope"
    elif cfg.sigma == 0:
        flag = "noiseless: errors sit at the solver tolerance floor, slope undefined"
    elif any(pt["median_l2"] <= 0 for pt in points):
        flag = "zero median error: slope undefined"
    else:
        xs = np.log([pt["predictor"] for pt in points])
        ys = np.log([pt["median_l2"] for pt in points])
        if np.ptp(xs) == 0:
            flag = "constant predictor: slope undefined"
        else:
            slope, intercept = (float(v) for v in np.polyfit(xs, ys, 1))
    return SweepTable(cfg.axis, cfg.estimator, tuple(points), slope, intercept, flag)
