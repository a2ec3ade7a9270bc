"""Acceptance suite: twelve end-to-end criteria with their stated tolerances.

Each criterion records a one-line verdict; pytest prints them in the
terminal summary, and ``python3 -m tests.test_acceptance`` runs them
standalone.
"""
import functools
import itertools
import math
import os
import tempfile
import time

import numpy as np
import pytest
from scipy.optimize import minimize

from slopebounds.bounds import event_functionals, interpolated_lq_bound
from slopebounds.cli import dispatch
from slopebounds.config import SimulateConfig, SweepConfig
from slopebounds.harness import monte_carlo, rate_sweep
from slopebounds.io import json_text
from slopebounds.norms import best_s_term_error_star, lq_norm, lr_compressibility_bound, sorted_l1_norm
from slopebounds.prox import prox_sorted_l1
from slopebounds.re_conditions import (
    check_prop2_containment,
    check_prop3_containment,
    check_sre_wre_containment,
    cone_member,
    sre_cone,
    wre_cone,
)
from slopebounds.solvers import ProblemInstance, lasso_fit, slope_fit
from slopebounds.weights import (
    DEFAULT_A,
    SlopeWeightConfig,
    capital_lambda_q,
    capital_lambda_upper,
    lasso_lambda_min,
    slope_weights,
)

RESULTS = {}

MC_CONFIG = {
    "design": {"n": 100, "p": 50},
    "signal": {"p": 50, "s": 5, "amplitude": 5.0},
    "sigma": 1.0,
    "bounds": {"s": 5, "q": 2, "gamma": 0.5, "tau": 0.25, "delta0": 0.1, "A": DEFAULT_A},
    "trials": 200,
    "seed": 0,
}

SWEEP_CONFIG = {
    "design": {"n": 400, "p": 200},
    "signal": {"p": 200, "s": 2, "amplitude": 10.0},
    "sigma": 1.0,
    "bounds": {"s": 2},
    "axis": "s",
    "grid": [2, 4, 8, 16],
    "trials": 50,
    "seed": 0,
    "estimator": "slope",
}


def summary_lines():
    return [RESULTS[k] for k in sorted(RESULTS)]


def _sorted_weights(rng, p):
    return -np.sort(-rng.uniform(0, 2, p))


# ---- oracles -------------------------------------------------------------

def _epigraph_prox(v, w):
    p = v.size
    rows = []
    for perm in itertools.permutations(range(p)):
        for signs in itertools.product((-1.0, 1.0), repeat=p):
            a = np.zeros(p)
            a[list(perm)] = w * np.asarray(signs)
            rows.append(a)
    A = np.array(rows)
    res = minimize(
        lambda z: 0.5 * np.sum((z[:p] - v) ** 2) + z[p],
        np.append(v, np.abs(A @ v).max() + 1.0),
        jac=lambda z: np.append(z[:p] - v, 1.0),
        constraints=[{"type": "ineq", "fun": lambda z: z[p] - A @ z[:p],
                      "jac": lambda z: np.hstack([-A, np.ones((len(A), 1))])}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    return res.x[:p]


def _exhaustive_star(beta, w, s):
    best = math.inf
    for S in itertools.combinations(range(beta.size), s):
        r = beta.copy()
        r[list(S)] = 0.0
        best = min(best, sorted_l1_norm(r, w))
    return best


@functools.lru_cache(maxsize=None)
def _monte_carlo_run():
    cfg = SimulateConfig.model_validate(MC_CONFIG)
    t0 = time.perf_counter()
    rep = monte_carlo(cfg, cfg.trials, cfg.seed)
    return rep, time.perf_counter() - t0


# ---- criteria: each returns (passed, detail) ----------------------------

def crit_prox_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        p = int(rng.integers(1, 4))
        v = rng.normal(0, 3, p)
        w = _sorted_weights(rng, p)
        worst = max(worst, float(np.max(np.abs(prox_sorted_l1(v, w) - _epigraph_prox(v, w)))))
    dt = time.perf_counter() - t0
    return worst <= 1e-5 and dt < 10, f"max deviation {worst:.2e} (tol 1e-5), {dt:.1f}s (limit 10s)"


def crit_best_s_term():
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        p = int(rng.integers(1, 9))
        beta = rng.standard_normal(p) * (rng.random(p) < 0.8)
        w = _sorted_weights(rng, p)
        for s in range(p + 1):
            got, ref = best_s_term_error_star(beta, w, s), _exhaustive_star(beta, w, s)
            worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    dt = time.perf_counter() - t0
    return worst <= 1e-12 and dt < 30, f"max relative gap {worst:.1e}, {dt:.1f}s (limit 30s)"


def crit_slope_lasso_consistency():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(50):
        X = rng.standard_normal((30, 10))
        X *= math.sqrt(30) / np.linalg.norm(X, axis=0)
        beta = np.zeros(10)
        beta[:3] = rng.choice([-2.0, 2.0], 3)
        inst = ProblemInstance(X, X @ beta + rng.standard_normal(30))
        lam = float(rng.uniform(0.05, 1.0))
        a = slope_fit(inst, np.full(10, lam)).objective
        b = lasso_fit(inst, lam).objective
        worst = max(worst, abs(a - b))
    return worst <= 1e-8, f"max objective gap {worst:.1e} (tol 1e-8) on 50 instances"


def crit_event_chain():
    rng = np.random.default_rng(104)
    bad = 0
    for _ in range(10_000):
        n, p = int(rng.integers(5, 80)), int(rng.integers(2, 80))
        s = int(rng.integers(1, p + 1))
        q = [2.0, 2.5, 3.0, 5.0, math.inf][int(rng.integers(5))]
        gamma = float(rng.uniform(0.05, 0.95))
        lam = lasso_lambda_min(gamma, 1.0, n, p, s)
        inst = ProblemInstance(rng.standard_normal((n, p)), rng.standard_normal(n), beta_star=np.zeros(p))
        u = rng.standard_normal(p) * (rng.random(p) < rng.uniform(0.1, 1))
        if not u.any():
            u[0] = 1.0
        ev = event_functionals(u, inst, s, q, lam, gamma, 0.1)
        bad += not (ev.H <= ev.H_tilde * (1 + 1e-12) and ev.H_tilde <= ev.F * (1 + 1e-12))
    return bad == 0, f"{bad} violations of H <= H~ <= F in 10^4 draws at the threshold lambda"


def crit_interpolation():
    rng = np.random.default_rng(105)
    bad = 0
    for _ in range(10_000):
        u = rng.standard_normal(int(rng.integers(1, 50))) * rng.exponential(1.0)
        q = float(rng.uniform(1, 2))
        bad += lq_norm(u, q) > interpolated_lq_bound(lq_norm(u, 1), lq_norm(u, 2), q) * (1 + 1e-12)
    return bad == 0, f"{bad} violations in 10^4 draws"


def crit_lr_compressibility():
    rng = np.random.default_rng(106)
    bad = 0
    families = ("uniform", "slope", "steep")
    for i in range(1000):
        p = int(rng.integers(1, 40))
        s, r = int(rng.integers(1, p + 1)), float(rng.uniform(0.05, 0.95))
        beta = rng.standard_normal(p) * rng.exponential(1.0, p)
        fam = families[i % 3]
        if fam == "uniform":
            w = _sorted_weights(rng, p)
        elif fam == "slope":
            w = slope_weights(SlopeWeightConfig(p=p, n=50, sigma=1.0)).weights
        else:
            w = -np.sort(-rng.exponential(1.0, p) ** 3)
        lhs, rhs = lr_compressibility_bound(beta, w, s, r)
        bad += lhs > rhs * (1 + 1e-12) + 1e-300
    return bad == 0, f"{bad} violations in 1000 draws (sorted-uniform, Slope and steeply decaying weights)"


def _mixed(rng, p):
    v = rng.standard_normal(p)
    k = int(rng.integers(1, p + 1))
    v[rng.permutation(p)[k:]] *= 10.0 ** rng.uniform(-4, 0)
    return v


def crit_containments():
    rng = np.random.default_rng(107)
    p = 40
    w = slope_weights(SlopeWeightConfig(p=p, n=50, sigma=1.0))
    bad = {"sre_in_wre": 0, "sparsity_change": 0, "wre_in_sre": 0}
    members = dict.fromkeys(bad, 0)
    for _ in range(10_000):
        d = _mixed(rng, p)
        q = [2.0, 3.0, 4.0, math.inf][int(rng.integers(4))]
        s, c0 = int(rng.integers(1, 8)), float(rng.uniform(0.1, 7))
        bad["sre_in_wre"] += not check_sre_wre_containment(d, w, q, s, c0)
        bad["sparsity_change"] += not check_prop2_containment(d, q, s, c0)
        bad["wre_in_sre"] += not check_prop3_containment(d, w, q, s, c0)
        in_sre = cone_member(d, sre_cone(q, s, c0))
        members["sre_in_wre"] += in_sre
        members["sparsity_change"] += in_sre
        members["wre_in_sre"] += cone_member(d, wre_cone(w, q, s, c0))
    total = sum(bad.values())
    detail = ", ".join(f"{k}: {bad[k]} violations / {members[k]} members" for k in bad)
    return total == 0, f"10^4 vectors per check; {detail}"


def crit_capital_lambda():
    bad = 0
    n, sigma, A = 50, 1.0, DEFAULT_A
    for p in (5, 20, 50, 200, 1000):
        w = slope_weights(SlopeWeightConfig(p=p, n=n, sigma=sigma, A=A))
        for s in sorted({1, 2, max(1, p // 4), max(1, p // 2), p}):
            for q in (2.0, 2.5, 4.0, 10.0, math.inf):
                bad += capital_lambda_q(w, s, q) > capital_lambda_upper(A, sigma, n, p, s, q) * (1 + 1e-12)
    return bad == 0, f"{bad} violations on the (p, s, q) grid"


def crit_event_frequency():
    rep, _ = _monte_carlo_run()
    parts, ok = [], True
    for est, ev in rep.event.items():
        ok &= ev["passes"]
        parts.append(f"{est} {ev['frequency']:.3f}")
    thr = next(iter(rep.event.values()))["threshold"]
    return ok, f"{', '.join(parts)} vs threshold {thr:.4f} (realized error vectors only)"


def crit_coverage():
    rep, dt = _monte_carlo_run()
    keys = [f"{e}_{k}" for e in ("lasso", "slope") for k in ("l1", "lq_sparse", "lq")]
    ok = dt < 300
    parts = []
    for k in keys:
        c = rep.coverage[k]
        ok &= c["fraction"] >= 0.95
        parts.append(f"{k} {c['fraction']:.3f}")
    flagged = rep.re_sensitive_trials
    return ok, f"{', '.join(parts)}; {flagged} RE-sensitive trials; {dt:.0f}s (limit 300s)"


def crit_rate_slope():
    table = rate_sweep(SweepConfig.model_validate(SWEEP_CONFIG))
    ok = table.slope is not None and 0.7 <= table.slope <= 1.3
    slope = "undefined" if table.slope is None else f"{table.slope:.3f}"
    return ok, f"log-log slope {slope} (target [0.7, 1.3])"


def crit_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "cfg.json")
        with open(cfg, "w") as fh:
            fh.write(json_text({**MC_CONFIG, "trials": 20, "search": {"restarts": 20, "steps": 100}}))
        outs = []
        for name in ("a", "b"):
            code = dispatch(["simulate", "--config", cfg, "--out-dir", os.path.join(tmp, name), "--seed", "7"])
            if code != 0:
                return False, f"simulate exited {code}"
            with open(os.path.join(tmp, name, "trials.csv"), "rb") as fh:
                outs.append(fh.read())
    same = outs[0] == outs[1]
    return same, f"trials.csv {'byte-identical' if same else 'differs'} across two runs ({len(outs[0])} bytes)"


CRITERIA = [
    (1, "prox oracle equivalence", crit_prox_oracle),
    (2, "best s-term oracle", crit_best_s_term),
    (3, "Slope/Lasso consistency", crit_slope_lasso_consistency),
    (4, "noise functional chain", crit_event_chain),
    (5, "norm interpolation", crit_interpolation),
    (6, "l_r compressibility", crit_lr_compressibility),
    (7, "cone containments", crit_containments),
    (8, "weight aggregate bound", crit_capital_lambda),
    (9, "noise event frequency", crit_event_frequency),
    (10, "oracle-inequality coverage", crit_coverage),
    (11, "rate scaling", crit_rate_slope),
    (12, "determinism", crit_determinism),
]


def run_criterion(num, title, fn):
    passed, detail = fn()
    RESULTS[num] = f"[{'PASS' if passed else 'FAIL'}] {num:2d}. {title}: {detail}"
    print(RESULTS[num])
    return passed, detail


@pytest.mark.parametrize("num, title, fn", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_acceptance(num, title, fn):
    passed, detail = run_criterion(num, title, fn)
    assert passed, detail


if __name__ == "__main__":
    results = [run_criterion(*c)[0] for c in CRITERIA]
    raise SystemExit(0 if all(results) else 1)
