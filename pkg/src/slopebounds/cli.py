"""Command-line entry point.

Exit codes: 0 on success, 1 on invalid input (bad flags, malformed or
schema-violating config, unreadable files), 2 on numerical failure
(non-convergence or a non-normalized design under ``--strict``, linear
algebra errors).
"""
import argparse
import json
import logging
import os
import sys

import numpy as np
from pydantic import ValidationError

from . import io as sio
from .bounds import BoundParams, lasso_bound_rhs, slope_bound_rhs
from .config import (
    BoundsRequest,
    REConfig,
    SimulateConfig,
    SolveConfig,
    SweepConfig,
)
from .harness import derive_seed, design_seed, gen_design, gen_signal, monte_carlo, rate_sweep
from .norms import WeightSchedule
from .re_conditions import SearchConfig, estimate_nu_q, estimate_theta_q, max_sparse_eigenvalue
from .solvers import ProblemInstance, SolverConfig, lasso_fit, max_column_scale, slope_fit
from .weights import DEFAULT_A, SlopeWeightConfig, lasso_lambda_min, slope_weights

logger = logging.getLogger("slopebounds")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _load(model, path, **overrides):
    if path is None:
        data = {}
    else:
        with open(path) as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return model.model_validate(data)


def _emit(out_dir, name, text):
    if out_dir is None:
        sys.stdout.write(text)
    else:
        sio.atomic_write_text(os.path.join(out_dir, name), text)


def _check_normalized(X, strict):
    scale = max_column_scale(X)
    if scale > 1.0 + 1e-12:
        msg = f"design columns exceed the normalization (max_j ||X e_j||/sqrt(n) = {scale:.6g})"
        if strict:
            raise NumericalFailure(msg)
        logger.warning(msg)


def cmd_weights(args):
    if args.p is None or args.n is None:
        raise ValueError("weights needs --p and --n")
    cfg = SlopeWeightConfig(p=args.p, n=args.n, sigma=args.sigma, A=args.A)
    w = slope_weights(cfg).weights
    rows = [{"j": j, "lambda_j": v} for j, v in enumerate(w, start=1)]
    _emit(args.out_dir, "weights.csv", sio.csv_text(rows, ["j", "lambda_j"]))


def cmd_solve(args):
    cfg = _load(SolveConfig, args.config)
    seed = args.seed if args.seed is not None else 0
    beta_star = None
    if args.X is not None or args.y is not None:
        if args.X is None or args.y is None:
            raise ValueError("--X and --y must be given together")
        X, y = sio.read_matrix(args.X), sio.read_vector(args.y)
    elif cfg.design is not None:
        X = gen_design(cfg.design, derive_seed(seed, 1))
        beta_star = gen_signal(cfg.signal, derive_seed(seed, 2))
        noise = cfg.sigma * np.random.default_rng(derive_seed(seed, 3)).standard_normal(X.shape[0])
        y = X @ beta_star + noise
    else:
        raise ValueError("solve needs --X/--y or a design and signal in the config")
    _check_normalized(X, args.strict)
    inst = ProblemInstance(X, y, sigma=cfg.sigma, beta_star=beta_star)
    n, p = inst.n, inst.p
    scfg = SolverConfig(max_iter=cfg.solver.max_iter, tol=cfg.solver.tol, acceleration=cfg.solver.acceleration)
    if cfg.estimator == "lasso":
        lam = cfg.lambda_ if cfg.lambda_ is not None else lasso_lambda_min(cfg.gamma, cfg.sigma, n, p, cfg.s)
        fit = lasso_fit(inst, lam, scfg)
        tuning = {"lambda": lam}
    else:
        if cfg.weights is not None:
            w = WeightSchedule(cfg.weights)
        else:
            w = slope_weights(SlopeWeightConfig(p=p, n=n, sigma=cfg.sigma, A=cfg.A))
        fit = slope_fit(inst, w, scfg)
        tuning = {"weights": w.weights}
    if args.strict and not fit.converged:
        raise NumericalFailure(f"{cfg.estimator} solver did not converge in {fit.iterations} iterations")
    summary = {
        "estimator": cfg.estimator,
        **tuning,
        "objective": fit.objective,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "stationarity_residual": fit.stationarity_residual,
        "beta_hat": fit.beta_hat,
    }
    if beta_star is not None:
        summary["beta_star"] = beta_star
    _emit(args.out_dir, "solve.json", sio.json_text(summary))


def cmd_bounds(args):
    req = _load(BoundsRequest, args.config)
    if req.estimator == "lasso":
        lam = req.lambda_ if req.lambda_ is not None else lasso_lambda_min(req.gamma, req.sigma, req.n, req.p, req.s)
        params = BoundParams(
            q=req.q, s=req.s, gamma=req.gamma, tau=req.tau, delta0=req.delta0,
            re_constant=req.theta, re_constant_sparse=req.theta_sparse, re_label=req.re_label,
        )
        report = lasso_bound_rhs(params, lam, req.sigma_s, req.n, req.p, req.sigma)
        extra = {"lambda": lam}
    else:
        if req.weights is not None:
            w = WeightSchedule(req.weights)
        else:
            w = slope_weights(SlopeWeightConfig(p=req.p, n=req.n, sigma=req.sigma, A=req.A))
        params = BoundParams(
            q=req.q, s=req.s, gamma=req.gamma, tau=req.tau, delta0=req.delta0,
            re_constant=req.nu, re_constant_sparse=req.nu_sparse, re_label=req.re_label,
        )
        report = slope_bound_rhs(params, w, req.sigma_s, req.n, req.p, req.sigma)
        extra = {}
    _emit(args.out_dir, "bounds.json", sio.json_text({**report.as_dict(), **extra}))


def cmd_re(args):
    if args.X is None:
        raise ValueError("re needs --X")
    cfg = _load(REConfig, args.config)
    X = sio.read_matrix(args.X)
    n, p = X.shape
    if cfg.s > p:
        raise ValueError(f"s={cfg.s} exceeds p={p}")
    seed = args.seed if args.seed is not None else cfg.search.seed
    _check_normalized(X, args.strict)
    if cfg.kind == "theta_max":
        value = max_sparse_eigenvalue(
            X, cfg.s, randomized=args.randomized, budget=cfg.search.exhaustive_budget, seed=seed
        )
        out = {"kind": "theta_max", "s": cfg.s, "value": value,
               "direction": "lower-bound-on-maximum" if args.randomized else "exact"}
        _emit(args.out_dir, "re.json", sio.json_text(out))
        return
    scfg = SearchConfig(
        restarts=cfg.search.restarts,
        steps=cfg.search.steps,
        step=cfg.search.step,
        seed=seed,
        # --randomized skips the support enumeration altogether
        exhaustive_budget=1 if args.randomized else cfg.search.exhaustive_budget,
        strict=args.strict,
    )
    if cfg.kind == "theta":
        est = estimate_theta_q(X, cfg.q, cfg.s, cfg.c0, scfg)
    else:
        w = slope_weights(SlopeWeightConfig(p=p, n=n, sigma=cfg.sigma, A=cfg.A))
        est = estimate_nu_q(X, w, cfg.q, cfg.s, cfg.c0, scfg)
    out = {
        "kind": cfg.kind,
        "q": cfg.q,
        "s": cfg.s,
        "c0": cfg.c0,
        "value": est.value,
        "method": est.method,
        "direction": est.direction,
        "restarts": est.restarts,
        "witness": est.witness,
    }
    _emit(args.out_dir, "re.json", sio.json_text(out))


def _require_out_dir(args):
    if args.out_dir is None:
        raise ValueError(f"{args.command} needs --out-dir")


def cmd_simulate(args):
    _require_out_dir(args)
    cfg = _load(SimulateConfig, args.config, seed=args.seed, trials=args.trials)
    if args.strict:
        X = gen_design(cfg.design, design_seed(cfg.seed))
        _check_normalized(X, True)
    report = monte_carlo(cfg, cfg.trials, cfg.seed, n_jobs=cfg.n_jobs)
    if args.strict and report.nonconverged_trials:
        raise NumericalFailure(f"{report.nonconverged_trials} trials did not converge")
    summary = {"config": cfg.model_dump(mode="json", by_alias=True), **report.summary()}
    csv_out = sio.csv_text(report.rows())
    sio.atomic_write_text(os.path.join(args.out_dir, "trials.csv"), csv_out)
    sio.write_json(os.path.join(args.out_dir, "summary.json"), summary)


def cmd_sweep(args):
    _require_out_dir(args)
    cfg = _load(SweepConfig, args.config, seed=args.seed, trials=args.trials)
    table = rate_sweep(cfg)
    if args.strict and any(pt["converged"] < pt["trials"] for pt in table.points):
        raise NumericalFailure("some sweep fits did not converge")
    summary = {"config": cfg.model_dump(mode="json", by_alias=True), **table.summary()}
    sio.write_csv(os.path.join(args.out_dir, "sweep.csv"), list(table.points))
    sio.write_json(os.path.join(args.out_dir, "sweep.json"), summary)


COMMANDS = {
    "weights": cmd_weights,
    "solve": cmd_solve,
    "bounds": cmd_bounds,
    "re": cmd_re,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = _Parser(prog="slopebounds", description="Lasso and Slope oracle-inequality toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON parameter file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir")
        sp.add_argument("--strict", action="store_true", help="fail on non-normalized designs and non-convergence")

    sp = sub.add_parser("weights", help="Slope weight schedule as CSV")
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--A", type=float, default=DEFAULT_A)
    common(sp, config=False)

    sp = sub.add_parser("solve", help="fit Lasso or Slope")
    sp.add_argument("--X", help="design matrix CSV")
    sp.add_argument("--y", help="response vector, one value per line")
    common(sp)

    sp = sub.add_parser("bounds", help="oracle-inequality constants and right-hand sides")
    common(sp)

    sp = sub.add_parser("re", help="restricted eigenvalue estimates")
    sp.add_argument("--X", help="design matrix CSV")
    sp.add_argument("--randomized", action="store_true", help="skip exhaustive enumeration")
    common(sp)

    for name, text in (("simulate", "Monte Carlo check of the bounds"), ("sweep", "error-rate sweep")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--trials", type=int)
        common(sp)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: invalid configuration:\n{exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, ArithmeticError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
