"""Validated configuration blocks for the harness and the command line.

Every model forbids unknown keys. ``q`` accepts a number or the string
``"inf"`` and is serialized back the same way, so emitted JSON re-parses
under the same schema.
"""
import math
from typing import Annotated, Literal

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PlainSerializer,
    PositiveInt,
    model_validator,
)

from .weights import DEFAULT_A


def _parse_q(v):
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity"):
            return math.inf
        raise ValueError(f"q must be a number or 'inf', got {v!r}")
    return v


QValue = Annotated[
    float,
    BeforeValidator(_parse_q),
    PlainSerializer(lambda q: "inf" if math.isinf(q) else q, return_type=float | str),
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DesignSpec(_Strict):
    kind: Literal["iid_gaussian", "anisotropic", "scaled_identity"] = "iid_gaussian"
    n: PositiveInt
    p: PositiveInt
    normalize: bool = True
    covariance: list[list[float]] | None = None

    @model_validator(mode="after")
    def _shape(self):
        if self.kind == "anisotropic":
            if self.covariance is None:
                raise ValueError("an anisotropic design needs a covariance matrix")
            if len(self.covariance) != self.p or any(len(r) != self.p for r in self.covariance):
                raise ValueError(f"covariance must be {self.p}x{self.p}")
        elif self.covariance is not None:
            raise ValueError(f"covariance is only used by anisotropic designs, not {self.kind}")
        if self.kind == "scaled_identity" and self.n != self.p:
            raise ValueError("scaled_identity needs n == p")
        return self


class SignalSpec(_Strict):
    kind: Literal["exact_sparse", "lr_ball"] = "exact_sparse"
    p: PositiveInt
    s: NonNegativeInt = 0
    amplitude: float = 1.0
    law: Literal["rademacher", "gaussian"] = "rademacher"
    r: float | None = None
    radius: float | None = None

    @model_validator(mode="after")
    def _ranges(self):
        if self.kind == "exact_sparse" and self.s > self.p:
            raise ValueError(f"s={self.s} exceeds p={self.p}")
        if self.kind == "lr_ball":
            if self.r is None or not (0.0 < self.r < 1.0):
                raise ValueError("an l_r ball needs r in (0, 1)")
            if self.radius is None or not self.radius > 0:
                raise ValueError("an l_r ball needs a positive radius")
        return self


class BoundSettings(_Strict):
    q: QValue = 2.0
    s: PositiveInt
    gamma: float = Field(0.5, gt=0.0, lt=1.0)
    tau: float = Field(0.25, ge=0.0)
    delta0: float = Field(0.1, gt=0.0, lt=1.0)
    A: float = Field(DEFAULT_A, gt=0.0)

    @model_validator(mode="after")
    def _tau(self):
        if not self.tau < 1.0 - self.gamma:
            raise ValueError("tau must be below 1 - gamma")
        if not self.q >= 1:
            raise ValueError("q must lie in [1, inf]")
        return self


class SolverSettings(_Strict):
    max_iter: PositiveInt = 50_000
    tol: float = Field(1e-9, gt=0.0)
    acceleration: bool = True


class SearchSettings(_Strict):
    restarts: NonNegativeInt = 200
    steps: NonNegativeInt = 500
    step: float = Field(1e-2, gt=0.0)
    exhaustive_budget: PositiveInt = 10**6
    seed: int = 0


class REOverride(_Strict):
    """Known restricted eigenvalue constants replacing the search."""

    theta: float | None = Field(None, gt=0.0)
    theta_sparse: float | None = Field(None, gt=0.0)
    nu: float | None = Field(None, gt=0.0)
    nu_sparse: float | None = Field(None, gt=0.0)
    label: str = "override"


class TrialConfig(_Strict):
    design: DesignSpec
    signal: SignalSpec
    sigma: NonNegativeFloat = 1.0
    bounds: BoundSettings
    solver: SolverSettings = SolverSettings()
    search: SearchSettings = SearchSettings()
    re_override: REOverride | None = None
    check_rtol: float = Field(1e-9, ge=0.0)

    @model_validator(mode="after")
    def _dims(self):
        if self.signal.p != self.design.p:
            raise ValueError(f"signal has p={self.signal.p}, design has p={self.design.p}")
        if self.bounds.s > self.design.p:
            raise ValueError(f"bound sparsity s={self.bounds.s} exceeds p={self.design.p}")
        return self


class SimulateConfig(TrialConfig):
    trials: PositiveInt = 200
    seed: int = 0
    n_jobs: PositiveInt = 1


class SweepConfig(TrialConfig):
    axis: Literal["s", "p", "n"]
    grid: list[PositiveInt]
    trials: PositiveInt = 50
    seed: int = 0
    estimator: Literal["slope", "lasso"] = "slope"

    @model_validator(mode="after")
    def _grid(self):
        if not self.grid:
            raise ValueError("grid must not be empty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("grid must be sorted ascending")
        return self


class BoundsRequest(_Strict):
    """Parameter block of the ``bounds`` subcommand."""

    estimator: Literal["lasso", "slope"] = "lasso"
    q: QValue = 2.0
    s: PositiveInt
    gamma: float = Field(0.5, gt=0.0, lt=1.0)
    tau: float = Field(0.25, ge=0.0)
    delta0: float = Field(0.1, gt=0.0, lt=1.0)
    n: PositiveInt
    p: PositiveInt
    sigma: float = Field(1.0, gt=0.0)
    lambda_: float | None = Field(None, alias="lambda", gt=0.0)
    theta: float | None = Field(None, gt=0.0)
    theta_sparse: float | None = Field(None, gt=0.0)
    nu: float | None = Field(None, gt=0.0)
    nu_sparse: float | None = Field(None, gt=0.0)
    A: float = Field(DEFAULT_A, gt=0.0)
    weights: list[float] | None = None
    sigma_s: NonNegativeFloat = 0.0
    re_label: str = "estimated"

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _needs(self):
        if self.estimator == "lasso" and self.theta is None:
            raise ValueError("the lasso bounds need theta")
        if self.estimator == "slope" and self.nu is None:
            raise ValueError("the slope bounds need nu")
        if self.s > self.p:
            raise ValueError(f"s={self.s} exceeds p={self.p}")
        if self.weights is not None and len(self.weights) != self.p:
            raise ValueError("weights must have p entries")
        return self


class SolveConfig(_Strict):
    """Parameter block of the ``solve`` subcommand.

    Without ``--X``/``--y`` files, ``design`` and ``signal`` generate the
    problem from the seed.
    """

    estimator: Literal["lasso", "slope"] = "slope"
    sigma: float = Field(1.0, gt=0.0)
    s: PositiveInt | None = None
    gamma: float = Field(0.5, gt=0.0, lt=1.0)
    lambda_: float | None = Field(None, alias="lambda", gt=0.0)
    A: float = Field(DEFAULT_A, gt=0.0)
    weights: list[float] | None = None
    solver: SolverSettings = SolverSettings()
    design: DesignSpec | None = None
    signal: SignalSpec | None = None

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _needs(self):
        if self.estimator == "lasso" and self.lambda_ is None and self.s is None:
            raise ValueError("the lasso needs lambda or s for the minimal admissible lambda")
        if (self.design is None) != (self.signal is None):
            raise ValueError("design and signal must be given together")
        return self


class REConfig(_Strict):
    """Parameter block of the ``re`` subcommand."""

    kind: Literal["theta", "nu", "theta_max"] = "theta"
    q: QValue = 2.0
    s: PositiveInt
    c0: float = Field(7.0, gt=0.0)
    sigma: float = Field(1.0, gt=0.0)
    A: float = Field(DEFAULT_A, gt=0.0)
    search: SearchSettings = SearchSettings()
