"""Request/response models shared by the HTTP service and the CLI.

A scenario document is one JSON object with sections market/utility/solver
plus endowment and optional loss-constraint fields; unknown fields are
rejected so typos fail loudly.  All defaults are chosen so that the empty
document ``{}`` runs the binomial/exponential baseline at x = 0, seed 0.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MarketSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["binomial", "trinomial", "one_period", "iid_product", "random"] = (
        "binomial"
    )
    # binomial
    s0: float = 1.0
    up: float = 2.0
    down: float = 0.5
    p_up: float = 0.75
    # trinomial
    factors: list[float] | None = None
    probs: list[float] | None = None
    # one_period: explicit state prices, one row per state
    s0_vec: list[float] | None = None
    s1: list[list[float]] | None = None
    # iid_product
    gross_returns: list[list[float]] | None = None
    periods: int = 2
    # random (seed comes from the document)
    max_states: int = 6
    max_assets: int = 2


class UtilitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["exponential", "log_shifted", "power_shifted", "linear"] = (
        "exponential"
    )
    gamma: float = 1.0
    endpoint: float = -2.0
    exponent: float = 0.5


class SolverSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol: float = 1e-8
    lambda_tol: float = 1e-10
    max_iter: int = 10000
    gap_tol: float = 1e-6
    budget_tol: float = 1e-8


class LossBoundSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "one_plus_excursion", "per_path"] = "constant"
    value: float = 1.0
    values: list[float] | None = None


class ScenarioDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    market: MarketSpec = Field(default_factory=MarketSpec)
    utility: UtilitySpec = Field(default_factory=UtilitySpec)
    x: float = 0.0
    c_max: float | None = None
    loss_bound: LossBoundSpec | None = None
    solver: SolverSpec = Field(default_factory=SolverSpec)
    seed: int = 0

    @model_validator(mode="after")
    def _endowment_in_domain(self):
        # families with a finite left endpoint a only define u on (a, oo)
        if self.utility.family in ("log_shifted", "power_shifted"):
            a = self.utility.endpoint
            if self.x <= a:
                raise ValueError(
                    f"x = {self.x} must exceed the utility endpoint a = {a}"
                )
        return self


class RunReport(BaseModel):
    seed: int
    utility_family: str
    value_primal: float
    value_dual: float
    gap: float
    budget_residual: float
    lambda_star: float
    first_order_residual: float
    variational_residual: float
    membership_ok: bool
    martingale_residual: float
    supermartingale_worst: float
    pointwise_claim_error: float | None = None
    constrained_value: float | None = None
    passed: bool
    elapsed_s: float


class DualityCheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trials: int = 10
    seed: int = 0
    paths: int = 6
    assets: int = 2
    x: float = 0.0
    gap_tol: float = 1e-6
    budget_tol: float = 1e-8


class DualityCheckResponse(BaseModel):
    rows: list[RunReport]
    all_passed: bool


class OrliczNormRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    utility: UtilitySpec = Field(default_factory=UtilitySpec)
    values: list[float]
    probs: list[float] | None = None  # uniform when omitted
    which: Literal["loss", "conjugate"] = "loss"


class OrliczNormResponse(BaseModel):
    luxemburg: float
    dual_amemiya: float
    sup_norm: float
    equivalence_lower: float | None = None  # k * gauge, a-finite utilities only
    equivalence_upper: float | None = None  # -a * gauge
    equivalence_ok: bool | None = None


class ClassifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    utility: UtilitySpec = Field(default_factory=UtilitySpec)
    tail: Literal["gaussian", "two_sided_exponential", "cauchy"] | None = None
    rate: float = 1.0
    values: list[float] | None = None
    probs: list[float] | None = None


class ClassifyResponse(BaseModel):
    verdict: str
    critical_scale: float | None
    numeric_agrees: bool
    note: str


class ReproduceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # ex35
    nu: float = 2.0
    rate: float = 1.0
    horizon: float = 1.0
    # ex36 / ex37
    p1: float = 0.9
    p2: float = 0.1
    single_atom: bool = False
    weights: dict[int, float] | None = None
    # ex38
    r: float = 12.0
    depth: int = 40


class TruncationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Literal["ex35", "ex36", "ex37", "ex38", "binomial"]
    levels: list[int]
    x: float = 0.0
    y_atoms: int = 200
    nu: float = 2.0
    rate: float = 1.0
    horizon: float = 1.0
    p1: float = 0.9
    tail: dict[int, float] | None = None
    weights: dict[int, float] | None = None
    r: float = 12.0
    depth: int = 40


class TruncationTableRow(BaseModel):
    level: int
    value_dual: float
    value_primal: float
    gap: float
    lambda_star: float
    expected_gain: float


class TruncationResponse(BaseModel):
    scenario: str
    rows: list[TruncationTableRow]
    analytic_value: float | None
    analytic_regular_mean: float | None
    direction: str
    monotone: bool
    converging: bool | None
