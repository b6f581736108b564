"""Pure handlers behind the HTTP routes and the CLI subcommands.

Each handler maps a validated request model to a response model (or plain
dict for the reproduce scenarios) with no transport concerns, so the CLI
can call them in-process and the FastAPI layer stays route-only.
"""
from __future__ import annotations

import time
from dataclasses import asdict

import numpy as np

from ..dual import dual_optimize
from ..errors import InputError
from ..market import (
    EventTree,
    binomial_tree,
    iid_product_tree,
    loss_bound,
    one_period_tree,
    random_one_period,
    trinomial_tree,
)
from ..orlicz import (
    FiniteRV,
    TailFamily,
    classify_loss_bound,
    luxemburg_norm,
    norm_equivalence_bounds,
    orlicz_dual_norm,
    young_conjugate,
    young_loss,
)
from ..primal import primal_optimize, verify_duality
from ..singular_probe import (
    CompoundPoissonSpec,
    DiscreteZSpec,
    MatrixModelSpec,
    DiagonalRule,
    ex35_solve,
    ex36_exp_moment,
    ex36_g,
    ex36_gprime,
    ex36_limit_value,
    ex36_singular_mass,
    ex37_calibrate,
    ex38_psi,
    ex38_series,
    ex38_singular_mass,
    minus_s1_diagonal,
    subdiagonal_rule,
    truncation_study,
)
from ..utility import UtilityFunction, utility_from_params
from .schemas import (
    ClassifyRequest,
    ClassifyResponse,
    DualityCheckRequest,
    DualityCheckResponse,
    MarketSpec,
    OrliczNormRequest,
    OrliczNormResponse,
    ReproduceRequest,
    RunReport,
    ScenarioDocument,
    TruncationRequest,
    TruncationResponse,
    TruncationTableRow,
    UtilitySpec,
)

REPRODUCE_NAMES = ("ex35", "ex36", "ex37", "ex38")


def build_utility(spec: UtilitySpec) -> UtilityFunction:
    if spec.family == "exponential":
        return utility_from_params("exponential", gamma=spec.gamma)
    if spec.family == "log_shifted":
        return utility_from_params("log_shifted", endpoint=spec.endpoint)
    if spec.family == "power_shifted":
        return utility_from_params(
            "power_shifted", endpoint=spec.endpoint, exponent=spec.exponent
        )
    return utility_from_params("linear")


def build_market(spec: MarketSpec, seed: int = 0) -> EventTree:
    if spec.kind == "binomial":
        return binomial_tree(spec.s0, spec.up, spec.down, spec.p_up)
    if spec.kind == "trinomial":
        factors = spec.factors if spec.factors is not None else (2.0, 1.0, 0.5)
        probs = spec.probs if spec.probs is not None else (0.3, 0.4, 0.3)
        return trinomial_tree(spec.s0, tuple(factors), tuple(probs))
    if spec.kind == "one_period":
        if spec.s1 is None or spec.probs is None:
            raise InputError("one_period markets need explicit s1 and probs")
        s0 = spec.s0_vec if spec.s0_vec is not None else [spec.s0] * len(spec.s1[0])
        return one_period_tree(s0, spec.s1, spec.probs)
    if spec.kind == "iid_product":
        if spec.gross_returns is None or spec.probs is None:
            raise InputError("iid_product markets need gross_returns and probs")
        s0 = spec.s0_vec if spec.s0_vec is not None else [spec.s0] * len(
            spec.gross_returns[0]
        )
        return iid_product_tree(s0, spec.gross_returns, spec.probs, spec.periods)
    rng = np.random.default_rng(seed)
    return random_one_period(rng, max_states=spec.max_states, max_assets=spec.max_assets)


def _to_report(
    seed: int,
    family: str,
    rep,
    elapsed: float,
    constrained_value: float | None = None,
    passed_override: bool | None = None,
) -> RunReport:
    return RunReport(
        seed=seed,
        utility_family=family,
        value_primal=float(rep.primal_value),
        value_dual=float(rep.dual_value),
        gap=float(rep.gap),
        budget_residual=float(rep.budget_residual),
        lambda_star=float(rep.lambda_star),
        first_order_residual=float(rep.first_order_residual),
        variational_residual=float(rep.variational_residual),
        membership_ok=bool(rep.membership_ok),
        martingale_residual=float(rep.martingale_residual),
        supermartingale_worst=float(rep.supermartingale_worst),
        pointwise_claim_error=(
            None
            if rep.pointwise_claim_error is None
            else float(rep.pointwise_claim_error)
        ),
        constrained_value=constrained_value,
        passed=bool(rep.passed if passed_override is None else passed_override),
        elapsed_s=float(elapsed),
    )


def run_scenario(doc: ScenarioDocument) -> RunReport:
    """Full pipeline on one scenario document: both solves plus certificates."""
    t0 = time.perf_counter()
    tree = build_market(doc.market, doc.seed)
    U = build_utility(doc.utility)
    rep = verify_duality(
        tree,
        U,
        doc.x,
        gap_tol=doc.solver.gap_tol,
        budget_tol=doc.solver.budget_tol,
        tol=doc.solver.tol,
        lambda_tol=doc.solver.lambda_tol,
        max_iter=doc.solver.max_iter,
    )
    constrained_value = None
    passed = rep.passed
    if doc.c_max is not None:
        lb = doc.loss_bound
        if lb is None:
            W = loss_bound(tree, "constant", 1.0)
        else:
            W = loss_bound(tree, lb.kind, lb.value, lb.values)
        sol = primal_optimize(tree, U, doc.x, c_max=doc.c_max, W=W)
        constrained_value = float(sol.value)
        passed = passed and constrained_value <= rep.dual_value + 1e-8
    return _to_report(
        doc.seed,
        doc.utility.family,
        rep,
        time.perf_counter() - t0,
        constrained_value,
        passed,
    )


def run_duality_check(req: DualityCheckRequest) -> DualityCheckResponse:
    """Seeded sweep over random one-period markets, alternating utilities.

    Even seeds run exponential utility, odd seeds the shifted log, so a
    100-trial sweep covers both families evenly.  Rows come back sorted by
    seed regardless of evaluation order.
    """
    rows = []
    for s in range(req.seed, req.seed + req.trials):
        t0 = time.perf_counter()
        rng = np.random.default_rng(s)
        tree = random_one_period(
            rng, max_states=req.paths, max_assets=req.assets
        )
        if s % 2 == 0:
            U = utility_from_params("exponential", gamma=1.0)
            family = "exponential"
        else:
            U = utility_from_params("log_shifted", endpoint=-2.0)
            family = "log_shifted"
        rep = verify_duality(
            tree, U, req.x, gap_tol=req.gap_tol, budget_tol=req.budget_tol
        )
        rows.append(
            _to_report(s, family, rep, time.perf_counter() - t0)
        )
    rows.sort(key=lambda r: r.seed)
    return DualityCheckResponse(rows=rows, all_passed=all(r.passed for r in rows))


def run_orlicz_norm(req: OrliczNormRequest) -> OrliczNormResponse:
    U = build_utility(req.utility)
    probs = req.probs if req.probs is not None else [1.0 / len(req.values)] * len(
        req.values
    )
    f = FiniteRV(tuple(req.values), tuple(probs))
    psi = young_loss(U) if req.which == "loss" else young_conjugate(U)
    lux = luxemburg_norm(psi, f)
    dual = orlicz_dual_norm(U, f)
    lower = upper = ok = None
    if np.isfinite(U.endpoint) and req.which == "loss":
        eq = norm_equivalence_bounds(U, f)
        lower, upper = float(eq.lower), float(eq.upper)
        ok = bool(eq.lower_ok and eq.upper_ok)
    return OrliczNormResponse(
        luxemburg=float(lux),
        dual_amemiya=float(dual),
        sup_norm=float(f.sup_norm),
        equivalence_lower=lower,
        equivalence_upper=upper,
        equivalence_ok=ok,
    )


def run_orlicz_classify(req: ClassifyRequest) -> ClassifyResponse:
    U = build_utility(req.utility)
    if req.tail is not None:
        W = TailFamily(req.tail, req.rate)
    elif req.values is not None:
        probs = req.probs if req.probs is not None else [
            1.0 / len(req.values)
        ] * len(req.values)
        W = FiniteRV(tuple(req.values), tuple(probs))
    else:
        raise InputError("classify needs either a tail family or explicit values")
    c = classify_loss_bound(U, W)
    return ClassifyResponse(
        verdict=c.verdict,
        critical_scale=None if c.critical_scale is None else float(c.critical_scale),
        numeric_agrees=bool(c.consistent),
        note=c.note,
    )


def run_reproduce(name: str, req: ReproduceRequest) -> dict:
    """Headline numbers for the bundled scenarios ex35..ex38."""
    if name == "ex35":
        spec = CompoundPoissonSpec(req.rate, req.horizon, req.nu)
        return {"scenario": "ex35", **asdict(ex35_solve(spec))}
    if name == "ex36":
        tail = req.weights if req.weights else {2: req.p2}
        spec = DiscreteZSpec.from_dict(req.p1, tail)
        out = {
            "scenario": "ex36",
            "gprime_at_1": ex36_gprime(1.0, spec).value,
            "exp_moment": ex36_exp_moment(spec),
            "limit_value": ex36_limit_value(spec),
        }
        try:
            out["singular_mass"] = ex36_singular_mass(spec)
        except InputError as e:
            out["singular_mass"] = None
            out["note"] = str(e)
        return out
    if name == "ex37":
        weights = {2: 1.0} if req.single_atom or not req.weights else req.weights
        spec = ex37_calibrate(weights)
        return {
            "scenario": "ex37",
            "p1": spec.p1,
            "tail": {n: p for n, p in spec.tail},
            "gprime_at_1": ex36_gprime(1.0, spec).value,
            "singular_mass": 0.0,
            "limit_value": ex36_limit_value(spec),
        }
    if name == "ex38":
        spec = MatrixModelSpec(req.r, req.depth)
        at5 = ex38_series(spec, 5.0)
        above = ex38_series(spec, 5.1)
        out = {
            "scenario": "ex38",
            "r": spec.exponent_r,
            "finite_at_5": at5.finite,
            "certificate_at_5": at5.certificate,
            "finite_at_5.1": above.finite,
            "certificate_at_5.1": above.certificate,
            "g_at_5": at5.g,
            "gprime_at_5": at5.gprime,
            "psi_minus_s1": ex38_psi(minus_s1_diagonal(spec)),
            "psi_subdiagonal": ex38_psi(subdiagonal_rule(spec)),
            "psi_bounded": ex38_psi(DiagonalRule("bounded")),
        }
        try:
            out["singular_mass"] = ex38_singular_mass(spec)
        except InputError as e:
            out["singular_mass"] = None
            out["note"] = str(e)
        return out
    raise InputError(f"unknown scenario {name!r}; expected one of {REPRODUCE_NAMES}")


def run_truncation_study(req: TruncationRequest) -> TruncationResponse:
    if req.scenario == "ex35":
        scen = CompoundPoissonSpec(req.rate, req.horizon, req.nu)
    elif req.scenario == "ex36":
        tail = req.tail if req.tail else {2: 1.0 - req.p1}
        scen = DiscreteZSpec.from_dict(req.p1, tail)
    elif req.scenario == "ex37":
        scen = ex37_calibrate(req.weights or {2: 1.0})
    elif req.scenario == "ex38":
        scen = MatrixModelSpec(req.r, req.depth)
    else:
        scen = "binomial"
    study = truncation_study(scen, req.levels, x=req.x, y_atoms=req.y_atoms)
    return TruncationResponse(
        scenario=study.scenario,
        rows=[
            TruncationTableRow(
                level=r.level,
                value_dual=float(r.value_dual),
                value_primal=float(r.value_primal),
                gap=float(r.gap),
                lambda_star=float(r.lambda_star),
                expected_gain=float(r.expected_gain),
            )
            for r in study.rows
        ],
        analytic_value=study.analytic_value,
        analytic_regular_mean=study.analytic_regular_mean,
        direction=study.direction,
        monotone=study.monotone,
        converging=study.converging,
    )
