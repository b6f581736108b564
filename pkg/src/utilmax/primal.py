"""Primal optimal investment on a finite tree, and duality verification.

The unconstrained problem maximizes E[u(x + (H . S)_T)] over strategies H,
a smooth concave program solved by damped Newton with Armijo backtracking.
Loss-constrained problems ((H . S)_t >= -c_max W along every path) go
through a logarithmic barrier with schedule mu = 10^{-k}, k = 1..8, warm
started; when the unconstrained optimum already satisfies the constraints
strictly it is returned as-is, so slack constraints cost no accuracy.

The optimal claim is recovered from the dual side as

    f_x = -phi'(lambda* q* / P)   on the support of q*,

whose budget E_{q*}[f_x] = x + m is the inner first-order condition read
backwards.  verify_duality packages the full certificate chain: duality
gap, budget identity, polytope membership of the claim, pointwise match in
complete models.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import DualSolution, dual_optimize, k_phi_membership
from .errors import InputError, UnboundedObjectiveError
from .market import (
    EventTree,
    arbitrage_certificate,
    martingale_polytope,
    running_gains,
    supermartingale_check,
    terminal_gains,
)
from .utility import UtilityFunction

__all__ = [
    "PrimalSolution",
    "primal_optimize",
    "recover_claim",
    "verify_duality",
    "DualityReport",
    "replication_check",
    "ReplicationReport",
    "shifted_domain_checks",
    "ShiftedDomainReport",
    "loss_bound_monotonicity",
    "MonotonicityReport",
]


def _design_matrix(tree: EventTree) -> np.ndarray:
    """Columns are terminal gains of the basis strategies, shape (paths, n_h)."""
    dS = tree.increments()
    n_h = len(tree.nonterminal) * tree.n_assets
    B = np.zeros((tree.n_paths, n_h))
    for k, nt in enumerate(tree.nonterminal):
        t = int(tree.times[nt])
        on_node = tree.node_at[:, t] == nt
        for i in range(tree.n_assets):
            B[on_node, k * tree.n_assets + i] = dS[on_node, t, i]
    return B


def _running_matrix(tree: EventTree) -> tuple[np.ndarray, np.ndarray]:
    """Rows give (H.S)_tau for every (path, tau >= 1); second array maps rows to paths."""
    dS = tree.increments()
    n_h = len(tree.nonterminal) * tree.n_assets
    T = tree.horizon
    rows = []
    row_path = []
    for tau in range(1, T + 1):
        Bt = np.zeros((tree.n_paths, n_h))
        for k, nt in enumerate(tree.nonterminal):
            t = int(tree.times[nt])
            if t >= tau:
                continue
            on_node = tree.node_at[:, t] == nt
            for i in range(tree.n_assets):
                Bt[on_node, k * tree.n_assets + i] = dS[on_node, t, i]
        rows.append(Bt)
        row_path.append(np.arange(tree.n_paths))
    return np.vstack(rows), np.concatenate(row_path)


@dataclass
class PrimalSolution:
    """Optimal strategy and diagnostics of the primal problem."""

    H: np.ndarray                # (n_nonterminal, d)
    value: float
    gradient_norm: float
    iterations: int
    constrained_active: bool     # barrier path was needed
    terminal_wealth: np.ndarray  # x + optimal gains per path


def _newton_max(
    value_grad_hess,
    h0: np.ndarray,
    *,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, float, int]:
    h = h0.copy()
    val, grad, hess = value_grad_hess(h)
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            break
        neg_h = -(hess - 1e-13 * np.eye(len(h)))
        try:
            step = np.linalg.solve(neg_h, grad)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(neg_h, grad, rcond=None)
        slope = float(grad @ step)
        if slope <= 0.0:
            step = grad.copy()
            slope = float(grad @ step)
            if slope <= 0.0:
                break
        t = 1.0
        accepted = False
        for _ in range(80):
            cand = h + t * step
            cval, cgrad, chess = value_grad_hess(cand)
            if np.isfinite(cval) and cval >= val + 1e-4 * t * slope:
                h, val, grad, hess = cand, cval, cgrad, chess
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    return h, val, float(np.max(np.abs(grad))), it


def primal_optimize(
    tree: EventTree,
    U: UtilityFunction,
    x: float,
    *,
    c_max: float | None = None,
    W: np.ndarray | None = None,
    tol: float = 1e-11,
    max_iter: int = 500,
) -> PrimalSolution:
    """Maximize E[u(x + (H.S)_T)] over strategies, optionally loss-constrained.

    Parameters
    ----------
    tree : EventTree
    U : UtilityFunction
    x : float
        Endowment; must lie strictly inside the utility domain.
    c_max : float, optional
        Loss budget: enforce (H.S)_t >= -c_max * W pathwise (c_max > 0).
    W : array, optional
        Per-path loss weights, required when c_max is given.
    tol : float
        Sup-norm gradient target.

    Raises
    ------
    UnboundedObjectiveError
        When an arbitrage ray drives the objective up through 60 doublings
        (the ray is attached as the certificate).
    """
    if not x > U.endpoint:
        raise InputError(f"endowment {x} outside the utility domain ({U.endpoint}, inf)")
    B = _design_matrix(tree)
    p = tree.path_probs
    n_h = B.shape[1]

    ray = arbitrage_certificate(tree)
    if ray is not None:
        scale = 1.0
        prev = float(p @ np.asarray(U.u(x + B @ (scale * ray)), dtype=float))
        rising = True
        for _ in range(60):
            scale *= 2.0
            cur = float(p @ np.asarray(U.u(x + B @ (scale * ray)), dtype=float))
            if not cur > prev:
                rising = False
                break
            prev = cur
        if rising:
            raise UnboundedObjectiveError(
                "objective increases along an arbitrage ray for 60 doublings; "
                "the supremum equals sup u",
                certificate=ray.reshape(len(tree.nonterminal), tree.n_assets),
            )

    def base_vgh(h):
        g = B @ h
        wealth = x + g
        util = np.asarray(U.u(wealth), dtype=float)
        if np.any(np.isneginf(util)):
            return -np.inf, None, None
        du = np.asarray(U.u_prime(wealth), dtype=float)
        ddu = np.asarray(U.u_double_prime(wealth), dtype=float)
        val = float(p @ util)
        grad = B.T @ (p * du)
        hess = B.T @ ((p * ddu)[:, None] * B)
        return val, grad, hess

    def safe_vgh(h):
        v, g, hh = base_vgh(h)
        if g is None:
            return v, np.zeros(n_h), np.eye(n_h)
        return v, g, hh

    h, val, gnorm, it = _newton_max(safe_vgh, np.zeros(n_h), tol=tol, max_iter=max_iter)
    constrained_active = False

    if c_max is not None:
        if W is None:
            raise InputError("c_max needs per-path loss weights W")
        if not c_max > 0.0:
            raise InputError("c_max must be positive for the barrier path")
        R, row_path = _running_matrix(tree)
        bound = c_max * np.asarray(W, dtype=float)[row_path]
        slack0 = R @ h + bound
        if np.min(slack0) <= 1e-9 * max(1.0, c_max):
            constrained_active = True
            h = np.zeros(n_h)

            def barrier_vgh(mu):
                def vgh(hh):
                    v, g, H2 = base_vgh(hh)
                    if g is None:
                        return -np.inf, None, None
                    s = R @ hh + bound
                    if np.min(s) <= 0.0:
                        return -np.inf, None, None
                    v = v + mu * float(np.sum(np.log(s)))
                    g = g + mu * (R.T @ (1.0 / s))
                    H2 = H2 - mu * (R.T @ ((1.0 / s**2)[:, None] * R))
                    return v, g, H2

                def safe(hh):
                    v, g, H2 = vgh(hh)
                    if g is None:
                        return v, np.zeros(n_h), np.eye(n_h)
                    return v, g, H2

                return safe

            total_it = 0
            for k in range(1, 9):
                mu = 10.0 ** (-k)
                h, _bval, gnorm, its = _newton_max(
                    barrier_vgh(mu), h, tol=max(tol, mu * 1e-3), max_iter=max_iter
                )
                total_it += its
            it = total_it
            val, grad, _ = base_vgh(h)
            gnorm = float(np.max(np.abs(grad))) if grad is not None else np.inf

    # canonical representative: drop any strategy component invisible to the gains
    h_min, *_ = np.linalg.lstsq(B, B @ h, rcond=None)
    if np.max(np.abs(B @ h_min - B @ h)) <= 1e-9 * (1.0 + float(np.max(np.abs(B @ h)))):
        h = h_min
    H = h.reshape(len(tree.nonterminal), tree.n_assets)
    return PrimalSolution(H, val, gnorm, it, constrained_active, x + B @ h)


def recover_claim(U: UtilityFunction, sol: DualSolution, p: np.ndarray) -> np.ndarray:
    """Optimal claim f = -phi'(lambda* q*/P), zero off the support of q*."""
    q = sol.q
    f = np.zeros_like(q)
    pos = sol.support & (q > 0.0)
    with np.errstate(over="ignore"):
        f[pos] = -np.asarray(U.phi_prime(sol.lam * q[pos] / p[pos]), dtype=float)
    return f


@dataclass
class DualityReport:
    primal_value: float
    dual_value: float
    gap: float
    budget_residual: float
    lambda_star: float
    first_order_residual: float
    variational_residual: float
    membership_ok: bool
    membership_gap: float
    pointwise_claim_error: float | None   # complete markets only
    martingale_residual: float
    supermartingale_worst: float
    passed: bool


def verify_duality(
    tree: EventTree,
    U: UtilityFunction,
    x: float,
    *,
    gap_tol: float = 1e-6,
    budget_tol: float = 1e-8,
    tol: float = 1e-8,
    lambda_tol: float = 1e-10,
    max_iter: int = 10000,
) -> DualityReport:
    """Solve both sides and assemble the certificate chain.

    The pass flag requires: nonnegative gap within ``gap_tol`` relative to
    1 + |value|, budget identity within ``budget_tol``, claim membership in
    the budget set, and martingale feasibility of q*.
    """
    poly = martingale_polytope(tree)
    dual = dual_optimize(
        tree, U, x, poly=poly, tol=tol, lambda_tol=lambda_tol, max_iter=max_iter
    )
    primal = primal_optimize(tree, U, x)
    p = tree.path_probs
    f = recover_claim(U, dual, p)
    gap = dual.value - primal.value
    pos = dual.q > 0.0
    budget = abs(float(dual.q[pos] @ f[pos]) - (x + dual.singular_mass))
    member_ok, member_gap, _ = k_phi_membership(f, x, poly, dual.singular_mass)
    mart_res = float(np.max(np.abs(poly.M @ dual.q - poly.rhs)))
    _, sm_worst = supermartingale_check(tree, dual.q, primal.H)
    pointwise = None
    if poly.affine_dim == 0:
        pointwise = float(np.max(np.abs(f - primal.terminal_wealth)))
    scale = 1.0 + abs(dual.value)
    passed = bool(
        -1e-9 * scale <= gap <= gap_tol * scale
        and budget <= budget_tol
        and member_ok
        and mart_res <= 1e-9
    )
    return DualityReport(
        primal.value,
        dual.value,
        gap,
        budget,
        dual.lam,
        dual.first_order_residual,
        dual.variational_residual,
        member_ok,
        member_gap,
        pointwise,
        mart_res,
        sm_worst,
        passed,
    )


@dataclass
class ReplicationReport:
    exact: bool
    H: np.ndarray | None
    superreplication_cost: float
    residual: float


def replication_check(tree: EventTree, f: np.ndarray, x: float) -> ReplicationReport:
    """Try to replicate f - x by trading; fall back to superreplication.

    Exact replication solves the linear system (H.S)_T = f - x (complete
    markets); otherwise a small LP finds the least extra capital pi with
    pi + (H.S)_T >= f - x pathwise and the certificate strategy.
    """
    from scipy.optimize import linprog

    B = _design_matrix(tree)
    target = np.asarray(f, dtype=float) - x
    h, *_ = np.linalg.lstsq(B, target, rcond=None)
    resid = float(np.max(np.abs(B @ h - target)))
    if resid <= 1e-9 * (1.0 + float(np.max(np.abs(target)))):
        H = h.reshape(len(tree.nonterminal), tree.n_assets)
        return ReplicationReport(True, H, 0.0, resid)
    n_h = B.shape[1]
    res = linprog(
        np.concatenate([np.zeros(n_h), [1.0]]),
        A_ub=np.hstack([-B, -np.ones((tree.n_paths, 1))]),
        b_ub=-target,
        bounds=[(None, None)] * n_h + [(None, None)],
        method="highs",
    )
    if not res.success:
        return ReplicationReport(False, None, np.inf, resid)
    H = res.x[:n_h].reshape(len(tree.nonterminal), tree.n_assets)
    return ReplicationReport(False, H, float(res.x[-1]), resid)


@dataclass
class ShiftedDomainReport:
    """Budget feasibility of the recovered claim in the shifted chart.

    For a finite-endpoint utility u on (a, inf), endow x > 0 in the chart of
    u0(t) = u(t + a) on (0, inf).  With X = f_{x+a} - (x + a): every pricing
    measure must satisfy E_Q[x + X] <= x, with equality at the optimum, and
    the dual objective written with phi0(y) = phi(y) + a y at the same
    (lambda, q) reproduces the dual value.
    """

    vertex_gaps: np.ndarray        # E_Q[f] - (x + a) per vertex, <= 0 expected
    worst_vertex_gap: float
    budget_residual: float         # |E_{q*}[f] - (x + a)|
    shifted_objective_gap: float   # phi0 bookkeeping consistency
    strict_at_some_vertex: bool
    dual: DualSolution


def shifted_domain_checks(
    tree: EventTree, U: UtilityFunction, x: float
) -> ShiftedDomainReport:
    """Run the shifted-chart budget checks at chart endowment x > 0."""
    a = U.endpoint
    if not np.isfinite(a):
        raise InputError("shifted-domain checks need a finite utility endpoint")
    if not x > 0.0:
        raise InputError("chart endowment must be positive")
    x0 = x + a
    poly = martingale_polytope(tree)
    dual = dual_optimize(tree, U, x0, poly=poly)
    p = tree.path_probs
    f = recover_claim(U, dual, p)
    if poly.vertices is None:
        raise InputError("vertex enumeration unavailable for this tree size")
    gaps = poly.vertices @ np.where(poly.support, f, 0.0) - x0
    pos = dual.q > 0.0
    budget = abs(float(dual.q[pos] @ f[pos]) - x0)
    lam, q = dual.lam, dual.q
    with np.errstate(over="ignore"):
        phi_vals = np.asarray(U.phi(lam * q / p), dtype=float)
    shifted_obj = lam * x + float(p @ phi_vals) + a * lam * float(q.sum())
    return ShiftedDomainReport(
        gaps,
        float(np.max(gaps)),
        budget,
        abs(shifted_obj - dual.value),
        bool(np.any(gaps < -1e-6)),
        dual,
    )


@dataclass
class MonotonicityReport:
    values: np.ndarray
    dual_value: float
    ordered: bool
    dominated: bool


def loss_bound_monotonicity(
    tree: EventTree,
    U: UtilityFunction,
    x: float,
    c_max: float,
    weights: list,
    *,
    slack: float = 1e-8,
) -> MonotonicityReport:
    """Constrained values are monotone in the loss weight and below the dual.

    weights must be ordered pointwise (W1 <= W2 <= ...); enlarging the
    weight enlarges the admissible set, so the optimal values inherit the
    order, and every constrained value sits below the unconstrained dual.
    """
    vals = []
    for W in weights:
        sol = primal_optimize(tree, U, x, c_max=c_max, W=np.asarray(W, dtype=float))
        vals.append(sol.value)
    vals = np.array(vals)
    dual = dual_optimize(tree, U, x)
    ordered = bool(np.all(np.diff(vals) >= -slack))
    dominated = bool(np.all(vals <= dual.value + slack))
    return MonotonicityReport(vals, dual.value, ordered, dominated)
