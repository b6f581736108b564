"""Dual side of the utility maximization problem on a finite tree.

The dual value at endowment x is

    min_{lambda > 0, q in polytope}  lambda (x + m) + E_P[ phi(lambda q / P) ],

where m is the singular mass carried by the candidate functional (always 0
for measures on a finite space, kept explicit for bookkeeping).  For fixed
q the scale solves the strictly monotone first-order condition

    (x + m) + E[(q / P) phi'(lambda q / P)] = 0

by safeguarded bisection with Newton polish to residual <= 1e-10
(lambda_star).  The search itself runs in the scaled chart z = lambda q,
where the objective G(z) = (x+m) sum(z) + E_P[phi(z/P)] is jointly convex
with diagonal Hessian and the martingale constraints become the homogeneous
cone {z >= 0, A z = 0}; with Inada utilities the optimum is strictly
positive on the structural support, so an equality-constrained damped
Newton converges without active-set work, and lambda = sum(z) falls out.
Optimality is still certified by the variational residual

    max_Q (E_Q[-phi'] - m_Q) - (E_q[-phi'] - m_q)  <=  tol,

the maximum running over the polytope (attained at a vertex), not by any
step-size heuristic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ArbitrageError,
    DomainBoundError,
    StrictConcavityError,
    UnboundedObjectiveError,
)
from .market import EventTree, MartingalePolytope, martingale_polytope
from .roots import expand_bracket, monotone_root
from .utility import UtilityFunction

__all__ = [
    "lambda_star",
    "dual_objective",
    "dual_objective_scaled",
    "variational_residual",
    "k_phi_membership",
    "dual_optimize",
    "DualSolution",
]

ARMIJO = 1e-4
MAX_ITER_DEFAULT = 10_000


def lambda_star(
    U: UtilityFunction,
    c: float,
    q: np.ndarray,
    p: np.ndarray,
    *,
    tol: float = 1e-10,
) -> float:
    """Solve (x + m) + sum_i q_i phi'(lambda q_i / p_i) = 0 for lambda.

    Parameters
    ----------
    U : UtilityFunction
        Must be strictly concave (the root needs an invertible phi').
    c : float
        The budget term x + m.
    q, p : arrays
        Candidate measure and reference probabilities; entries of q may be
        zero, which simply drop out of the sum.

    Returns
    -------
    float
        The unique positive root; the residual of the equation is driven
        below ``tol``.

    Raises
    ------
    DomainBoundError
        For finite-endpoint utilities when c <= a * Q(Omega); the map
        lambda -> E[(q/p) phi'(lambda q/p)] is a bijection onto
        (-inf, -a Q(Omega)), so no root exists at or beyond that budget.
    """
    if not U.strictly_concave:
        raise StrictConcavityError(
            "lambda elimination needs a strictly concave utility"
        )
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    sup = q > 0.0
    if not np.any(sup):
        raise ValueError("q must carry positive mass somewhere")
    qs, ps = q[sup], p[sup]
    qmass = float(q.sum())
    a = U.endpoint
    if np.isfinite(a) and c <= a * qmass:
        raise DomainBoundError(
            f"no positive root: budget c = {c} is at or below a * Q(Omega) = "
            f"{a * qmass}; the first-order map only reaches values above it"
        )

    def resid(lam: float) -> float:
        with np.errstate(over="ignore"):
            return c + float(qs @ np.asarray(U.phi_prime(lam * qs / ps), dtype=float))

    def dresid(lam: float) -> float:
        with np.errstate(over="ignore"):
            return float((qs * qs / ps) @ np.asarray(
                U.phi_double_prime(lam * qs / ps), dtype=float
            ))

    lo, hi = expand_bracket(resid, 1e-8, 1.0)
    lam = monotone_root(resid, lo, hi, dfn=dresid, tol_x=1e-15, tol_f=min(tol, 1e-12))
    if abs(resid(lam)) > tol:
        raise RuntimeError(f"lambda root residual {resid(lam)} above {tol}")
    return float(lam)


def dual_objective(
    U: UtilityFunction,
    x: float,
    lam: float,
    q: np.ndarray,
    p: np.ndarray,
    mass: float = 0.0,
) -> float:
    """lambda (x + mass) + E_P[phi(lambda q / P)]."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(over="ignore"):
        vals = np.asarray(U.phi(lam * q / p), dtype=float)
    if np.any(np.isposinf(vals)):
        return np.inf
    return float(lam * (x + mass) + p @ vals)


def dual_objective_scaled(
    U: UtilityFunction, x: float, z: np.ndarray, p: np.ndarray
) -> float:
    """Objective in the scaled-density chart z = lambda q, where it is convex.

    G(z) = x * sum(z) + E_P[phi(z / P)]; segments in z are the straight lines
    of the underlying convex problem, unlike segments in (lambda, q).
    """
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(over="ignore"):
        vals = np.asarray(U.phi(z / p), dtype=float)
    if np.any(np.isposinf(vals)):
        return np.inf
    return float(x * z.sum() + p @ vals)


def _claim_vector(U, lam, q, p, support) -> np.ndarray:
    """-phi'(lambda q / p) on the support, 0 on structurally dead paths."""
    f = np.zeros_like(q)
    with np.errstate(over="ignore", divide="ignore"):
        f[support] = -np.asarray(
            U.phi_prime(lam * q[support] / p[support]), dtype=float
        )
    return f


def variational_residual(
    U: UtilityFunction,
    x: float,
    lam: float,
    q: np.ndarray,
    p: np.ndarray,
    poly: MartingalePolytope,
    mass: float = 0.0,
) -> float:
    """Optimality certificate: best vertex advantage of the claim functional.

    residual = max_Q E_Q[-phi'(lambda q/p)] - E_q[-phi'(lambda q/p)], clipped
    at zero.  Zero (within tolerance) exactly at the dual optimum; the max is
    taken by the LP oracle, so no vertex list is required.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    f = _claim_vector(U, lam, q, p, poly.support & (q >= 0.0))
    best, _ = poly.max_linear(np.where(poly.support, f, 0.0))
    own = float(q @ f)
    return float(max(best - own, 0.0))


def k_phi_membership(
    f: np.ndarray,
    x: float,
    poly: MartingalePolytope,
    mass: float = 0.0,
    tol: float = 1e-8,
) -> tuple[bool, float, np.ndarray]:
    """Check sup_Q E_Q[f] <= x + mass over the polytope.

    Returns (ok, worst gap, attaining measure); the gap is positive when the
    claim costs more than the budget under some pricing measure.
    """
    f = np.where(poly.support, np.asarray(f, dtype=float), 0.0)
    best, argq = poly.max_linear(f)
    gap = best - (x + mass)
    return bool(gap <= tol), float(gap), argq


@dataclass
class DualSolution:
    """Optimal scale, measure and diagnostics of the dual problem."""

    lam: float
    q: np.ndarray
    value: float
    first_order_residual: float      # residual of the lambda equation at (lam, q)
    variational_residual: float      # vertex-advantage certificate
    singular_mass: float             # 0 on finite models, kept for bookkeeping
    iterations: int
    support: np.ndarray
    polytope: MartingalePolytope

    @property
    def entropy_density(self) -> np.ndarray:
        return self.q


def _interior_start(poly: MartingalePolytope, p: np.ndarray, sup: np.ndarray) -> np.ndarray:
    """Project P onto the affine hull, then pull inside the positive cone."""
    Ms = poly.M[:, sup]
    rhs = poly.rhs
    ps = p[sup] / p[sup].sum()
    resid = Ms @ ps - rhs
    q0 = ps - (Ms.T @ np.linalg.pinv(Ms @ Ms.T)) @ resid
    floor = 1e-6 / q0.size
    if np.min(q0) < floor:
        inner_full, t = poly.interior_point()
        inner = inner_full[sup]
        if t <= 0.0:
            raise ArbitrageError("martingale polytope has no interior on its support")
        # smallest blend that clears the floor
        theta = 0.0
        for _ in range(60):
            cand = (1.0 - theta) * q0 + theta * inner
            if np.min(cand) >= min(floor, 0.5 * t):
                q0 = cand
                break
            theta = max(theta * 2.0, 1e-3)
        else:
            q0 = inner
    return q0


def dual_optimize(
    tree: EventTree,
    U: UtilityFunction,
    x: float,
    *,
    poly: MartingalePolytope | None = None,
    tol: float = 1e-8,
    max_iter: int = MAX_ITER_DEFAULT,
    start: np.ndarray | None = None,
    lambda_tol: float = 1e-10,
) -> DualSolution:
    """Minimize the dual objective over the martingale polytope.

    Parameters
    ----------
    tree : EventTree
    U : UtilityFunction
        Strictly concave family.
    x : float
        Initial endowment.
    poly : MartingalePolytope, optional
        Reuse a prebuilt polytope (it is rebuilt from the tree otherwise).
    tol : float
        Target variational residual.
    start : array, optional
        Interior starting measure (full path length); defaults to the
        projection of P pushed inside the polytope.

    Returns
    -------
    DualSolution

    Raises
    ------
    ArbitrageError
        If the polytope is empty.
    UnboundedObjectiveError
        If some path is killed by every martingale measure while u(+inf) is
        infinite (the dual value is +inf and the primal is unbounded).
    """
    if not U.strictly_concave:
        raise StrictConcavityError("dual_optimize needs a strictly concave utility")
    p = tree.path_probs
    if np.isfinite(U.endpoint) and x <= U.endpoint:
        raise DomainBoundError(
            f"budget x = {x} is at or below a * Q(Omega) = {U.endpoint}; "
            "the dual objective is unbounded below"
        )
    if poly is None:
        poly = martingale_polytope(tree)
    if poly.is_empty:
        raise ArbitrageError("martingale polytope is empty: the model has arbitrage")
    sup = poly.support
    dead = ~sup
    if np.any(dead):
        if not np.isfinite(U.u_at_inf):
            raise UnboundedObjectiveError(
                "every martingale measure vanishes on some path while "
                "sup u = +inf: the dual value is infinite"
            )
        const_term = float(p[dead].sum() * U.phi(0.0))
    else:
        const_term = 0.0

    Ms = poly.M[:, sup]
    rhs = poly.rhs
    ps = p[sup]
    n_s = int(sup.sum())
    mass = 0.0
    c = x + mass

    def embed(qs: np.ndarray) -> np.ndarray:
        q = np.zeros(tree.n_paths)
        q[sup] = qs
        return q

    def objective(qs: np.ndarray) -> tuple[float, float]:
        lam = lambda_star(U, c, qs, ps, tol=lambda_tol)
        return dual_objective(U, x, lam, qs, ps, mass) + const_term, lam

    # affine dimension zero: the measure is pinned, only lambda matters
    ker_dim = n_s - int(np.linalg.matrix_rank(Ms))
    if start is not None:
        qs = np.asarray(start, dtype=float)[sup]
    else:
        qs = _interior_start(poly, p, sup)
    if ker_dim == 0:
        qsol, *_ = np.linalg.lstsq(Ms, rhs, rcond=None)
        qs = np.clip(qsol, 0.0, None)
        val, lam = objective(qs)
        q_full = embed(qs)
        fo = abs(c + float(qs[qs > 0.0] @ np.asarray(
            U.phi_prime(lam * qs[qs > 0.0] / ps[qs > 0.0]), dtype=float)))
        vr = variational_residual(U, x, lam, q_full, p, poly, mass)
        return DualSolution(lam, q_full, val, fo, vr, mass, 0, sup, poly)

    # convex chart: minimize G(z) = c sum(z) + E[phi(z/P)] over the cone
    # {z >= 0, A z = 0}; A holds the martingale rows (the mass row scales out)
    A = Ms[1:]
    m_eq = A.shape[0]

    def G_of(z: np.ndarray) -> float:
        with np.errstate(over="ignore", divide="ignore"):
            vals = np.asarray(U.phi(z / ps), dtype=float)
        if np.any(np.isposinf(vals)):
            return np.inf
        return c * float(z.sum()) + float(ps @ vals)

    def kkt_state(z: np.ndarray):
        y = z / ps
        with np.errstate(over="ignore"):
            g = c + np.asarray(U.phi_prime(y), dtype=float)
            h = np.asarray(U.phi_double_prime(y), dtype=float) / ps
        if not (np.all(np.isfinite(h)) and np.all(h > 0.0)):
            return g, h, None, np.inf
        if m_eq:
            S = (A / h) @ A.T
            rhs_mu = -(A @ (g / h))
            try:
                mu = np.linalg.solve(S, rhs_mu)
            except np.linalg.LinAlgError:
                mu, *_ = np.linalg.lstsq(S, rhs_mu, rcond=None)
            kg = g + A.T @ mu
        else:
            kg = g
        return g, h, kg, float(np.max(np.abs(kg)))

    lam = lambda_star(U, c, qs, ps, tol=lambda_tol)
    z = lam * qs
    Gval = G_of(z)
    it = 0
    vres = np.inf
    # Newton rounds: drive the KKT residual under a threshold, ask the LP
    # certificate, tighten and resume if the claim still leaves a vertex gap
    threshold = max(1e-12, 1e-10 * (1.0 + abs(c)))
    for _round in range(4):
        while it < max_iter:
            it += 1
            g, h, kkt_grad, kkt = kkt_state(z)
            if kkt_grad is None or kkt <= threshold:
                break
            dz = -kkt_grad / h
            # equals g . dz but immune to cancellation: A dz = 0 by the Schur
            # solve, so the multiplier term drops out exactly
            slope = -float(kkt_grad @ (kkt_grad / h))
            if slope >= 0.0:
                break
            t = 1.0
            neg = dz < 0.0
            if np.any(neg):
                t = min(1.0, 0.995 * float(np.min(-z[neg] / dz[neg])))
            if kkt <= 1e-6 * (1.0 + abs(c)):
                # quadratic basin: take the guarded full step, skip Armijo
                cand = z + t * dz
                if np.min(cand) > 0.0:
                    _, _, _, kkt_cand = kkt_state(cand)
                    if kkt_cand < kkt:
                        z = cand
                        Gval = G_of(z)
                        continue
            improved = False
            for _ in range(80):
                cand = z + t * dz
                if np.min(cand) > 0.0:
                    cand_val = G_of(cand)
                    if cand_val <= Gval + ARMIJO * t * slope:
                        z, Gval = cand, cand_val
                        improved = True
                        break
                t *= 0.5
            if not improved:
                break
        lam_cur = float(z.sum())
        vres = variational_residual(U, x, lam_cur, embed(z / lam_cur), p, poly, mass)
        if vres <= tol or it >= max_iter:
            break
        threshold = max(threshold * 1e-2, 1e-15)

    lam = float(z.sum())
    qs = z / lam

    def foc_at(lmb: float) -> float:
        pos = qs > 0.0
        return abs(c + float(qs[pos] @ np.asarray(
            U.phi_prime(lmb * qs[pos] / ps[pos]), dtype=float)))

    fo = foc_at(lam)
    if fo > lambda_tol:
        # Newton left the scale slightly off; re-solve the one-dimensional root
        lam = lambda_star(U, c, qs, ps, tol=lambda_tol)
        fo = foc_at(lam)
    q_full = embed(qs)
    val = dual_objective(U, x, lam, qs, ps, mass) + const_term
    vres = variational_residual(U, x, lam, q_full, p, poly, mass)
    return DualSolution(lam, q_full, val, fo, vres, mass, it, sup, poly)
