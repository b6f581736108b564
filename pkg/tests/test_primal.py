"""Primal optimizer, duality certificates, replication."""
import numpy as np
import pytest

from utilmax.dual import dual_optimize
from utilmax.errors import InputError, UnboundedObjectiveError
from utilmax.market import one_period_tree, terminal_gains, trinomial_tree
from utilmax.primal import (
    loss_bound_monotonicity,
    primal_optimize,
    recover_claim,
    replication_check,
    shifted_domain_checks,
    verify_duality,
)
from utilmax.roots import grid_refine_max
from utilmax.utility import ExponentialUtility, ShiftedLogUtility


# --- unconstrained ----------------------------------------------------------

def test_binomial_exponential_strategy_closed_form(binomial, exp_u):
    # 0.75 e^{-h} = 0.125 e^{h/2} pins h = (2/3) ln 6
    sol = primal_optimize(binomial, exp_u, 0.0)
    h_star = np.log(6.0) / 1.5
    assert sol.H.shape == (1, 1)
    assert sol.H[0, 0] == pytest.approx(h_star, rel=1e-9)
    assert sol.value == pytest.approx(-2.25 * 6.0 ** (-2.0 / 3.0), rel=1e-12)
    assert sol.value == pytest.approx(-0.6814202223120523, abs=1e-12)
    assert sol.gradient_norm <= 1e-10
    assert not sol.constrained_active
    np.testing.assert_allclose(
        sol.terminal_wealth, [h_star, -0.5 * h_star], rtol=1e-9
    )


def test_endowment_shifts_value_multiplicatively(binomial, exp_u):
    v0 = primal_optimize(binomial, exp_u, 0.0).value
    v1 = primal_optimize(binomial, exp_u, 1.0).value
    assert v1 == pytest.approx(v0 * np.exp(-1.0), rel=1e-11)


def test_grid_oracle_agreement(trinomial, log_u):
    sol = primal_optimize(trinomial, log_u, 1.0)
    p = trinomial.path_probs
    gains = terminal_gains(trinomial, np.ones((1, 1)))

    def objective(h):
        w = 1.0 + float(h[0]) * gains
        if np.min(w) <= -2.0:
            return -np.inf
        return float(p @ np.log(w + 2.0))

    _, v_grid = grid_refine_max(objective, 1, radius=4.0)
    assert sol.value == pytest.approx(v_grid, abs=1e-7)
    assert sol.value >= v_grid - 1e-12     # optimizer never below the oracle


def test_two_asset_market(exp_u, rng):
    # second asset spans more of the payoff space; value can only improve
    s1_one = [[2.0], [1.0], [0.5]]
    s1_two = [[2.0, 1.5], [1.0, 0.4], [0.5, 1.1]]
    probs = [0.3, 0.4, 0.3]
    lo = primal_optimize(one_period_tree([1.0], s1_one, probs), exp_u, 0.0)
    hi = primal_optimize(
        one_period_tree([1.0, 1.0], s1_two, probs), exp_u, 0.0
    )
    assert hi.value >= lo.value - 1e-12
    assert hi.gradient_norm <= 1e-9


# --- refusals ---------------------------------------------------------------

def test_unbounded_certificate(exp_u, log_u):
    tree = one_period_tree([1.0], [[1.5], [2.0]], [0.5, 0.5])
    with pytest.raises(UnboundedObjectiveError) as err:
        primal_optimize(tree, log_u, 0.0)
    ray = err.value.certificate
    assert ray.shape == (1, 1)
    gains = terminal_gains(tree, ray)
    assert np.min(gains) >= -1e-12 and np.max(gains) > 0.0
    # bounded-above utility: same free lunch, but the sup is sup u = 0,
    # approached along the ray rather than blowing up
    sol = primal_optimize(tree, exp_u, 0.0)
    assert -1e-9 < sol.value <= 0.0


def test_endowment_outside_domain(binomial, log_u):
    for x in (-2.0, -5.0):
        with pytest.raises(InputError):
            primal_optimize(binomial, log_u, x)


def test_cap_requires_weights(binomial, exp_u):
    with pytest.raises(InputError):
        primal_optimize(binomial, exp_u, 0.0, c_max=1.0)
    with pytest.raises(InputError):
        primal_optimize(binomial, exp_u, 0.0, c_max=-1.0, W=np.ones(2))


# --- loss-constrained -------------------------------------------------------

def test_loss_cap_binds(binomial, exp_u):
    free = primal_optimize(binomial, exp_u, 0.0)
    assert np.min(free.terminal_wealth) < -0.3    # cap below is genuinely active
    sol = primal_optimize(binomial, exp_u, 0.0, c_max=0.3, W=np.ones(2))
    assert sol.constrained_active
    assert np.min(sol.terminal_wealth) >= -0.3 - 1e-9
    assert sol.value < free.value
    # binding cap means the down-path loss sits on the boundary
    assert np.min(sol.terminal_wealth) == pytest.approx(-0.3, abs=1e-5)


def test_loss_cap_slack(binomial, exp_u):
    free = primal_optimize(binomial, exp_u, 0.0)
    sol = primal_optimize(binomial, exp_u, 0.0, c_max=10.0, W=np.ones(2))
    assert not sol.constrained_active
    assert sol.value == pytest.approx(free.value, rel=1e-12)


def test_loss_bound_monotonicity(binomial, exp_u):
    weights = [np.full(2, 0.2), np.full(2, 0.5), np.full(2, 2.0)]
    rep = loss_bound_monotonicity(binomial, exp_u, 0.0, 1.0, weights)
    assert rep.ordered
    assert rep.dominated
    assert np.all(np.diff(rep.values) >= -1e-8)
    assert rep.values[-1] <= rep.dual_value + 1e-8
    # largest weight (cap 2.0) no longer binds: back to the free optimum
    assert rep.values[-1] == pytest.approx(rep.dual_value, rel=1e-8)


# --- claims and replication -------------------------------------------------

def test_recover_claim_is_marginal_inverse(trinomial, exp_u):
    sol = dual_optimize(trinomial, exp_u, 0.4)
    f = recover_claim(exp_u, sol, trinomial.path_probs)
    density = sol.lam * sol.q / trinomial.path_probs
    np.testing.assert_allclose(
        np.asarray(exp_u.u_prime(f), dtype=float), density, rtol=1e-9
    )


def test_complete_market_claim_matches_wealth(binomial, log_u):
    x = 0.5
    dual = dual_optimize(binomial, log_u, x)
    prim = primal_optimize(binomial, log_u, x)
    f = recover_claim(log_u, dual, binomial.path_probs)
    np.testing.assert_allclose(f, prim.terminal_wealth, atol=1e-8)
    # closed form: a + (x - a) p/q
    q = np.array([1.0 / 3.0, 2.0 / 3.0])
    np.testing.assert_allclose(
        f, -2.0 + (x + 2.0) * binomial.path_probs / q, rtol=1e-9
    )


def test_replication_exact_binomial(binomial, exp_u):
    dual = dual_optimize(binomial, exp_u, 0.0)
    f = recover_claim(exp_u, dual, binomial.path_probs)
    rep = replication_check(binomial, f, 0.0)
    assert rep.exact
    assert rep.superreplication_cost == 0.0
    assert rep.residual <= 1e-10
    np.testing.assert_allclose(
        terminal_gains(binomial, rep.H), f - 0.0, atol=1e-9
    )


def test_superreplication_cost_trinomial(trinomial):
    # pays 1 on the up path; sup_Q Q(up) = 1/3 over the martingale segment
    f = np.array([1.0, 0.0, 0.0])
    rep = replication_check(trinomial, f, 0.0)
    assert not rep.exact
    assert rep.superreplication_cost == pytest.approx(1.0 / 3.0, abs=1e-9)
    gains = terminal_gains(trinomial, rep.H)
    assert np.min(rep.superreplication_cost + gains - f) >= -1e-9


# --- certificate chain ------------------------------------------------------

def test_verify_duality_complete(binomial, exp_u):
    rep = verify_duality(binomial, exp_u, 0.0)
    assert rep.passed
    assert abs(rep.gap) <= 1e-9 * (1.0 + abs(rep.dual_value))
    assert rep.budget_residual <= 1e-8
    assert rep.membership_ok
    assert rep.pointwise_claim_error is not None
    assert rep.pointwise_claim_error <= 1e-7
    assert rep.martingale_residual <= 1e-10
    assert rep.supermartingale_worst <= 1e-8


def test_verify_duality_incomplete(trinomial, log_u):
    rep = verify_duality(trinomial, log_u, 1.0)
    assert rep.passed
    assert rep.gap >= -1e-9 * (1.0 + abs(rep.dual_value))
    assert rep.pointwise_claim_error is None    # polytope is a segment
    assert rep.lambda_star == pytest.approx(1.0 / 3.0, rel=1e-8)


def test_shifted_domain_checks(trinomial, log_u):
    rep = shifted_domain_checks(trinomial, log_u, 0.5)
    assert rep.worst_vertex_gap <= 1e-8
    assert rep.budget_residual <= 1e-8
    assert rep.shifted_objective_gap <= 1e-9
    assert rep.dual.lam == pytest.approx(2.0, rel=1e-8)   # 1/(x0 - a) = 1/0.5


def test_shifted_domain_input_errors(trinomial, exp_u, log_u):
    with pytest.raises(InputError):
        shifted_domain_checks(trinomial, exp_u, 0.5)      # no finite endpoint
    with pytest.raises(InputError):
        shifted_domain_checks(trinomial, log_u, 0.0)
