"""Event trees, trading gains and the martingale polytope."""
import numpy as np
import pytest

from utilmax.errors import InputError
from utilmax.market import (
    EventTree,
    admissible_scale,
    arbitrage_certificate,
    binomial_tree,
    equality_of_sups_check,
    iid_product_tree,
    loss_bound,
    martingale_polytope,
    one_period_tree,
    random_one_period,
    running_gains,
    suitability_witness,
    supermartingale_check,
    terminal_gains,
    trinomial_tree,
    unbounded_one_period_witness,
)
from utilmax.utility import ExponentialUtility


# --- tree construction ------------------------------------------------------

def test_binomial_layout(binomial):
    assert binomial.n_paths == 2
    assert binomial.horizon == 1
    assert binomial.n_assets == 1
    np.testing.assert_allclose(binomial.path_probs, [0.75, 0.25])
    np.testing.assert_allclose(binomial.increments()[:, 0, 0], [1.0, -0.5])


def test_terminal_values_maps_leaves(binomial):
    per_node = np.array([10.0, 11.0, 12.0])
    np.testing.assert_allclose(binomial.terminal_values(per_node), [11.0, 12.0])


def test_iid_product_layout():
    tree = iid_product_tree([1.0], [[2.0], [0.5]], [0.75, 0.25], periods=2)
    assert tree.n_paths == 4
    assert tree.horizon == 2
    np.testing.assert_allclose(tree.path_probs, [0.5625, 0.1875, 0.1875, 0.0625])
    term = tree.prices[tree.node_at[:, -1], 0]
    np.testing.assert_allclose(term, [4.0, 1.0, 1.0, 0.25])
    assert tree.increments().shape == (4, 2, 1)


def test_iid_product_path_cap():
    with pytest.raises(InputError, match="cap"):
        iid_product_tree([1.0], [[2.0], [0.5]], [0.5, 0.5], periods=20, max_paths=100)


def test_one_period_probs_mismatch():
    with pytest.raises(InputError):
        one_period_tree([1.0], [[2.0], [0.5]], [1.0])


def test_tree_validation():
    with pytest.raises(InputError, match="sum to 1"):
        EventTree(
            np.array([[1.0], [2.0], [0.5]]),
            np.array([-1, 0, 0]),
            np.array([1.0, 0.6, 0.6]),
            np.array([0, 1, 1]),
        )
    with pytest.raises(InputError, match="strictly positive"):
        EventTree(
            np.array([[1.0], [2.0], [0.5]]),
            np.array([-1, 0, 0]),
            np.array([1.0, 1.0, 0.0]),
            np.array([0, 1, 1]),
        )
    # a leaf at time 1 next to depth-2 paths
    with pytest.raises(InputError, match="uniform depth"):
        EventTree(
            np.array([[1.0], [2.0], [0.5], [4.0]]),
            np.array([-1, 0, 0, 1]),
            np.array([1.0, 0.5, 0.5, 1.0]),
            np.array([0, 1, 1, 2]),
        )


def test_random_one_period_is_deterministic():
    t1 = random_one_period(np.random.default_rng(42))
    t2 = random_one_period(np.random.default_rng(42))
    np.testing.assert_array_equal(t1.prices, t2.prices)
    np.testing.assert_array_equal(t1.cond_prob, t2.cond_prob)
    assert not martingale_polytope(t1).is_empty


# --- gains and loss bounds --------------------------------------------------

def test_running_gains_one_period(binomial):
    g = running_gains(binomial, np.array([[2.0]]))
    np.testing.assert_allclose(g[:, 0], 0.0)
    np.testing.assert_allclose(g[:, 1], [2.0, -1.0])
    np.testing.assert_allclose(terminal_gains(binomial, [[2.0]]), [2.0, -1.0])


def test_running_gains_two_periods():
    tree = iid_product_tree([1.0], [[2.0], [0.5]], [0.75, 0.25], periods=2)
    H = np.ones((len(tree.nonterminal), 1))
    g = running_gains(tree, H)
    # unit position: cumulative gain is S_t - S_0 path by path
    s_path = tree.prices[tree.node_at, 0]
    np.testing.assert_allclose(g, s_path - 1.0)


def test_loss_bound_kinds(binomial):
    np.testing.assert_allclose(loss_bound(binomial, "constant", 2.0), [2.0, 2.0])
    np.testing.assert_allclose(
        loss_bound(binomial, "one_plus_excursion"), [2.0, 1.5]
    )
    np.testing.assert_allclose(
        loss_bound(binomial, "per_path", values=[1.0, 3.0]), [1.0, 3.0]
    )
    with pytest.raises(InputError):
        loss_bound(binomial, "constant", 0.5)
    with pytest.raises(InputError):
        loss_bound(binomial, "per_path", values=[1.0])
    with pytest.raises(InputError):
        loss_bound(binomial, "martingale")


def test_admissible_scale(binomial):
    c = admissible_scale(binomial, [[1.0]], np.ones(2))
    assert c == pytest.approx(0.5)   # worst loss of the unit position
    assert admissible_scale(binomial, [[0.0]], np.ones(2)) == 0.0


def test_suitability_witness(binomial):
    np.testing.assert_allclose(suitability_witness(binomial, np.ones(2)), [1.0])
    W = loss_bound(binomial, "one_plus_excursion")
    np.testing.assert_allclose(suitability_witness(binomial, W), [2.0])


def test_unbounded_witness_rules():
    assert unbounded_one_period_witness("one_plus_abs_s1") == 1.0
    assert unbounded_one_period_witness("constant") is None
    with pytest.raises(InputError):
        unbounded_one_period_witness("two_sided")


# --- martingale polytope ----------------------------------------------------

def test_binomial_polytope_is_a_point(binomial):
    poly = martingale_polytope(binomial)
    assert not poly.is_empty
    assert poly.affine_dim == 0
    assert poly.support.all()
    np.testing.assert_allclose(poly.vertices, [[1.0 / 3.0, 2.0 / 3.0]], atol=1e-9)


def test_trinomial_polytope_segment(trinomial):
    poly = martingale_polytope(trinomial)
    assert poly.affine_dim == 1
    verts = sorted(poly.vertices.tolist())
    np.testing.assert_allclose(verts[0], [0.0, 1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(verts[1], [1.0 / 3.0, 0.0, 2.0 / 3.0], atol=1e-9)
    # every vertex prices the asset back to s0
    dS = trinomial.increments()[:, 0, 0]
    for v in poly.vertices:
        assert float(v @ dS) == pytest.approx(0.0, abs=1e-12)


def test_polytope_detects_dead_path():
    # middle state has the same price as the root twice over: 2 q1 + q2 + q3 = 1
    # and q1 + q2 + q3 = 1 force q1 = 0, leaving a segment on the other two
    tree = trinomial_tree(factors=(2.0, 1.0, 1.0))
    poly = martingale_polytope(tree)
    assert not poly.is_empty
    np.testing.assert_array_equal(poly.support, [False, True, True])
    assert poly.affine_dim == 1


def test_product_tree_polytope_is_complete():
    tree = iid_product_tree([1.0], [[2.0], [0.5]], [0.75, 0.25], periods=2)
    poly = martingale_polytope(tree)
    assert poly.affine_dim == 0
    np.testing.assert_allclose(
        poly.vertices, [[1.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 4.0 / 9.0]], atol=1e-9
    )


def test_max_linear_on_trinomial(trinomial):
    poly = martingale_polytope(trinomial)
    best, q = poly.max_linear(np.array([0.0, 1.0, 0.0]))
    assert best == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(q, [0.0, 1.0, 0.0], atol=1e-8)
    # constants are priced exactly
    best, _ = poly.max_linear(np.full(3, 0.37))
    assert best == pytest.approx(0.37, abs=1e-12)


def test_vertices_cached(trinomial):
    poly = martingale_polytope(trinomial)
    first = poly.vertices
    assert poly.vertices is first


def test_empty_polytope_and_certificate():
    tree = one_period_tree([1.0], [[1.5], [2.0]], [0.5, 0.5])
    poly = martingale_polytope(tree)
    assert poly.is_empty
    h = arbitrage_certificate(tree)
    assert h is not None
    gains = terminal_gains(tree, h)
    assert np.all(gains >= -1e-12)
    assert float(tree.path_probs @ gains) > 1e-9


def test_no_certificate_without_arbitrage(binomial):
    assert arbitrage_certificate(binomial) is None


def test_supermartingale_check(binomial):
    q = np.array([1.0 / 3.0, 2.0 / 3.0])
    ok, worst = supermartingale_check(binomial, q, [[1.0]])
    assert ok and abs(worst) <= 1e-12
    ok, worst = supermartingale_check(binomial, binomial.path_probs, [[1.0]])
    assert not ok
    assert worst == pytest.approx(0.625)   # drift of the unit position under P


def test_capped_sups_converge(binomial):
    study = equality_of_sups_check(
        binomial, ExponentialUtility(1.0), 0.0, caps=[0.5, 1.0, 2.0, 4.0, 8.0]
    )
    assert study.monotone
    assert study.converged
    assert study.values[-1] <= study.uncapped + 1e-9
