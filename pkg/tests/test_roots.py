"""Scalar root finding and derivative-free search."""
import numpy as np
import pytest

from utilmax.roots import expand_bracket, golden_min, grid_refine_max, monotone_root


def test_monotone_root_cubic():
    root = monotone_root(lambda t: t**3 - 2.0, 0.0, 2.0)
    assert root == pytest.approx(2.0 ** (1.0 / 3.0), abs=1e-10)


def test_monotone_root_with_derivative():
    fn = lambda t: np.expm1(t) - 0.5
    root = monotone_root(fn, -1.0, 1.0, dfn=np.exp, tol_f=1e-15)
    assert abs(fn(root)) <= 1e-15


def test_monotone_root_endpoint_hits():
    assert monotone_root(lambda t: t, 0.0, 1.0) == 0.0
    assert monotone_root(lambda t: t - 1.0, 0.0, 1.0) == 1.0


def test_monotone_root_rejects_unbracketed():
    with pytest.raises(ValueError, match="not bracketed"):
        monotone_root(lambda t: t + 10.0, 0.0, 1.0)


def test_monotone_root_tiny_root_full_relative_precision():
    # width stop must be relative, or roots near 1e-14 lose all digits
    target = 3e-14
    root = monotone_root(lambda t: t - target, 1e-300, 1.0, tol_x=1e-15, tol_f=0.0)
    assert root == pytest.approx(target, rel=1e-10)


def test_monotone_root_one_sided_blowup():
    # log barrier at t=2: secant through the endpoints stalls against the
    # steep side unless a bisection safeguard kicks in
    fn = lambda t: -np.log1p(-0.5 * t) - 1.0
    root = monotone_root(fn, 1e-12, 2.0 * (1.0 - 1e-13), tol_x=1e-15, tol_f=1e-14)
    assert root == pytest.approx(2.0 - 2.0 / np.e, rel=1e-12)


def test_expand_bracket_grows_both_sides():
    fn = lambda t: np.log(t) - 3.0
    lo, hi = expand_bracket(fn, 1.0, 2.0)
    assert fn(lo) <= 0.0 <= fn(hi)
    lo, hi = expand_bracket(fn, 40.0, 80.0)
    assert fn(lo) <= 0.0 <= fn(hi)


def test_expand_bracket_failure_raises():
    with pytest.raises(ValueError, match="expansion failed"):
        expand_bracket(lambda t: 1.0, 1.0, 2.0)


def test_golden_min_quadratic():
    x = golden_min(lambda t: (t - 0.7) ** 2, -3.0, 4.0)
    assert x == pytest.approx(0.7, abs=1e-9)


def test_grid_refine_max_quadratic_bowl():
    center = np.array([1.5, -2.25])
    fn = lambda v: -float(np.sum((v - center) ** 2))
    x, best = grid_refine_max(fn, 2, radius=8.0)
    assert np.allclose(x, center, atol=1e-2)
    assert best == pytest.approx(0.0, abs=1e-4)


def test_grid_refine_max_respects_start():
    fn = lambda v: -float((v[0] - 100.0) ** 2)
    x, best = grid_refine_max(fn, 1, radius=4.0, center=np.array([99.0]))
    assert x[0] == pytest.approx(100.0, abs=1e-2)
