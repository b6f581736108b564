"""Shared scalar numerics: safeguarded root finding and derivative-free search.

Root finding uses bisection for global safety with Newton polish once the
bracket is tight; this keeps every caller at residuals near machine precision
without trusting Newton globally.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def expand_bracket(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    grow: float = 2.0,
    max_steps: int = 200,
) -> tuple[float, float]:
    """Grow ``[lo, hi]`` geometrically until ``fn`` changes sign.

    ``fn`` must be increasing. ``lo`` shrinks toward 0 and ``hi`` grows, both
    by factor ``grow``; raises ``ValueError`` if no sign change appears.
    """
    flo, fhi = fn(lo), fn(hi)
    steps = 0
    while flo > 0.0:
        hi, fhi = lo, flo
        lo /= grow
        flo = fn(lo)
        steps += 1
        if steps > max_steps:
            raise ValueError("bracket expansion failed on the low side")
    steps = 0
    while fhi < 0.0:
        lo, flo = hi, fhi
        hi *= grow
        fhi = fn(hi)
        steps += 1
        if steps > max_steps:
            raise ValueError("bracket expansion failed on the high side")
    return lo, hi


def monotone_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    dfn: Callable[[float], float] | None = None,
    tol_x: float = 1e-12,
    tol_f: float = 1e-13,
    max_iter: int = 200,
) -> float:
    """Root of an increasing function on a bracketing interval.

    Bisection halves the bracket; whenever a Newton step (if ``dfn`` given)
    or a secant step lands inside the current bracket it is used instead.

    Parameters
    ----------
    fn : callable
        Increasing scalar function with ``fn(lo) <= 0 <= fn(hi)``.
    lo, hi : float
        Initial bracket.
    dfn : callable, optional
        Derivative of ``fn`` for Newton polish.

    Returns
    -------
    float
        Point ``x`` with ``|fn(x)| <= tol_f`` or bracket width below ``tol_x``.
    """
    flo, fhi = fn(lo), fn(hi)
    if flo > 0.0 or fhi < 0.0:
        raise ValueError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    x, fx = lo, flo
    force_bisect = False
    for _ in range(max_iter):
        width = hi - lo
        mid = 0.5 * (lo + hi)
        cand = None
        if not force_bisect:
            if dfn is not None:
                d = dfn(x)
                if np.isfinite(d) and d > 0.0:
                    step = x - fx / d
                    if lo < step < hi:
                        cand = step
            if cand is None and fhi != flo:
                # secant through the bracket endpoints
                step = lo - flo * (hi - lo) / (fhi - flo)
                if lo < step < hi:
                    cand = step
        x = cand if cand is not None else mid
        fx = fn(x)
        if abs(fx) <= tol_f:
            return x
        if fx < 0.0:
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        # an interpolation step that barely moved one endpoint stalls regula
        # falsi on one-sided curvature; answer with a true bisection round
        force_bisect = cand is not None and (hi - lo) > 0.45 * width
        # relative width so roots of any magnitude resolve to full precision
        if hi - lo <= tol_x * max(abs(lo), abs(hi)) or hi - lo < 5e-324:
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def golden_min(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = 1e-12,
    max_iter: int = 300,
) -> float:
    """Golden-section minimizer for a unimodal function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def grid_refine_max(
    fn: Callable[[np.ndarray], float],
    dim: int,
    *,
    radius: float = 8.0,
    levels: int = 14,
    points: int = 11,
    center: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Nested grid-refinement maximizer, used as an independent oracle.

    Evaluates ``fn`` on a ``points**dim`` grid centered on the incumbent,
    shrinking the grid radius by half at each level. Deliberately free of
    gradients so it can validate gradient-based solvers.
    """
    x = np.zeros(dim) if center is None else np.asarray(center, dtype=float).copy()
    best = fn(x)
    r = radius
    for _ in range(levels):
        axes = [np.linspace(x[i] - r, x[i] + r, points) for i in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = np.array([fn(p) for p in pts])
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            x = pts[k].copy()
        r *= 0.5
    return x, best
