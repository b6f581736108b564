"""Orlicz-space machinery on finite probability spaces.

The gauge (Luxemburg) norm of f under a Young function Psi is

    N_Psi(f) = inf { c > 0 : E[Psi(f / c)] <= 1 },

computed by safeguarded bisection on the decreasing map c -> E[Psi(f/c)].
The norm on the conjugate side uses the scaling representation

    ||g||' = inf_{k > 0} (1 + E[hat_phi(k g)]) / k,

which agrees with the direct supremum sup { E[|f g|] : E[hat_u(f)] <= 1 }.
Tests check that agreement against an independently coded maximizer.

A loss-control weight W is classified against a utility by whether the
blow-up moments E[u(-alpha W)] stay finite: for every alpha (compatible),
for some but not all alpha (weakly compatible, with a critical scale), or
for no alpha > 0 (incompatible).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InputError
from .roots import golden_min, monotone_root
from .utility import UtilityFunction

__all__ = [
    "FiniteRV",
    "TailFamily",
    "YoungFunction",
    "young_loss",
    "young_conjugate",
    "luxemburg_norm",
    "orlicz_dual_norm",
    "norm_equivalence_bounds",
    "classify_loss_bound",
    "NormEquivalence",
    "LossBoundClassification",
]


@dataclass(frozen=True)
class FiniteRV:
    """Random variable on a finite probability space.

    probs must be strictly positive and sum to 1 within 1e-12; zero-mass
    atoms are rejected rather than silently dropped so that densities q/p
    stay well-defined everywhere.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or p.shape != v.shape or v.size == 0:
            raise InputError("FiniteRV needs matching non-empty 1-d values/probs")
        if np.any(p <= 0.0):
            raise InputError("FiniteRV probabilities must be strictly positive")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise InputError("FiniteRV probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    def expect(self, values=None) -> float:
        """E[values] with explicit infinity handling (no 0 * inf: probs > 0)."""
        arr = self.values if values is None else np.asarray(values, dtype=float)
        if np.any(np.isposinf(arr)):
            return np.inf
        if np.any(np.isneginf(arr)):
            return -np.inf
        return float(self.probs @ arr)

    def expect_fn(self, fn: Callable) -> float:
        return self.expect(np.asarray(fn(self.values), dtype=float))

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class TailFamily:
    """Symmetric density family on the real line for loss-bound scenarios.

    kind is one of ``gaussian`` (standard normal), ``two_sided_exponential``
    (rate parameter), ``cauchy`` (standard).
    """

    kind: str
    rate: float = 1.0

    _KINDS = ("gaussian", "two_sided_exponential", "cauchy")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise InputError(
                f"unknown tail family {self.kind!r}; expected one of {self._KINDS}"
            )
        if self.kind == "two_sided_exponential" and not self.rate > 0.0:
            raise InputError("two_sided_exponential needs rate > 0")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        if self.kind == "two_sided_exponential":
            lam = self.rate
            return 0.5 * lam * np.exp(-lam * np.abs(x))
        return 1.0 / (np.pi * (1.0 + x * x))


@dataclass(frozen=True)
class YoungFunction:
    """Even convex function with Psi(0) = 0, possibly +inf beyond a radius."""

    fn: Callable
    finite_radius: float = np.inf
    name: str = "young"

    def __call__(self, x):
        return self.fn(x)


def young_loss(U: UtilityFunction) -> YoungFunction:
    """hat_u of the utility as a Young function (jump radius -endpoint)."""
    return YoungFunction(U.hat_u, U.hat_u_radius, f"hat_u[{U.family}]")


def young_conjugate(U: UtilityFunction) -> YoungFunction:
    """hat_phi of the utility as a Young function.

    Finite everywhere for strictly concave families (hat_phi(y) <= -a y when
    a is finite); the linear family jumps to +inf beyond beta = 1.
    """
    radius = U.beta if U.family == "linear" else np.inf
    return YoungFunction(U.hat_phi, radius, f"hat_phi[{U.family}]")


def _mean_young(psi: YoungFunction, f: FiniteRV, c: float) -> float:
    # containment check first so no infinite values enter the dot product
    if f.sup_norm / c > psi.finite_radius:
        return np.inf
    return f.expect(np.asarray(psi(f.values / c), dtype=float))


def luxemburg_norm(psi: YoungFunction, f: FiniteRV, *, tol: float = 1e-10) -> float:
    """Gauge norm inf{c : E[Psi(f/c)] <= 1} by bisection plus secant polish.

    Parameters
    ----------
    psi : YoungFunction
        Young function handle; its ``finite_radius`` guards the containment
        bound ``||f||_inf / c <= radius`` before any expectation is taken.
    f : FiniteRV
    tol : float
        Absolute tolerance on the bisection bracket.

    Returns
    -------
    float
        The norm; 0 exactly when f vanishes.
    """
    fmax = f.sup_norm
    if fmax == 0.0:
        return 0.0
    hi = max(fmax, 1e-12)
    for _ in range(200):
        if _mean_young(psi, f, hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise InputError("luxemburg_norm: no feasible scale found")
    lo = hi
    for _ in range(2000):
        cand = lo / 2.0
        if _mean_young(psi, f, cand) > 1.0:
            break
        lo = cand
        if lo < 1e-280:
            return 0.0
    lo = lo / 2.0
    # bisection: E[Psi(f/c)] - 1 crosses zero downward in c
    for _ in range(200):
        if hi - lo <= tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if _mean_young(psi, f, mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    c = hi
    val = _mean_young(psi, f, c)
    if np.isfinite(val) and val < 1.0 - 1e-9:
        # the infimum is pinned by the jump of Psi, not by E = 1
        return fmax / psi.finite_radius
    # secant polish on E[Psi(f/c)] = 1 in the continuous regime
    c0, v0 = hi * (1.0 + 1e-7), _mean_young(psi, f, hi * (1.0 + 1e-7))
    c1, v1 = c, val
    for _ in range(60):
        if not (np.isfinite(v0) and np.isfinite(v1)) or v1 == v0:
            break
        c2 = c1 - (v1 - 1.0) * (c1 - c0) / (v1 - v0)
        if not np.isfinite(c2) or c2 <= 0.0:
            break
        v2 = _mean_young(psi, f, c2)
        c0, v0, c1, v1 = c1, v1, c2, v2
        if abs(v1 - 1.0) < 1e-14:
            break
    if np.isfinite(v1) and abs(v1 - 1.0) <= 1e-9:
        c = c1
    return float(c)


def orlicz_dual_norm(U: UtilityFunction, g: FiniteRV, *, tol: float = 1e-12) -> float:
    """Norm of g in the conjugate Orlicz space via the scaling infimum.

    Minimizes A(k) = (1 + E[hat_phi(k g)]) / k over k > 0; A is unimodal, so
    a geometric scan brackets the minimum and golden section refines it.
    When hat_phi jumps (linear family) the minimum can sit at the last
    finite scale k = radius / ||g||_inf, recovering the sup-norm.
    """
    gmax = g.sup_norm
    if gmax == 0.0:
        return 0.0
    psi = young_conjugate(U)

    def amemiya(k: float) -> float:
        m = _mean_young(psi, g, 1.0 / k)  # E[hat_phi(k g)] via scale 1/k
        return (1.0 + m) / k

    k_cap = psi.finite_radius / gmax if np.isfinite(psi.finite_radius) else np.inf
    k_hi = min(k_cap, 1e12)
    ks = np.geomspace(1e-8, k_hi, 240)
    vals = np.array([amemiya(k) for k in ks])
    i = int(np.argmin(vals))
    if i == len(ks) - 1 and np.isfinite(k_cap):
        # jump-limited: check a tight bracket against the boundary value
        lo = ks[max(i - 1, 0)]
        kb = golden_min(lambda k: amemiya(k), lo, k_hi, tol=tol)
        return float(min(amemiya(kb), amemiya(k_hi)))
    lo = ks[max(i - 1, 0)]
    hi = ks[min(i + 1, len(ks) - 1)]
    kb = golden_min(amemiya, lo, hi, tol=tol)
    return float(amemiya(kb))


def dual_norm_direct_sup(
    U: UtilityFunction,
    g: FiniteRV,
    *,
    starts: int = 8,
    seed: int = 0,
) -> float:
    """Brute-force dual norm: sup E[f g] over the ball {E[hat_u(|f|)] <= 1}.

    Independent cross-check of the scaling-infimum form; runs a constrained
    maximizer from several random starts, so it is only meant for small
    spaces (at most 8 atoms).
    """
    from scipy.optimize import minimize

    gv = np.abs(np.asarray(g.values, dtype=float))
    p = np.asarray(g.probs, dtype=float)
    if gv.size > 8:
        raise InputError("direct-sup oracle is capped at 8 atoms")
    if float(gv.max()) == 0.0:
        return 0.0
    uh = young_loss(U)
    cap = uh.finite_radius * (1.0 - 1e-10) if np.isfinite(uh.finite_radius) else None
    bounds = [(0.0, cap)] * gv.size

    def neg_obj(t):
        return -float(p @ (t * gv))

    def ball(t):
        return 1.0 - float(p @ np.asarray(uh(t), dtype=float))

    best = 0.0
    rng = np.random.default_rng(seed)
    for _ in range(starts):
        t0 = rng.uniform(0.0, 1.0, size=gv.size)
        if cap is not None:
            t0 = np.minimum(t0, cap * 0.5)
        res = minimize(
            neg_obj,
            t0,
            method="SLSQP",
            bounds=bounds,
            constraints=[{"type": "ineq", "fun": ball}],
            options={"maxiter": 1000, "ftol": 1e-14},
        )
        if res.success and ball(res.x) >= -1e-9:
            best = max(best, -float(res.fun))
    return best


@dataclass
class NormEquivalence:
    """Two-sided comparison of the gauge norm with the sup norm."""

    gauge: float
    sup_norm: float
    k: float                # best constant with k * gauge <= sup-norm
    lower: float            # k * gauge
    upper: float            # (-a) * gauge
    lower_ok: bool
    upper_ok: bool


def norm_equivalence_bounds(
    U: UtilityFunction, f: FiniteRV, *, tol: float = 1e-8
) -> NormEquivalence:
    """Check k * N(f) <= ||f||_inf <= (-a) * N(f) for finite-endpoint utilities.

    N is the gauge norm under hat_u and k is the unique positive solution of
    hat_u(k) = min(hat_u(-a), 1).  Requires a finite endpoint; the bounds
    say the gauge space collapses to L^inf in that regime.
    """
    a = U.endpoint
    if not np.isfinite(a):
        raise InputError("norm equivalence bounds need a finite utility endpoint")
    radius = -a
    target = min(float(U.hat_u(radius)), 1.0)
    k = monotone_root(
        lambda t: float(U.hat_u(t)) - target,
        1e-12,
        radius * (1.0 - 1e-13),
        tol_x=1e-15,
        tol_f=1e-14,
    )
    gauge = luxemburg_norm(young_loss(U), f)
    sup = f.sup_norm
    lower = k * gauge
    upper = radius * gauge
    return NormEquivalence(
        gauge,
        sup,
        float(k),
        lower,
        upper,
        bool(lower <= sup + tol),
        bool(sup <= upper + tol),
    )


# ---------------------------------------------------------------------------
# loss-bound classification
# ---------------------------------------------------------------------------


@dataclass
class LossBoundClassification:
    verdict: str                     # compatible | weakly_compatible | incompatible
    critical_scale: float | None    # finite boundary of alpha when weakly compatible
    numeric_verdicts: dict = field(default_factory=dict)
    consistent: bool = True
    note: str = ""


def _moment_diverges(density_fn, rate_like: float, alpha: float) -> bool:
    """Numeric divergence probe for 2 * int_0^inf e^{alpha(1+x)} dens(x) dx.

    Integrates over doubling shells [R, 2R]; declares divergence when the
    running total passes 1e12 with increments growing over three successive
    doublings, convergence when increments fall below relative 1e-12.
    """
    total = 0.0
    increments = []
    lo = 0.0
    hi = 1.0
    for _ in range(64):
        part, _err = integrate.quad(
            lambda x: 2.0 * np.exp(min(alpha * (1.0 + x), 700.0)) * density_fn(x),
            lo,
            hi,
            limit=200,
        )
        total += part
        increments.append(part)
        if total > 1e12 and len(increments) >= 3:
            a, b, c = increments[-3:]
            if 0.0 < a < b < c:
                return True
        if part < 1e-12 * max(total, 1.0):
            return False
        lo, hi = hi, hi * 2.0
    return total > 1e12


def classify_loss_bound(U: UtilityFunction, W) -> LossBoundClassification:
    """Classify a loss-control weight against the utility's loss tail.

    Parameters
    ----------
    U : UtilityFunction
    W : FiniteRV or TailFamily
        A finite weight, or a density family standing for W = 1 + |S1| in
        the one-period unbounded model.

    Returns
    -------
    LossBoundClassification
        ``compatible`` when E[u(-alpha W)] is finite for every alpha > 0,
        ``weakly_compatible`` when finite only below a critical scale
        (reported), ``incompatible`` when no positive alpha works.  For
        density families with exponential utility the verdict is analytic
        and cross-checked by numeric divergence probes.
    """
    if isinstance(W, FiniteRV):
        wmax = float(np.max(np.abs(W.values)))
        if wmax == 0.0:
            return LossBoundClassification("compatible", None, note="W = 0")
        if not np.isfinite(U.endpoint):
            # hat_u finite on all of R: every bounded W has all moments
            return LossBoundClassification(
                "compatible", None, note="finite space, full-line utility domain"
            )
        return LossBoundClassification(
            "weakly_compatible",
            -U.endpoint / wmax,
            note="finite endpoint: E[u(-alpha W)] finite exactly while "
            "alpha * ||W||_inf stays below -a",
        )

    if not isinstance(W, TailFamily):
        raise InputError("W must be a FiniteRV or a TailFamily")

    if np.isfinite(U.endpoint):
        return LossBoundClassification(
            "incompatible",
            None,
            note="finite endpoint utility admits no unbounded loss weight",
        )
    if U.family == "linear":
        verdict = "incompatible" if W.kind == "cauchy" else "compatible"
        return LossBoundClassification(
            verdict, None, note="linear utility: classification by first moment"
        )
    if U.family != "exponential":
        raise InputError(
            f"no analytic classification for utility family {U.family!r} "
            "against density tails"
        )

    gamma = U.gamma
    if W.kind == "gaussian":
        verdict, critical = "compatible", None
        probes = {0.5: False, 2.0: False}          # alpha -> expect divergence?
    elif W.kind == "two_sided_exponential":
        verdict, critical = "weakly_compatible", W.rate / gamma
        probes = {0.5 * critical: False, 1.5 * critical: True}
    else:  # cauchy
        verdict, critical = "incompatible", None
        probes = {0.25: True, 1.0: True}

    numeric = {}
    consistent = True
    for alpha, want_divergent in probes.items():
        got = _moment_diverges(W.density, W.rate, gamma * alpha)
        numeric[alpha] = "diverged" if got else "converged"
        consistent &= got == want_divergent
    return LossBoundClassification(verdict, critical, numeric, consistent)
