"""Concave utility families and their convex conjugates.

Each utility u is increasing and concave on an interior domain (a, +inf),
with u = -inf to the left of the finite endpoint a (when a is finite).
The convex conjugate is

    phi(y) = sup_x { u(x) - x y },    y > 0,

with phi(0+) = sup u = u(+inf) and phi(y) = +inf for y < 0.  Derivative
identities used throughout the solvers:

    phi'(y)  = -(u')^{-1}(y),   phi'(0+) = -inf,   phi'(+inf) = -a,
    beta     = u'(0),           phi(beta) = u(0).

The Young-function companions used by the Orlicz machinery are

    hat_u(x)   = u(0) - u(-|x|)            (even, convex, hat_u(0) = 0),
    hat_phi(y) = 0 for |y| <= beta, else phi(|y|) - u(0).

Extended-real convention: plain floats with IEEE +/-inf carry the symbolic
infinities.  Probabilities in this library are strictly positive, so the
0 * inf ambiguity never arises in expectations; helpers that mix infinite
values with weights check for infinities explicitly first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, NotDifferentiableError
from .roots import expand_bracket, golden_min, monotone_root

__all__ = [
    "UtilityFunction",
    "ExponentialUtility",
    "ShiftedLogUtility",
    "ShiftedPowerUtility",
    "LinearUtility",
    "CustomUtility",
    "utility_from_params",
    "check_inada",
    "growth_scan",
    "InadaReport",
    "GrowthScanReport",
]


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


class UtilityFunction:
    """Base interface shared by all utility families.

    Attributes
    ----------
    family : str
        Family tag used by scenario files.
    endpoint : float
        Left domain endpoint a (``-inf`` when the domain is all of R).
    strictly_concave : bool
        Whether u'' < 0 on the interior; solvers that rely on unique dual
        minimizers refuse families with flat segments.
    """

    family: str = "abstract"
    endpoint: float = -np.inf
    strictly_concave: bool = True

    # --- primal side -----------------------------------------------------
    def u(self, x):
        raise NotImplementedError

    def u_prime(self, x):
        raise NotImplementedError

    def u_double_prime(self, x):
        raise NotImplementedError

    @property
    def u_at_inf(self) -> float:
        """sup u = lim_{x -> inf} u(x)."""
        raise NotImplementedError

    @property
    def u_at_zero(self) -> float:
        return float(self.u(0.0))

    @property
    def beta(self) -> float:
        """Left derivative of u at 0; threshold below which hat_phi vanishes."""
        return float(self.u_prime(0.0))

    # --- conjugate side --------------------------------------------------
    def phi(self, y):
        raise NotImplementedError

    def phi_prime(self, y):
        raise NotImplementedError

    def phi_double_prime(self, y):
        raise NotImplementedError

    # --- Young companions ------------------------------------------------
    def hat_u(self, x):
        """hat_u(x) = u(0) - u(-|x|), the Young function of the loss tail."""
        x, scalar = _as_array(x)
        out = self.u_at_zero - np.asarray(self.u(-np.abs(x)), dtype=float)
        return _ret(out, scalar)

    def hat_phi(self, y):
        """Conjugate Young function: 0 on [-beta, beta], phi(|y|) - u(0) outside."""
        y, scalar = _as_array(y)
        ay = np.abs(y)
        out = np.zeros_like(ay)
        mask = ay > self.beta
        if np.any(mask):
            out[mask] = np.asarray(self.phi(ay[mask]), dtype=float) - self.u_at_zero
        return _ret(out, scalar)

    @property
    def hat_u_radius(self) -> float:
        """Radius beyond which hat_u is infinite: -endpoint (inf if a = -inf)."""
        return -self.endpoint

    def __repr__(self):
        return f"{type(self).__name__}()"


@dataclass(frozen=True, repr=False)
class ExponentialUtility(UtilityFunction):
    """u(x) = -exp(-gamma x) on all of R.

    Conjugate: phi(y) = (y/gamma) (log(y/gamma) - 1), phi(0) = 0 = sup u.
    """

    gamma: float = 1.0
    family: str = field(default="exponential", init=False)
    endpoint: float = field(default=-np.inf, init=False)
    strictly_concave: bool = field(default=True, init=False)

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise InputError("exponential utility needs gamma > 0")

    def u(self, x):
        x, scalar = _as_array(x)
        with np.errstate(over="ignore"):
            out = -np.exp(-self.gamma * x)
        return _ret(out, scalar)

    def u_prime(self, x):
        x, scalar = _as_array(x)
        with np.errstate(over="ignore"):
            out = self.gamma * np.exp(-self.gamma * x)
        return _ret(out, scalar)

    def u_double_prime(self, x):
        x, scalar = _as_array(x)
        with np.errstate(over="ignore"):
            out = -self.gamma**2 * np.exp(-self.gamma * x)
        return _ret(out, scalar)

    @property
    def u_at_inf(self) -> float:
        return 0.0

    @property
    def beta(self) -> float:
        return self.gamma

    def phi(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, np.inf)
        pos = y > 0.0
        z = y[pos] / self.gamma
        out[pos] = z * (np.log(z) - 1.0)
        out[y == 0.0] = 0.0
        return _ret(out, scalar)

    def phi_prime(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, -np.inf)
        pos = y > 0.0
        out[pos] = np.log(y[pos] / self.gamma) / self.gamma
        return _ret(out, scalar)

    def phi_double_prime(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, np.inf)
        pos = y > 0.0
        out[pos] = 1.0 / (self.gamma * y[pos])
        return _ret(out, scalar)


@dataclass(frozen=True, repr=False)
class ShiftedLogUtility(UtilityFunction):
    """u(x) = log(x - a) on (a, +inf) with finite endpoint a < 0.

    Conjugate: phi(y) = -log y - a y - 1; phi'(+inf) = -a.
    """

    endpoint: float = -2.0
    family: str = field(default="log_shifted", init=False)
    strictly_concave: bool = field(default=True, init=False)

    def __post_init__(self):
        if not (np.isfinite(self.endpoint) and self.endpoint < 0.0):
            raise InputError("log_shifted utility needs a finite endpoint a < 0")

    def u(self, x):
        x, scalar = _as_array(x)
        out = np.full_like(x, -np.inf)
        inside = x > self.endpoint
        out[inside] = np.log(x[inside] - self.endpoint)
        return _ret(out, scalar)

    def u_prime(self, x):
        x, scalar = _as_array(x)
        out = np.full_like(x, np.inf)
        inside = x > self.endpoint
        out[inside] = 1.0 / (x[inside] - self.endpoint)
        return _ret(out, scalar)

    def u_double_prime(self, x):
        x, scalar = _as_array(x)
        out = np.full_like(x, -np.inf)
        inside = x > self.endpoint
        out[inside] = -1.0 / (x[inside] - self.endpoint) ** 2
        return _ret(out, scalar)

    @property
    def u_at_inf(self) -> float:
        return np.inf

    @property
    def beta(self) -> float:
        return -1.0 / self.endpoint

    def phi(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, np.inf)
        pos = y > 0.0
        out[pos] = -np.log(y[pos]) - self.endpoint * y[pos] - 1.0
        return _ret(out, scalar)

    def phi_prime(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, -np.inf)
        pos = y > 0.0
        out[pos] = -1.0 / y[pos] - self.endpoint
        return _ret(out, scalar)

    def phi_double_prime(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, np.inf)
        pos = y > 0.0
        out[pos] = 1.0 / y[pos] ** 2
        return _ret(out, scalar)


@dataclass(frozen=True, repr=False)
class ShiftedPowerUtility(UtilityFunction):
    """u(x) = (x - a)^p on [a, +inf), finite endpoint a < 0, exponent p in (0, 1).

    Conjugate: phi(y) = (1 - p) p^{p/(1-p)} y^{-p/(1-p)} - a y.
    """

    endpoint: float = -4.0
    exponent: float = 0.5
    family: str = field(default="power_shifted", init=False)
    strictly_concave: bool = field(default=True, init=False)

    def __post_init__(self):
        if not (np.isfinite(self.endpoint) and self.endpoint < 0.0):
            raise InputError("power_shifted utility needs a finite endpoint a < 0")
        if not 0.0 < self.exponent < 1.0:
            raise InputError("power_shifted utility needs exponent in (0, 1)")

    def u(self, x):
        x, scalar = _as_array(x)
        out = np.full_like(x, -np.inf)
        inside = x >= self.endpoint
        out[inside] = (x[inside] - self.endpoint) ** self.exponent
        return _ret(out, scalar)

    def u_prime(self, x):
        x, scalar = _as_array(x)
        out = np.full_like(x, np.inf)
        inside = x > self.endpoint
        p = self.exponent
        out[inside] = p * (x[inside] - self.endpoint) ** (p - 1.0)
        return _ret(out, scalar)

    def u_double_prime(self, x):
        x, scalar = _as_array(x)
        out = np.full_like(x, -np.inf)
        inside = x > self.endpoint
        p = self.exponent
        out[inside] = p * (p - 1.0) * (x[inside] - self.endpoint) ** (p - 2.0)
        return _ret(out, scalar)

    @property
    def u_at_inf(self) -> float:
        return np.inf

    @property
    def beta(self) -> float:
        p = self.exponent
        return p * (-self.endpoint) ** (p - 1.0)

    def phi(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, np.inf)
        pos = y > 0.0
        p = self.exponent
        coef = (1.0 - p) * p ** (p / (1.0 - p))
        out[pos] = coef * y[pos] ** (-p / (1.0 - p)) - self.endpoint * y[pos]
        return _ret(out, scalar)

    def phi_prime(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, -np.inf)
        pos = y > 0.0
        p = self.exponent
        out[pos] = -((p / y[pos]) ** (1.0 / (1.0 - p))) - self.endpoint
        return _ret(out, scalar)

    def phi_double_prime(self, y):
        y, scalar = _as_array(y)
        out = np.full_like(y, np.inf)
        pos = y > 0.0
        p = self.exponent
        out[pos] = (p ** (1.0 / (1.0 - p)) / (1.0 - p)) * y[pos] ** (
            -1.0 / (1.0 - p) - 1.0
        )
        return _ret(out, scalar)


@dataclass(frozen=True, repr=False)
class LinearUtility(UtilityFunction):
    """u(x) = x.  Concave but not strictly; the conjugate is the indicator
    of {1}, so phi' does not exist and dual solvers refuse this family."""

    family: str = field(default="linear", init=False)
    endpoint: float = field(default=-np.inf, init=False)
    strictly_concave: bool = field(default=False, init=False)

    def u(self, x):
        x, scalar = _as_array(x)
        return _ret(x + 0.0, scalar)

    def u_prime(self, x):
        x, scalar = _as_array(x)
        return _ret(np.ones_like(x), scalar)

    def u_double_prime(self, x):
        x, scalar = _as_array(x)
        return _ret(np.zeros_like(x), scalar)

    @property
    def u_at_inf(self) -> float:
        return np.inf

    @property
    def beta(self) -> float:
        return 1.0

    def phi(self, y):
        y, scalar = _as_array(y)
        out = np.where(y == 1.0, 0.0, np.inf)
        return _ret(out, scalar)

    def phi_prime(self, y):
        raise NotDifferentiableError(
            "the conjugate of the linear family is an indicator; phi' is undefined"
        )

    def phi_double_prime(self, y):
        raise NotDifferentiableError(
            "the conjugate of the linear family is an indicator; phi'' is undefined"
        )


class CustomUtility(UtilityFunction):
    """Utility given by a user evaluator; conjugate computed numerically.

    ``phi(y)`` maximizes ``u(x) - x y`` by golden section on a bracket
    ``[a + eps, x_hi]`` whose right edge grows geometrically until
    ``u'(x_hi) < y``, followed by a Newton polish on the stationarity
    condition ``u'(x) = y`` (tolerance 1e-10).
    """

    family = "custom"

    def __init__(
        self,
        fn: Callable[[float], float],
        endpoint: float = -np.inf,
        derivative: Callable[[float], float] | None = None,
        strictly_concave: bool = True,
        sup_value: float | None = None,
    ):
        self._fn = fn
        self._dfn = derivative
        self.endpoint = float(endpoint)
        self.strictly_concave = bool(strictly_concave)
        self._sup = sup_value

    def u(self, x):
        x, scalar = _as_array(x)
        flat = np.atleast_1d(x)
        out = np.empty_like(flat)
        for i, xi in enumerate(flat):
            out[i] = self._fn(float(xi)) if xi > self.endpoint else -np.inf
        out = out.reshape(x.shape)
        return _ret(out, scalar)

    def u_prime(self, x):
        x, scalar = _as_array(x)
        flat = np.atleast_1d(x)
        out = np.empty_like(flat)
        for i, xi in enumerate(flat):
            xi = float(xi)
            if xi <= self.endpoint:
                out[i] = np.inf
            elif self._dfn is not None:
                out[i] = self._dfn(xi)
            else:
                h = 1e-6 * max(1.0, abs(xi))
                if np.isfinite(self.endpoint) and xi - 2 * h <= self.endpoint:
                    h = 0.25 * (xi - self.endpoint)
                out[i] = (self._fn(xi + h) - self._fn(xi - h)) / (2.0 * h)
        out = out.reshape(x.shape)
        return _ret(out, scalar)

    def u_double_prime(self, x):
        x, scalar = _as_array(x)
        flat = np.atleast_1d(x)
        out = np.empty_like(flat)
        for i, xi in enumerate(flat):
            xi = float(xi)
            h = 1e-5 * max(1.0, abs(xi))
            if np.isfinite(self.endpoint) and xi - h <= self.endpoint:
                h = 0.25 * (xi - self.endpoint)
            up = self.u_prime(xi + h)
            dn = self.u_prime(xi - h)
            out[i] = (up - dn) / (2.0 * h)
        return _ret(out.reshape(x.shape), scalar)

    @property
    def u_at_inf(self) -> float:
        if self._sup is not None:
            return self._sup
        return float(self._fn(1e9))

    @property
    def beta(self) -> float:
        # left derivative at 0, second-order one-sided difference
        if self._dfn is not None:
            return float(self._dfn(0.0))
        h = 1e-6
        if np.isfinite(self.endpoint):
            h = min(h, -self.endpoint / 8.0)
        f0 = self._fn(0.0)
        return float((3.0 * f0 - 4.0 * self._fn(-h) + self._fn(-2.0 * h)) / (2.0 * h))

    def _phi_scalar(self, y: float) -> float:
        if y < 0.0:
            return np.inf
        if y == 0.0:
            return self.u_at_inf
        a = self.endpoint
        lo = a + 1e-9 * max(1.0, abs(a)) if np.isfinite(a) else -1.0
        hi = max(lo + 1.0, 1.0)
        for _ in range(200):
            if self.u_prime(hi) < y:
                break
            hi = lo + 2.0 * (hi - lo) if np.isfinite(a) else hi * 2.0 + 1.0
        while np.isfinite(a) is False and self.u_prime(lo) <= y:
            lo = lo * 2.0 - 1.0
        xstar = golden_min(lambda x: -(self._fn(x) - x * y), lo, hi, tol=1e-12)
        # Newton polish on u'(x) = y
        for _ in range(50):
            g = self.u_prime(xstar) - y
            if abs(g) <= 1e-10 * max(1.0, y):
                break
            h = 1e-6 * max(1.0, abs(xstar))
            g2 = (self.u_prime(xstar + h) - self.u_prime(xstar - h)) / (2.0 * h)
            if not np.isfinite(g2) or g2 == 0.0:
                break
            step = -g / g2
            cand = xstar + step
            if not (lo < cand < hi * 2.0):
                break
            xstar = cand
        return float(self._fn(xstar) - xstar * y)

    def phi(self, y):
        y, scalar = _as_array(y)
        flat = np.atleast_1d(y)
        out = np.array([self._phi_scalar(float(v)) for v in flat])
        return _ret(out.reshape(y.shape), scalar)

    def phi_prime(self, y):
        # -(u')^{-1}(y) via the same maximizer
        y, scalar = _as_array(y)
        flat = np.atleast_1d(y)
        out = np.empty_like(flat)
        for i, v in enumerate(flat):
            v = float(v)
            if v <= 0.0:
                out[i] = -np.inf
                continue
            h = 1e-5 * max(1.0, v)
            out[i] = (self._phi_scalar(v + h) - self._phi_scalar(v - h)) / (2.0 * h)
        return _ret(out.reshape(y.shape), scalar)

    def phi_double_prime(self, y):
        y, scalar = _as_array(y)
        flat = np.atleast_1d(y)
        out = np.empty_like(flat)
        for i, v in enumerate(flat):
            v = float(v)
            h = 1e-4 * max(1.0, v)
            out[i] = (
                self._phi_scalar(v + h)
                - 2.0 * self._phi_scalar(v)
                + self._phi_scalar(v - h)
            ) / h**2
        return _ret(out.reshape(y.shape), scalar)


_FAMILIES = {
    "exponential": lambda p: ExponentialUtility(gamma=float(p.get("gamma", 1.0))),
    "log_shifted": lambda p: ShiftedLogUtility(endpoint=float(p.get("endpoint", -2.0))),
    "power_shifted": lambda p: ShiftedPowerUtility(
        endpoint=float(p.get("endpoint", -4.0)),
        exponent=float(p.get("exponent", 0.5)),
    ),
    "linear": lambda p: LinearUtility(),
}


def utility_from_params(family: str, **params) -> UtilityFunction:
    """Build a named utility family from scenario parameters."""
    try:
        ctor = _FAMILIES[family]
    except KeyError:
        raise InputError(
            f"unknown utility family {family!r}; expected one of {sorted(_FAMILIES)}"
        ) from None
    return ctor(params)


# ---------------------------------------------------------------------------
# analytic sanity scans
# ---------------------------------------------------------------------------


@dataclass
class InadaReport:
    """Marginal-utility limits sampled on geometric grids."""

    endpoint_samples: np.ndarray
    endpoint_values: np.ndarray
    infinity_samples: np.ndarray
    infinity_values: np.ndarray
    endpoint_ok: bool       # u' blows up toward the left endpoint
    infinity_ok: bool       # u' vanishes at +inf
    passed: bool


def check_inada(U: UtilityFunction, *, depth: int = 60) -> InadaReport:
    """Check u'(a+) = +inf and u'(+inf) = 0 on geometric sample grids.

    For finite a the grid is ``a + 2^{-k}``; for a = -inf it marches to
    ``-2^k``.  The report keeps the sampled values so failures are
    inspectable rather than a bare boolean.  depth 60 leaves room for
    families whose marginal utility diverges as slowly as 2^{k/2}.
    """
    a = U.endpoint
    if np.isfinite(a):
        xs_end = a + np.power(2.0, -np.arange(1, depth + 1, dtype=float))
    else:
        xs_end = -np.power(2.0, np.arange(0, depth, dtype=float))
    xs_inf = np.power(2.0, np.arange(0, depth, dtype=float))
    with np.errstate(over="ignore"):
        v_end = np.asarray(U.u_prime(xs_end), dtype=float)
        v_inf = np.asarray(U.u_prime(xs_inf), dtype=float)
    # cap overflow to +inf before differencing; inf - inf would poison the
    # monotonicity check with NaN
    cap_end = np.minimum(v_end, 1e300)
    cap_inf = np.minimum(v_inf, 1e300)
    end_ok = bool(v_end[-1] > 1e6 and np.all(np.diff(cap_end) >= 0.0))
    inf_ok = bool(v_inf[-1] < 1e-6 and np.all(np.diff(cap_inf) <= 0.0))
    return InadaReport(xs_end, v_end, xs_inf, v_inf, end_ok, inf_ok, end_ok and inf_ok)


@dataclass
class GrowthRow:
    multiplier: float
    sup_ratio: float
    tail_growth: float      # ratio at y_max over ratio at y_max/2
    bounded: bool


@dataclass
class GrowthScanReport:
    rows: list
    bounded: bool
    note: str = (
        "on a finite measure space every expectation below is a finite sum, "
        "so the moderate-growth condition holds automatically there"
    )


def growth_scan(
    U: UtilityFunction,
    multipliers=(2.0,),
    *,
    y_max: float = 1e6,
    n_grid: int = 400,
) -> GrowthScanReport:
    """Scan hat_phi(m y) / (1 + hat_phi(y)) on a geometric grid.

    A bounded supremum for every multiplier is the growth condition that
    makes the conjugate Orlicz space well-behaved on unbounded spaces.  The
    verdict is a heuristic: the scan is declared bounded when every ratio is
    finite and the ratio stops growing over the last octave of the grid.
    """
    beta = U.beta
    if not y_max > beta:
        raise InputError(f"y_max must exceed beta = {beta}")
    y0 = max(beta / 2.0, 1e-8)
    grid = np.geomspace(y0, y_max, n_grid)
    rows = []
    for m in multipliers:
        with np.errstate(over="ignore", invalid="ignore"):
            num = np.asarray(U.hat_phi(m * grid), dtype=float)
            den = 1.0 + np.asarray(U.hat_phi(grid), dtype=float)
            ratio = num / den
        if not np.all(np.isfinite(ratio)):
            rows.append(GrowthRow(m, np.inf, np.inf, False))
            continue
        sup = float(np.max(ratio))
        half_idx = int(np.searchsorted(grid, grid[-1] / 2.0))
        tail = float(ratio[-1] / max(ratio[half_idx], 1e-300))
        rows.append(GrowthRow(m, sup, tail, bool(tail <= 1.2)))
    return GrowthScanReport(rows, all(r.bounded for r in rows))
