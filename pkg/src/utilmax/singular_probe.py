"""Semi-analytic scenario library for unbounded one-period markets.

Four bundled scenarios, addressed everywhere (CLI, service, tests) by the
opaque ids ex35..ex38:

* ex35 - compound Poisson terminal gain; jumps are double-exponential
  around 1, so the exponential-utility optimum has the closed form
  a* = sqrt(1 + nu^2) - 1.
* ex36 - S1 = Z*Y with Y standard exponential and Z in {1} u {1/n - 1}.
  The objective g(h) = E[-exp(-h S1)] is finite only on -1 < h <= 1; when
  g' stays positive the optimum sits on the boundary h = 1 and the limit
  model leaks the dual mass g'(1)/E[exp(-S1)] out of the countably
  additive part.
* ex37 - same family with the weights calibrated so g'(1) = 0 exactly:
  boundary optimum, but no leaked mass.
* ex38 - matrix market on pairs (i, j): row 1 is long the geometric
  weight W, rows i > 1 are short W up to the diagonal.  g is finite on
  -1 < h <= 5 (certified via geometric ratio / p-series bounds) and the
  leaked mass admits an infinity of singular representatives, indexed by
  diagonal limit functionals psi(f) = limsup_i f_ii / i.

Every scenario also has a finite truncation that feeds the tree solvers,
so the analytic limits can be bracketed by honest finite-market runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.stats import poisson

from .dual import dual_optimize
from .errors import CalibrationError, InputError, UnsupportedAsymptoticsError
from .market import EventTree, binomial_tree, one_period_tree
from .primal import primal_optimize
from .utility import ExponentialUtility

__all__ = [
    "CompoundPoissonSpec",
    "DiscreteZSpec",
    "MatrixModelSpec",
    "SeriesEval",
    "Ex35Result",
    "ex35_solve",
    "ex35_market",
    "ex35_limit_value",
    "ex36_g",
    "ex36_gprime",
    "ex36_exp_moment",
    "ex36_singular_mass",
    "ex36_market",
    "ex36_limit_value",
    "ex37_calibrate",
    "Ex38Series",
    "ex38_series",
    "ex38_singular_mass",
    "ex38_market",
    "ex38_limit_value",
    "DiagonalRule",
    "minus_s1_diagonal",
    "subdiagonal_rule",
    "ex38_psi",
    "ex38_membership_envelope",
    "TruncationRow",
    "TruncationStudy",
    "truncation_study",
]

_E1 = math.e - 1.0


# ---------------------------------------------------------------------------
# scenario parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompoundPoissonSpec:
    """Jump-rate, horizon and jump-decay parameters of scenario ex35."""

    rate: float = 1.0
    horizon: float = 1.0
    nu: float = 2.0

    def __post_init__(self):
        for name in ("rate", "horizon", "nu"):
            if not getattr(self, name) > 0.0:
                raise InputError(f"{name} must be strictly positive")

    def jump_mgf_neg(self, a: float) -> float:
        """M(-a) = E[exp(-a * jump)] = exp(-a) nu^2/(nu^2 - a^2), |a| < nu."""
        if abs(a) >= self.nu:
            return math.inf
        return math.exp(-a) * self.nu**2 / (self.nu**2 - a * a)


@dataclass(frozen=True)
class DiscreteZSpec:
    """Atom weights of scenarios ex36/ex37.

    p1 is the weight of z = 1; tail holds (n, p_n) pairs, n >= 2, for the
    atoms z_n = 1/n - 1.  Weights must sum to one.  Lists are finite, so
    all moments sum(p_n n^k) are automatically finite.
    """

    p1: float
    tail: tuple = ()

    def __post_init__(self):
        if not self.p1 > 0.0:
            raise InputError("p1 must be strictly positive")
        tail = tuple((int(n), float(p)) for n, p in self.tail)
        seen = set()
        for n, p in tail:
            if n < 2:
                raise InputError("tail atoms are indexed by n >= 2")
            if n in seen:
                raise InputError(f"duplicate tail atom n={n}")
            seen.add(n)
            if p < 0.0:
                raise InputError("tail weights must be nonnegative")
        total = self.p1 + sum(p for _, p in tail)
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"weights must sum to 1, got {total!r}")
        object.__setattr__(self, "tail", tuple(sorted(tail)))

    @classmethod
    def from_dict(cls, p1: float, tail: Mapping[int, float]) -> "DiscreteZSpec":
        return cls(p1, tuple(sorted(tail.items())))

    @property
    def degenerate(self) -> bool:
        """No loss atoms at all; formula testing only."""
        return all(p == 0.0 for _, p in self.tail)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """(z values, weights) with z_1 = 1 first."""
        z = [1.0] + [1.0 / n - 1.0 for n, _ in self.tail]
        w = [self.p1] + [p for _, p in self.tail]
        return np.array(z), np.array(w)


@dataclass(frozen=True)
class MatrixModelSpec:
    """Row-weight exponent and truncation depth of scenario ex38.

    Row weights are p_i = i^{-r} e^{-4i} for i >= 2 (proportionality
    constant 1) and p_1 absorbs the rest; column weights are the geometric
    law P(W = j) = (e-1) e^{-j}.
    """

    exponent_r: float = 12.0
    depth: int = 40

    def __post_init__(self):
        if not self.exponent_r > 3.0:
            raise InputError("exponent r must exceed 3")
        if self.depth < 10:
            raise InputError("truncation depth must be at least 10")

    def row_weight(self, i: int) -> float:
        if i == 1:
            return self.p1
        return i ** (-self.exponent_r) * math.exp(-4.0 * i)

    @property
    def p1(self) -> float:
        # the full series, not just the truncated part; terms below e^-600
        # are already zero in double precision
        s = sum(i ** (-self.exponent_r) * math.exp(-4.0 * i) for i in range(2, 160))
        return 1.0 - s


@dataclass(frozen=True)
class SeriesEval:
    """Extended-real series value with an explicit finiteness certificate."""

    value: float
    finite: bool
    certificate: str = ""


# ---------------------------------------------------------------------------
# ex35: compound Poisson closed form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ex35Result:
    a_star: float
    a_star_closed_form: float
    m_at_star: float
    value: float
    log_normalizer: float  # dQ*/dP = exp(-a* S_T + log_normalizer)


def ex35_solve(spec: CompoundPoissonSpec) -> Ex35Result:
    """Numeric tilt optimum of scenario ex35, checked against the closed form.

    Minimizes M(-a) over a in (-nu, nu); the optimal exponential tilt obeys
    a^2 + 2a = nu^2, i.e. a* = sqrt(1 + nu^2) - 1.  The certified value is
    -exp(rate*T*(M(-a*) - 1)) and the optimal claim is a* * S_T.

    Raises RuntimeError if the numeric argmin strays more than 1e-8 from
    the closed form (that would mean the optimizer, not the formula, broke).
    """
    from .roots import golden_min, monotone_root

    nu = spec.nu
    lo, hi = -nu * (1.0 - 1e-9), nu * (1.0 - 1e-9)
    a0 = golden_min(lambda a: spec.jump_mgf_neg(a), lo, hi, tol=1e-10)
    # polish on the stationarity condition d/da log M(-a) = -1 + 2a/(nu^2-a^2)
    resid = lambda a: -1.0 + 2.0 * a / (nu * nu - a * a)
    dresid = lambda a: 2.0 * (nu * nu + a * a) / (nu * nu - a * a) ** 2
    w = 0.45 * (hi - max(a0 - 0.1 * nu, lo))
    a_star = monotone_root(resid, max(a0 - w, lo), min(a0 + w, hi), dfn=dresid)
    closed = math.sqrt(1.0 + nu * nu) - 1.0
    if abs(a_star - closed) > 1e-8:
        raise RuntimeError(
            f"tilt optimum {a_star!r} disagrees with sqrt(1+nu^2)-1 = {closed!r}"
        )
    m_star = spec.jump_mgf_neg(a_star)
    lt = spec.rate * spec.horizon
    value = -math.exp(lt * (m_star - 1.0))
    return Ex35Result(a_star, closed, m_star, value, -lt * (m_star - 1.0))


def ex35_market(
    spec: CompoundPoissonSpec,
    *,
    jumps_per_unit: int = 4,
    n_max: int = 20,
    radius: float | None = None,
    prob_floor: float = 1e-14,
) -> EventTree:
    """Finite one-period market with the lattice-discretized terminal law.

    The jump size 1 + delta*m lives on the lattice of step delta =
    1/jumps_per_unit, so n-jump sums stay on a common grid and the terminal
    law is an exact discrete convolution.  Poisson counts are truncated at
    n_max and renormalized; atoms below prob_floor (relative) are pruned.
    """
    K = int(jumps_per_unit)
    if K < 1:
        raise InputError("jumps_per_unit must be a positive integer")
    delta = 1.0 / K
    if radius is None:
        radius = 34.0 / spec.nu  # Laplace tail below e^-34
    L = max(int(math.ceil(radius * K)), K + 1)
    m = np.arange(-L, L + 1)
    jump_w = np.exp(-spec.nu * np.abs(delta * m))
    jump_w /= jump_w.sum()

    lt = spec.rate * spec.horizon
    counts = np.arange(0, n_max + 1)
    count_w = poisson.pmf(counts, lt)
    count_w /= count_w.sum()

    # accumulate the mixture over jump counts on the global integer lattice
    # value(index) = index * delta; n jumps contribute on offsets n*K + conv
    lo_idx = min(0, n_max * (K - L))
    hi_idx = n_max * (K + L)
    total = np.zeros(hi_idx - lo_idx + 1)
    total[0 - lo_idx] += count_w[0]
    conv = np.array([1.0])
    for n in range(1, n_max + 1):
        conv = np.convolve(conv, jump_w)
        half = (conv.size - 1) // 2
        start = n * K - half - lo_idx
        total[start : start + conv.size] += count_w[n] * conv

    keep = total > prob_floor * total.max()
    values = (np.arange(lo_idx, hi_idx + 1)[keep]) * delta
    probs = total[keep]
    probs /= probs.sum()
    return one_period_tree(0.0, values.reshape(-1, 1), probs)


def ex35_limit_value(spec: CompoundPoissonSpec) -> float:
    return ex35_solve(spec).value


# ---------------------------------------------------------------------------
# ex36 / ex37: discrete Z markets
# ---------------------------------------------------------------------------


def _z_of(n: int) -> float:
    return 1.0 if n == 1 else 1.0 / n - 1.0


def ex36_g(h: float, spec: DiscreteZSpec) -> SeriesEval:
    """g(h) = E[-exp(-h Z Y)] = -sum_n p_n / (1 + h z_n), finite on -1 < h <= 1.

    Uses the exact exponential moment E[exp(-sY)] = 1/(1+s), s > -1.  The
    finiteness region is that of the full atom family: outside -1 < h <= 1
    the value is -inf with the divergence flagged, even if a particular
    finite tail list would stay summable slightly beyond 1.
    """
    if h <= -1.0:
        return SeriesEval(-math.inf, False, "atom z=1: 1+h <= 0")
    if h > 1.0 + 1e-15:
        return SeriesEval(-math.inf, False, "atoms z_n -> -1: 1 + h*z_n reaches 0")
    acc = spec.p1 / (1.0 + h)
    for n, p in spec.tail:
        acc += p / (1.0 - h + h / n)
    return SeriesEval(-acc, True, "all atoms satisfy 1 + h*z_n > 0")


def ex36_gprime(h: float, spec: DiscreteZSpec) -> SeriesEval:
    """g'(h) = E[S1 exp(-h S1)] = sum_n p_n z_n / (1 + h z_n)^2."""
    if h <= -1.0:
        return SeriesEval(math.inf, False, "atom z=1: 1+h <= 0")
    if h > 1.0 + 1e-15:
        return SeriesEval(-math.inf, False, "atoms z_n -> -1: 1 + h*z_n reaches 0")
    acc = spec.p1 / (1.0 + h) ** 2
    for n, p in spec.tail:
        zn = 1.0 / n - 1.0
        acc += p * zn / (1.0 - h + h / n) ** 2
    return SeriesEval(acc, True, "all atoms satisfy 1 + h*z_n > 0")


def ex36_exp_moment(spec: DiscreteZSpec) -> float:
    """E[exp(-S1)] = p1/2 + sum p_n * n (the normalizer of the regular part)."""
    return spec.p1 / 2.0 + sum(p * n for n, p in spec.tail)


def ex36_singular_mass(spec: DiscreteZSpec, grid: int = 2000) -> float:
    """Leaked dual mass g'(1)/E[exp(-S1)] of the boundary optimum h = 1.

    Requires g' > 0 across a grid on (-1, 1]; a sign change means the
    optimum is interior and the mass formula does not apply.  Degenerate
    specs without loss atoms are refused: with only the z = 1 atom the
    objective increases in h without bound and no mass interpretation
    exists.
    """
    if spec.degenerate:
        raise InputError("spec has no loss atoms; singular mass is undefined")
    hs = np.linspace(-0.999, 1.0, grid)
    vals = np.array([ex36_gprime(h, spec).value for h in hs])
    if np.any(vals <= 0.0):
        h_bad = float(hs[int(np.argmin(vals))])
        raise InputError(
            f"g' changes sign on (-1, 1] (g'({h_bad:.4f}) <= 0); "
            "the optimum is interior and no mass leaks"
        )
    return ex36_gprime(1.0, spec).value / ex36_exp_moment(spec)


def ex37_calibrate(weights: Mapping[int, float]) -> DiscreteZSpec:
    """Scale tail weights so the boundary derivative vanishes: g'(1) = 0.

    With p_n = theta * w_n (n >= 2) and p1 = 1 - theta*sum(w), the identity
    g'(1) = p1/4 - sum p_n n(n-1) pins theta = 1/(sum w + 4 sum w n(n-1)).
    The calibrated spec keeps g' > 0 strictly inside (-1, 1), so h = 1 is
    still the optimum but nothing leaks.
    """
    items = sorted((int(n), float(w)) for n, w in weights.items())
    if any(n < 2 for n, _ in items):
        raise InputError("tail weights are indexed by n >= 2")
    if any(w < 0.0 for _, w in items):
        raise InputError("tail weights must be nonnegative")
    sw = sum(w for _, w in items)
    swn = sum(w * n * (n - 1) for n, w in items)
    if swn <= 0.0:
        raise CalibrationError(
            "all tail weights vanish; g'(1) = p1/4 > 0 cannot be calibrated away"
        )
    theta = 1.0 / (sw + 4.0 * swn)
    spec = DiscreteZSpec(1.0 - theta * sw, tuple((n, theta * w) for n, w in items))
    resid = ex36_gprime(1.0, spec).value
    if abs(resid) > 1e-12:
        raise CalibrationError(f"calibration residual {resid!r} exceeds 1e-12")
    hs = np.linspace(-0.99, 0.999, 1000)
    if any(ex36_gprime(h, spec).value <= 0.0 for h in hs):
        raise CalibrationError("calibrated g' is not positive inside (-1, 1)")
    return spec


def ex36_market(spec: DiscreteZSpec, n_cut: int, *, y_atoms: int = 200) -> EventTree:
    """Finite truncation: z atoms up to n_cut, Y on a quantile midpoint grid.

    Atoms with n > n_cut are dropped and the weights renormalized; Y keeps
    probability-matched masses 1/y_atoms at the quantile midpoints of the
    unit exponential.
    """
    if n_cut < 2:
        raise InputError("n_cut must keep at least one loss atom")
    pairs = [(1, spec.p1)] + [(n, p) for n, p in spec.tail if n <= n_cut and p > 0.0]
    if len(pairs) == 1:
        raise InputError("truncation removed every loss atom")
    w = np.array([p for _, p in pairs])
    w /= w.sum()
    z = np.array([_z_of(n) for n, _ in pairs])
    u = (np.arange(y_atoms) + 0.5) / y_atoms
    y = -np.log1p(-u)
    s1 = (z[:, None] * y[None, :]).ravel()
    probs = (w[:, None] * np.full(y_atoms, 1.0 / y_atoms)[None, :]).ravel()
    return one_period_tree(0.0, s1.reshape(-1, 1), probs)


def ex36_limit_value(spec: DiscreteZSpec) -> float:
    """Analytic limit sup g over (-1, 1]: g(1) when g' stays positive."""
    from .roots import golden_min

    if ex36_gprime(1.0, spec).value >= 0.0:
        return ex36_g(1.0, spec).value
    h = golden_min(lambda t: -ex36_g(t, spec).value, -0.999999, 1.0, tol=1e-13)
    return ex36_g(h, spec).value


# ---------------------------------------------------------------------------
# ex38: matrix market series with certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ex38Series:
    g: float
    gprime: float
    finite: bool
    certificate: str


def _ex38_row_terms(spec: MatrixModelSpec, h: float, i: np.ndarray):
    """Per-row contributions (p_i B_i, p_i (e-1) K_i) to E[e^{-hS1}] and -g'.

    B_i = (e-1) sum_{k<=i} b^k + e^{-i} and K_i = sum_{k<=i} k b^k with
    b = e^{h-1}; both evaluated in log space when b > 1 so nothing
    overflows before the p_i = i^{-r} e^{-4i} damping is applied.
    """
    r = spec.exponent_r
    lb = h - 1.0
    log_p = -r * np.log(i) - 4.0 * i
    if abs(lb) < 1e-14:
        G = i.astype(float)
        K = i * (i + 1.0) / 2.0
        tb = np.exp(log_p) * (_E1 * G + np.exp(-i))
        tk = np.exp(log_p) * (_E1 * K)
        return tb, tk
    if lb < 0.0:
        b = math.exp(lb)
        bi = np.exp(lb * i)
        G = b * (1.0 - bi) / (1.0 - b)
        K = b * (1.0 - (i + 1.0) * bi + i * bi * b) / (1.0 - b) ** 2
        tb = np.exp(log_p) * (_E1 * G + np.exp(-i))
        tk = np.exp(log_p) * (_E1 * K)
        return tb, tk
    b = math.exp(lb)
    bmi = np.exp(-lb * i)  # b^-i, harmless underflow
    # G_i = b^{i+1} (1 - b^-i) / (b - 1)
    log_G = lb * (i + 1.0) + np.log1p(-bmi) - math.log(b - 1.0)
    # K_i = b^{i+1} (i(b-1) - 1 + b^-i) / (b-1)^2
    log_K = lb * (i + 1.0) + np.log(i * (b - 1.0) - 1.0 + bmi) - 2.0 * math.log(b - 1.0)
    tb = np.exp(log_p + np.log(_E1) + log_G) + np.exp(log_p - i)
    tk = np.exp(log_p + np.log(_E1) + log_K)
    return tb, tk


def ex38_series(spec: MatrixModelSpec, h: float) -> Ex38Series:
    """Evaluate g(h) = E[-e^{-hS1}] and g'(h) with a finiteness certificate.

    Finiteness is decided by closed-form tail bounds, not truncation: the
    row terms behave like i^{-r} e^{(h-5)i}, a geometric ratio e^{h-5}
    away from h = 5 and a p-series with exponent r at the boundary.  The
    series itself is summed adaptively until the certified tail bound drops
    below 1e-14 of the accumulated value.
    """
    r = spec.exponent_r
    if h <= -1.0:
        return Ex38Series(
            -math.inf, math.inf, False, "row 1 geometric base e^{-(h+1)} >= 1"
        )
    if h > 5.0 + 1e-12:
        return Ex38Series(
            -math.inf,
            -math.inf,
            False,
            "row terms grow like e^{(h-5)i}: geometric ratio above 1",
        )
    boundary = abs(h - 5.0) <= 1e-12
    if boundary:
        cert = f"boundary h=5: p-series with exponent r={r:g} > 1"
    else:
        cert = f"geometric tail ratio e^(h-5) = {math.exp(h - 5.0):.3g} < 1"

    w = math.exp(-(h + 1.0))
    A = _E1 * w / (1.0 - w)  # E[e^{-hW}]
    J1 = _E1 * w / (1.0 - w) ** 2  # E[W e^{-hW}]

    acc_b = 0.0
    acc_k = 0.0
    lo = 2
    block = 1024
    while True:
        i = np.arange(lo, lo + block, dtype=float)
        tb, tk = _ex38_row_terms(spec, h, i)
        acc_b += float(tb.sum())
        acc_k += float(tk.sum())
        last_b, last_k = float(tb[-1]), float(tk[-1])
        top = lo + block - 1
        if boundary:
            tail_b = last_b * top / (r - 1.0) * 1.05
            tail_k = last_k * top / (r - 2.0) * 1.05
        else:
            rho = math.exp(h - 5.0) if h > 1.0 else math.exp(-3.5)
            rho = min(rho * (1.0 + 1e-9), 0.999999999)
            tail_b = last_b * rho / (1.0 - rho)
            tail_k = last_k * rho / (1.0 - rho)
        scale_b = max(abs(acc_b), 1e-12)
        scale_k = max(abs(acc_k), 1e-12)
        if (tail_b <= 1e-14 * scale_b and tail_k <= 1e-14 * scale_k) or top >= 2**21:
            break
        lo += block
        block = min(block * 2, 2**18)

    p1 = spec.p1
    g = -(p1 * A + acc_b)
    gprime = p1 * J1 - acc_k
    return Ex38Series(g, gprime, True, cert)


def ex38_singular_mass(spec: MatrixModelSpec, grid: int = 60) -> float:
    """Leaked mass of the h = 5 boundary optimum: 5 g'(5) / E[e^{-5 S1}].

    Requires g' > 0 across (-1, 5]; with the unit proportionality constant
    this needs a fairly large exponent r (the default 12 qualifies, r = 4
    does not).
    """
    hs = np.concatenate(
        [np.linspace(-0.99, 4.8, grid - 12), np.linspace(4.85, 5.0, 12)]
    )
    vals = np.array([ex38_series(spec, h).gprime for h in hs])
    if np.any(vals <= 0.0):
        h_bad = float(hs[int(np.argmin(vals))])
        raise InputError(
            f"g' is not positive on (-1, 5] (g'({h_bad:.3f}) <= 0 for r={spec.exponent_r:g}); "
            "no boundary optimum, mass formula does not apply"
        )
    at5 = ex38_series(spec, 5.0)
    return 5.0 * at5.gprime / (-at5.g)


def ex38_market(spec: MatrixModelSpec, depth: int | None = None) -> EventTree:
    """Finite truncation of the matrix market to i, j <= depth, renormalized."""
    N = spec.depth if depth is None else int(depth)
    if N < 2:
        raise InputError("depth must be at least 2")
    rows = np.array([spec.row_weight(i) for i in range(1, N + 1)])
    cols = _E1 * np.exp(-np.arange(1, N + 1, dtype=float))
    P = rows[:, None] * cols[None, :]
    P /= P.sum()
    i = np.arange(1, N + 1)[:, None]
    j = np.arange(1, N + 1)[None, :]
    s1 = np.where(i == 1, j, np.where(j <= i, -j, 0)).astype(float)
    return one_period_tree(0.0, s1.ravel().reshape(-1, 1), P.ravel())


def ex38_limit_value(spec: MatrixModelSpec) -> float:
    """Analytic limit sup g over (-1, 5]: g(5) when g' stays positive."""
    from .roots import golden_min

    if ex38_series(spec, 5.0).gprime >= 0.0:
        return ex38_series(spec, 5.0).g
    h = golden_min(lambda t: -ex38_series(spec, t).g, -0.99, 5.0, tol=1e-10)
    return ex38_series(spec, h).g


# ---------------------------------------------------------------------------
# diagonal limit functionals (declared asymptotics)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalRule:
    """A diagonal sequence i -> f_ii with a declared asymptotic template.

    kinds: "bounded" (|f_ii| <= C), "power" (f_ii ~ coefficient * i^exponent),
    "exponential" (f_ii ~ coefficient * exponent^i).  The optional values
    callable supplies actual entries for consistency spot checks; limits are
    always taken from the template, never from finitely many samples.
    """

    kind: str
    coefficient: float = 0.0
    exponent: float = 1.0
    values: Callable[[int], float] | None = None


def minus_s1_diagonal(spec: MatrixModelSpec | None = None) -> DiagonalRule:
    """Diagonal of -S1 in scenario ex38: entries i for i >= 2, so the limit is 1."""
    return DiagonalRule(
        "power", 1.0, 1.0, values=lambda i: float(i) if i >= 2 else -1.0
    )


def subdiagonal_rule(spec: MatrixModelSpec | None = None) -> DiagonalRule:
    """First subdiagonal of -S1: entries i-1, same linear rate 1.

    Feeding this to ex38_psi shows the leaked mass has more than one
    singular representative: any diagonal band repeats the construction.
    """
    return DiagonalRule(
        "power", 1.0, 1.0, values=lambda i: float(i - 1) if i >= 2 else 0.0
    )


def ex38_psi(rule: DiagonalRule, horizon: int = 400) -> float:
    """limsup_i f_ii / i read off the declared template.

    A limsup is not computable from finitely many entries, so the template
    decides; sampled values (when present) only have to stay consistent
    with it near the horizon.  Raises UnsupportedAsymptoticsError for
    unknown templates or samples that contradict the declaration.
    """
    k = rule.kind
    if k == "bounded":
        psi = 0.0
    elif k == "power":
        if rule.exponent < 1.0:
            psi = 0.0
        elif rule.exponent == 1.0:
            psi = rule.coefficient
        else:
            psi = math.copysign(math.inf, rule.coefficient)
    elif k == "exponential":
        if rule.exponent > 1.0 and rule.coefficient != 0.0:
            psi = math.copysign(math.inf, rule.coefficient)
        else:
            psi = 0.0
    else:
        raise UnsupportedAsymptoticsError(f"unknown asymptotic template {k!r}")
    if rule.values is not None and math.isfinite(psi):
        ratio = rule.values(horizon) / horizon
        slack = 0.2 * (1.0 + abs(psi))
        if abs(ratio - psi) > slack:
            raise UnsupportedAsymptoticsError(
                f"sampled ratio f_ii/i = {ratio:.4g} at i={horizon} "
                f"contradicts the declared limit {psi:.4g}"
            )
    return psi


def ex38_membership_envelope(spec: MatrixModelSpec, scale: float = 1.0):
    """Growth cap for diagonals of unit-ball elements of the loss space.

    E[e^{scale |f|}] < inf forces scale*|f_ii| < 5i + r ln i eventually, so
    psi on the positive unit ball never exceeds 5/scale.  Returns the cap
    sequence i -> (5i + r ln i)/scale; the exact functional norm is not
    asserted, only this bound.
    """
    r = spec.exponent_r
    return lambda i: (5.0 * i + r * math.log(i)) / scale


# ---------------------------------------------------------------------------
# truncation studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationRow:
    level: int
    value_dual: float
    value_primal: float
    gap: float
    lambda_star: float
    expected_gain: float  # E_{q*}[S1 - S0], 0 up to solver tolerance


@dataclass
class TruncationStudy:
    scenario: str
    rows: list
    analytic_value: float | None
    analytic_regular_mean: float | None  # E under the limit regular part
    direction: str  # "nondecreasing" | "nonincreasing" | "constant" | "mixed"
    monotone: bool
    converging: bool | None

    def values(self) -> np.ndarray:
        return np.array([r.value_dual for r in self.rows])


def _study_row(tree: EventTree, level: int, x: float) -> TruncationRow:
    U = ExponentialUtility(1.0)
    dual = dual_optimize(tree, U, x)
    primal = primal_optimize(tree, U, x)
    if tree.horizon == 1:
        dS = tree.increments()[:, 0, :].sum(axis=1)
        eg = float(dual.q @ dS)
    else:
        eg = 0.0
    return TruncationRow(
        level, dual.value, primal.value, dual.value - primal.value, dual.lam, eg
    )


def truncation_study(scenario, levels, *, x: float = 0.0, y_atoms: int = 200) -> TruncationStudy:
    """Solve a ladder of finite truncations and tabulate the convergence.

    scenario is a spec object (CompoundPoissonSpec: levels are lattice
    densities per unit; DiscreteZSpec: levels are z-atom cutoffs;
    MatrixModelSpec: levels are matrix depths) or the string "binomial",
    which embeds a fixed two-state market at every level as a constancy
    control.  Values are checked for a single monotone direction within
    1e-9; when an analytic limit exists, the last level must not sit
    farther from it than the first.
    """
    levels = [int(N) for N in levels]
    if not levels:
        raise InputError("need at least one truncation level")
    analytic = None
    regular_mean = None
    if isinstance(scenario, CompoundPoissonSpec):
        name = "ex35"
        analytic = ex35_limit_value(scenario)
        trees = [(N, ex35_market(scenario, jumps_per_unit=N)) for N in levels]
    elif isinstance(scenario, DiscreteZSpec):
        name = "ex36"
        analytic = ex36_limit_value(scenario)
        if not scenario.degenerate and ex36_gprime(1.0, scenario).value > 0.0:
            regular_mean = ex36_singular_mass(scenario)
        trees = [(N, ex36_market(scenario, N, y_atoms=y_atoms)) for N in levels]
    elif isinstance(scenario, MatrixModelSpec):
        name = "ex38"
        analytic = ex38_limit_value(scenario)
        try:
            regular_mean = ex38_singular_mass(scenario) / 5.0
        except InputError:
            regular_mean = None
        trees = [(N, ex38_market(scenario, N)) for N in levels]
    elif scenario == "binomial":
        name = "binomial"
        tree = binomial_tree()
        trees = [(N, tree) for N in levels]
    else:
        raise InputError(f"unknown truncation scenario {scenario!r}")

    rows = [_study_row(tree, N, x) for N, tree in trees]
    vals = np.array([r.value_dual for r in rows])
    diffs = np.diff(vals)
    if vals.size < 2 or np.all(np.abs(diffs) <= 1e-9):
        direction, monotone = "constant", True
    elif np.all(diffs >= -1e-9):
        direction, monotone = "nondecreasing", True
    elif np.all(diffs <= 1e-9):
        direction, monotone = "nonincreasing", True
    else:
        direction, monotone = "mixed", False
    converging = None
    if analytic is not None and vals.size >= 2:
        converging = bool(
            abs(vals[-1] - analytic) <= abs(vals[0] - analytic) + 1e-12
        )
    return TruncationStudy(
        name, rows, analytic, regular_mean, direction, monotone, converging
    )
