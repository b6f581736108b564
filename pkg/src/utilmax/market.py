"""Finite event-tree markets and their martingale polytopes.

A market is a rooted tree of uniform depth T; each node carries a price
vector for d assets and a conditional branch probability.  Sample paths are
the root-to-leaf walks, and a trading strategy assigns a position vector to
every non-terminal node.  The martingale measures form the polytope

    { q >= 0, sum q = 1, sum_{paths through node} q * (S_child - S_node) = 0 }

with one constraint per (non-terminal node, asset).  The conditional form
E_q[dS | node] = 0 is multiplied through by q(node), which keeps the
constraints linear and closes the set where q(node) = 0.

Polytope geometry: vertices are enumerated exactly by candidate-support
search when the combinatorial budget allows (every vertex is the unique
solution on its support, whose size is at most the equality rank); larger
instances keep only the (A, b) description plus an LP oracle, which is all
the solvers need.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import InputError
from .roots import grid_refine_max
from .utility import UtilityFunction

__all__ = [
    "EventTree",
    "one_period_tree",
    "binomial_tree",
    "trinomial_tree",
    "iid_product_tree",
    "random_one_period",
    "loss_bound",
    "terminal_gains",
    "running_gains",
    "admissible_scale",
    "suitability_witness",
    "unbounded_one_period_witness",
    "martingale_polytope",
    "MartingalePolytope",
    "supermartingale_check",
    "equality_of_sups_check",
    "arbitrage_certificate",
]

_MAX_SUPPORT_COMBOS = 200_000


@dataclass(frozen=True)
class EventTree:
    """Uniform-depth event tree with per-node prices.

    Attributes
    ----------
    prices : (n_nodes, d) array
    parent : (n_nodes,) int array, -1 at the root
    cond_prob : (n_nodes,) conditional probability given the parent (1 at root)
    times : (n_nodes,) time index of each node
    """

    prices: np.ndarray
    parent: np.ndarray
    cond_prob: np.ndarray
    times: np.ndarray
    # derived path structure, filled in __post_init__
    node_at: np.ndarray = field(default=None, compare=False)
    path_probs: np.ndarray = field(default=None, compare=False)
    nonterminal: np.ndarray = field(default=None, compare=False)
    nt_index: dict = field(default=None, compare=False)

    def __post_init__(self):
        prices = np.atleast_2d(np.asarray(self.prices, dtype=float))
        if prices.shape[0] == np.asarray(self.parent).size and prices.ndim == 2:
            pass
        parent = np.asarray(self.parent, dtype=int)
        cond = np.asarray(self.cond_prob, dtype=float)
        times = np.asarray(self.times, dtype=int)
        n = parent.size
        if prices.shape[0] != n or cond.size != n or times.size != n:
            raise InputError("tree arrays must share the node dimension")
        if np.any(cond <= 0.0):
            raise InputError("branch probabilities must be strictly positive")
        children = [[] for _ in range(n)]
        for i in range(n):
            if parent[i] >= 0:
                children[parent[i]].append(i)
        for ch in children:
            if ch:
                s = float(np.sum(cond[ch]))
                if abs(s - 1.0) > 1e-10:
                    raise InputError("branch probabilities at a node must sum to 1")
        T = int(times.max())
        leaves = [i for i in range(n) if not children[i]]
        if any(times[i] != T for i in leaves):
            raise InputError("tree must have uniform depth")
        leaves.sort()
        node_at = np.empty((len(leaves), T + 1), dtype=int)
        for p, leaf in enumerate(leaves):
            node = leaf
            for t in range(T, -1, -1):
                node_at[p, t] = node
                node = parent[node]
        path_probs = np.ones(len(leaves))
        for t in range(1, T + 1):
            path_probs *= cond[node_at[:, t]]
        nonterminal = np.array(
            [i for i in range(n) if children[i]], dtype=int
        )
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "cond_prob", cond)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "node_at", node_at)
        object.__setattr__(self, "path_probs", path_probs)
        object.__setattr__(self, "nonterminal", nonterminal)
        object.__setattr__(
            self, "nt_index", {int(v): k for k, v in enumerate(nonterminal)}
        )

    @property
    def n_paths(self) -> int:
        return self.node_at.shape[0]

    @property
    def horizon(self) -> int:
        return self.node_at.shape[1] - 1

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    def increments(self) -> np.ndarray:
        """Price increments along paths, shape (n_paths, T, d)."""
        return (
            self.prices[self.node_at[:, 1:]] - self.prices[self.node_at[:, :-1]]
        )

    def terminal_values(self, per_node) -> np.ndarray:
        """Map a per-node array onto paths via the leaf at each path."""
        arr = np.asarray(per_node)
        return arr[self.node_at[:, -1]]


def one_period_tree(s0, s1, probs) -> EventTree:
    """Single-period market: root prices s0, one child per state row of s1."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    s1 = np.atleast_2d(np.asarray(s1, dtype=float))
    probs = np.asarray(probs, dtype=float)
    if s1.shape[1] != s0.size:
        s1 = s1.reshape(-1, s0.size)
    n = s1.shape[0]
    if probs.size != n:
        raise InputError("state probabilities must match the number of states")
    prices = np.vstack([s0[None, :], s1])
    parent = np.array([-1] + [0] * n)
    cond = np.concatenate([[1.0], probs])
    times = np.array([0] + [1] * n)
    return EventTree(prices, parent, cond, times)


def binomial_tree(s0=1.0, up=2.0, down=0.5, p_up=0.75) -> EventTree:
    return one_period_tree([s0], [[s0 * up], [s0 * down]], [p_up, 1.0 - p_up])


def trinomial_tree(s0=1.0, factors=(2.0, 1.0, 0.5), probs=(0.3, 0.4, 0.3)) -> EventTree:
    s1 = [[s0 * f] for f in factors]
    return one_period_tree([s0], s1, list(probs))


def iid_product_tree(s0, gross_returns, probs, periods: int, *, max_paths: int = 4096) -> EventTree:
    """Multi-period tree with i.i.d. multiplicative returns each period."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    R = np.atleast_2d(np.asarray(gross_returns, dtype=float))
    probs = np.asarray(probs, dtype=float)
    n_states, d = R.shape
    if d != s0.size:
        raise InputError("return rows must match the asset dimension")
    if n_states**periods > max_paths:
        raise InputError(f"tree would have {n_states**periods} paths (cap {max_paths})")
    prices = [s0.copy()]
    parent = [-1]
    cond = [1.0]
    times = [0]
    frontier = [0]
    for t in range(1, periods + 1):
        nxt = []
        for node in frontier:
            for k in range(n_states):
                prices.append(prices[node] * R[k])
                parent.append(node)
                cond.append(float(probs[k]))
                times.append(t)
                nxt.append(len(parent) - 1)
        frontier = nxt
    return EventTree(np.array(prices), np.array(parent), np.array(cond), np.array(times))


def random_one_period(rng: np.random.Generator, *, max_states: int = 6, max_assets: int = 2) -> EventTree:
    """Seeded arbitrage-free one-period market for randomized duality sweeps."""
    for _ in range(200):
        n = int(rng.integers(2, max_states + 1))
        d = int(rng.integers(1, max_assets + 1))
        s0 = np.ones(d)
        s1 = np.exp(rng.normal(0.0, 0.5, size=(n, d)))
        probs = rng.dirichlet(np.ones(n) * 2.0)
        if np.any(probs < 5e-3):
            continue
        tree = one_period_tree(s0, s1, probs)
        if not martingale_polytope(tree).is_empty:
            return tree
    raise RuntimeError("failed to draw an arbitrage-free market")


# ---------------------------------------------------------------------------
# strategies, gains, admissibility
# ---------------------------------------------------------------------------


def _strategy_matrix(tree: EventTree, H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    want = (len(tree.nonterminal), tree.n_assets)
    if H.shape != want:
        H = H.reshape(want)
    return H


def running_gains(tree: EventTree, H) -> np.ndarray:
    """Cumulative trading gains (H . S)_t, shape (n_paths, T + 1)."""
    H = _strategy_matrix(tree, H)
    dS = tree.increments()
    # position held over step t is the one chosen at the time-t node
    nt_of = np.vectorize(tree.nt_index.__getitem__)
    pos = H[nt_of(tree.node_at[:, :-1])]
    step_gain = np.einsum("ptd,ptd->pt", pos, dS)
    out = np.zeros((tree.n_paths, tree.horizon + 1))
    out[:, 1:] = np.cumsum(step_gain, axis=1)
    return out


def terminal_gains(tree: EventTree, H) -> np.ndarray:
    return running_gains(tree, H)[:, -1]


def loss_bound(tree: EventTree, kind: str = "constant", value: float = 1.0, values=None) -> np.ndarray:
    """Per-path loss-control weight W >= 1.

    kinds: ``constant`` (W = value), ``one_plus_excursion``
    (W = 1 + sum_i max_t |S^i_t - S^i_0|), ``per_path`` (explicit array).
    """
    if kind == "constant":
        if value < 1.0:
            raise InputError("loss bound must satisfy W >= 1")
        return np.full(tree.n_paths, float(value))
    if kind == "one_plus_excursion":
        dev = np.abs(tree.prices[tree.node_at] - tree.prices[tree.node_at[:, :1]])
        return 1.0 + dev.max(axis=1).sum(axis=1)
    if kind == "per_path":
        W = np.asarray(values, dtype=float)
        if W.shape != (tree.n_paths,):
            raise InputError("per_path loss bound must give one value per path")
        if np.any(W < 1.0):
            raise InputError("loss bound must satisfy W >= 1")
        return W
    raise InputError(f"unknown loss bound kind {kind!r}")


def admissible_scale(tree: EventTree, H, W) -> float:
    """Smallest c with (H.S)_t >= -c W along every path; finite on finite trees."""
    W = np.asarray(W, dtype=float)
    gains = running_gains(tree, H)
    ratios = np.maximum(-gains, 0.0) / W[:, None]
    return float(ratios.max())


def suitability_witness(tree: EventTree, W) -> np.ndarray:
    """Maximal constant positions eps with |eps_i (S^i_t - S^i_0)| <= W pathwise.

    Constant, nowhere-zero integrands are the canonical witnesses on finite
    trees; an excursion-free asset gets eps = 1.
    """
    W = np.asarray(W, dtype=float)
    dev = np.abs(tree.prices[tree.node_at] - tree.prices[tree.node_at[:, :1]])
    exc = dev.max(axis=1)  # per path, per asset
    eps = np.empty(tree.n_assets)
    for i in range(tree.n_assets):
        active = exc[:, i] > 0.0
        eps[i] = float(np.min(W[active] / exc[active, i])) if np.any(active) else 1.0
    return eps


def unbounded_one_period_witness(w_kind: str) -> float | None:
    """Witness scale for the one-period model with unbounded S1.

    With W = 1 + |S1| the unit position works (|S1 - S0| <= 1 + |S1| for
    S0 = 1); with constant W no nowhere-zero position is dominated, so no
    witness exists.
    """
    if w_kind == "one_plus_abs_s1":
        return 1.0
    if w_kind == "constant":
        return None
    raise InputError(f"unknown loss bound kind {w_kind!r} for the unbounded model")


# ---------------------------------------------------------------------------
# martingale polytope
# ---------------------------------------------------------------------------


@dataclass
class MartingalePolytope:
    """Equality description { q >= 0 : M q = rhs } of the martingale measures.

    The first row of M is the normalization sum q = 1; the remaining rows
    are the per-(node, asset) martingale constraints.  ``vertices`` is None
    when exact enumeration would exceed the combinatorial budget; it is
    computed on first access, the solvers only ever use the LP oracle.
    """

    M: np.ndarray
    rhs: np.ndarray
    is_empty: bool
    support: np.ndarray          # coordinates attaining positive mass somewhere
    affine_dim: int
    _vertex_cache: np.ndarray | None = field(default=None, repr=False)
    _vertices_done: bool = field(default=False, repr=False)

    @property
    def n_paths(self) -> int:
        return self.M.shape[1]

    @property
    def vertices(self) -> np.ndarray | None:
        if not self._vertices_done:
            self._vertex_cache = (
                None if self.is_empty else _enumerate_vertices(self.M, self.rhs)
            )
            self._vertices_done = True
        return self._vertex_cache

    def max_linear(self, f) -> tuple[float, np.ndarray]:
        """Maximize f . q over the polytope (LP oracle)."""
        f = np.asarray(f, dtype=float)
        res = linprog(-f, A_eq=self.M, b_eq=self.rhs, bounds=(0.0, None), method="highs")
        if not res.success:
            raise InputError(f"LP oracle failed: {res.message}")
        q = np.asarray(res.x, dtype=float)
        # polish the vertex: re-solve the equality system on the LP's support,
        # otherwise solver slack of ~1e-9 times large objective entries leaks
        # into the reported maximum
        keep = q > 1e-11 * max(1.0, float(q.max()))
        if keep.any():
            sub, *_ = np.linalg.lstsq(self.M[:, keep], self.rhs, rcond=None)
            if np.min(sub) >= -1e-12 and np.max(np.abs(self.M[:, keep] @ sub - self.rhs)) <= 1e-9:
                qc = np.zeros_like(q)
                qc[keep] = np.clip(sub, 0.0, None)
                q = qc
        return float(f @ q), q

    def contains(self, q, tol: float = 1e-9) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(
            np.all(q >= -tol) and np.max(np.abs(self.M @ q - self.rhs)) <= tol
        )

    def interior_point(self) -> tuple[np.ndarray, float]:
        """Most-interior point: maximize t subject to q >= t on the support."""
        n = self.n_paths
        sup = self.support
        # variables (q, t); rows -q_i + t <= 0 for supported coordinates
        A_ub = np.zeros((int(sup.sum()), n + 1))
        for r, i in enumerate(np.where(sup)[0]):
            A_ub[r, i] = -1.0
            A_ub[r, n] = 1.0
        A_eq = np.hstack([self.M, np.zeros((self.M.shape[0], 1))])
        bounds = [(0.0, None)] * n + [(0.0, None)]
        for i in np.where(~sup)[0]:
            bounds[i] = (0.0, 0.0)
        res = linprog(
            np.concatenate([np.zeros(n), [-1.0]]),
            A_ub=A_ub,
            b_ub=np.zeros(A_ub.shape[0]),
            A_eq=A_eq,
            b_eq=self.rhs,
            bounds=bounds,
            method="highs",
        )
        if not res.success:
            raise InputError(f"interior-point LP failed: {res.message}")
        return res.x[:-1], float(-res.fun)


def _enumerate_vertices(M: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    n = M.shape[1]
    r = int(np.linalg.matrix_rank(M))
    total = sum(math.comb(n, k) for k in range(1, r + 1))
    if total > _MAX_SUPPORT_COMBOS:
        return None
    found = []
    seen = set()
    for k in range(1, r + 1):
        for S in itertools.combinations(range(n), k):
            sub = M[:, S]
            if np.linalg.matrix_rank(sub) < k:
                continue
            x, res, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
            if np.max(np.abs(sub @ x - rhs)) > 1e-9:
                continue
            if np.any(x < -1e-9):
                continue
            q = np.zeros(n)
            q[list(S)] = np.clip(x, 0.0, None)
            key = tuple(np.round(q, 9))
            if key not in seen:
                seen.add(key)
                found.append(q)
    if not found:
        return None
    verts = np.array(sorted(found, key=tuple))
    return verts


def martingale_polytope(tree: EventTree) -> MartingalePolytope:
    """Build the martingale polytope of a tree, with LP support detection."""
    n = tree.n_paths
    d = tree.n_assets
    dS = tree.increments()
    rows = [np.ones(n)]
    for nt in tree.nonterminal:
        t = int(tree.times[nt])
        on_node = tree.node_at[:, t] == nt
        for i in range(d):
            row = np.where(on_node, dS[:, t, i], 0.0)
            if np.max(np.abs(row)) > 0.0:
                rows.append(row)
    M = np.array(rows)
    rhs = np.zeros(M.shape[0])
    rhs[0] = 1.0
    feas = linprog(
        np.zeros(n), A_eq=M, b_eq=rhs, bounds=(0.0, None), method="highs"
    )
    if not feas.success:
        return MartingalePolytope(M, rhs, True, np.zeros(n, dtype=bool), -1)
    # one LP (max t with q >= t) settles full support; per-coordinate LPs
    # only run when the polytope actually touches a face
    inner = linprog(
        np.concatenate([np.zeros(n), [-1.0]]),
        A_eq=np.hstack([M, np.zeros((M.shape[0], 1))]),
        b_eq=rhs,
        A_ub=np.hstack([-np.eye(n), np.ones((n, 1))]),
        b_ub=np.zeros(n),
        bounds=[(0.0, None)] * n + [(None, None)],
        method="highs",
    )
    if inner.success and inner.x[-1] > 1e-9 / n:
        support = np.ones(n, dtype=bool)
    else:
        support = np.zeros(n, dtype=bool)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            res = linprog(-e, A_eq=M, b_eq=rhs, bounds=(0.0, None), method="highs")
            support[i] = res.success and -res.fun > 1e-11
    # rank on the supported columns only: dead coordinates contribute
    # constraints that are vacuous once q_i = 0 is forced
    rank = int(np.linalg.matrix_rank(M[:, support])) if support.any() else 0
    affine_dim = int(support.sum()) - rank if support.any() else -1
    return MartingalePolytope(M, rhs, False, support, max(affine_dim, 0))


def arbitrage_certificate(tree: EventTree) -> np.ndarray | None:
    """Strategy with nonnegative terminal gains and positive expectation,
    present exactly when the martingale polytope is empty."""
    n_h = len(tree.nonterminal) * tree.n_assets
    gains_of = lambda h: terminal_gains(tree, h)
    basis = np.eye(n_h)
    G = np.array([gains_of(basis[j]) for j in range(n_h)]).T  # paths x n_h
    # maximize expected gain subject to pathwise gains >= 0, |h| <= 1
    res = linprog(
        -(tree.path_probs @ G),
        A_ub=-G,
        b_ub=np.zeros(tree.n_paths),
        bounds=[(-1.0, 1.0)] * n_h,
        method="highs",
    )
    if res.success and -res.fun > 1e-9:
        return res.x
    return None


# ---------------------------------------------------------------------------
# diagnostics used by the solvers and tests
# ---------------------------------------------------------------------------


def supermartingale_check(tree: EventTree, q, H, tol: float = 1e-9) -> tuple[bool, float]:
    """Largest conditional expected gain increment of H under q across nodes.

    Returns (all increments <= tol, worst increment).  Nodes with zero
    q-mass are skipped: the conditional expectation is undefined there and
    the closed polytope description already handles those branches.
    """
    q = np.asarray(q, dtype=float)
    H = _strategy_matrix(tree, H)
    dS = tree.increments()
    worst = -np.inf
    for nt in tree.nonterminal:
        t = int(tree.times[nt])
        on_node = tree.node_at[:, t] == nt
        mass = float(q[on_node].sum())
        if mass <= 1e-14:
            continue
        k = tree.nt_index[int(nt)]
        inc = float(q[on_node] @ (dS[on_node, t, :] @ H[k])) / mass
        worst = max(worst, inc)
    if worst == -np.inf:
        worst = 0.0
    return worst <= tol, worst


@dataclass
class CapStudy:
    caps: np.ndarray
    values: np.ndarray
    uncapped: float
    monotone: bool
    converged: bool


def equality_of_sups_check(
    tree: EventTree,
    U: UtilityFunction,
    x: float,
    caps,
    *,
    radius: float = 16.0,
    tol: float = 1e-6,
) -> CapStudy:
    """Compare sup_H E[u(x + gains)] against the same sup with gains capped.

    The capped problems increase with the cap and converge to the raw
    supremum; both sides are evaluated with the derivative-free grid
    refinement search so this check is independent of the Newton solvers.
    """
    dim = len(tree.nonterminal) * tree.n_assets
    p = tree.path_probs

    def value(h, cap=None):
        g = terminal_gains(tree, h)
        if cap is not None:
            g = np.minimum(g, cap)
        util = np.asarray(U.u(x + g), dtype=float)
        if np.any(np.isneginf(util)):
            return -np.inf
        return float(p @ util)

    _, v_raw = grid_refine_max(lambda h: value(h), dim, radius=radius)
    caps = np.asarray(caps, dtype=float)
    vals = np.array(
        [grid_refine_max(lambda h: value(h, cap=c), dim, radius=radius)[1] for c in caps]
    )
    monotone = bool(np.all(np.diff(vals) >= -1e-9))
    converged = bool(
        vals[-1] >= v_raw - tol * (1.0 + abs(v_raw)) and np.all(vals <= v_raw + 1e-9)
    )
    return CapStudy(caps, vals, v_raw, monotone, converged)
