"""Branched transport with concave cost c(d) = |d|^alpha.

Two parts live here:

* dyadic-array cost scaling: the centralized plan (every source wired to
  the sink), the hierarchical plan C(n) through collecting points, its
  closed form, and the sub-critical / critical / super-critical regimes
  split at alpha = 1 - 1/m;
* a small-N optimizer that enumerates full Steiner topologies and places
  branch points by a Weiszfeld-type fixed point.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np
from scipy import integrate, special

from .errors import InvalidExponent, InvalidTree, OverflowGuard, Unsupported
from .geometry import ChargeConfig, Point

Exponent = Union[float, Fraction]

CRITICAL_WINDOW = 1e-12
EXACT_SUM_LIMIT = 2 ** 24
MAX_TERMINALS = 8
SNAP_TOL = 1e-9
MOVE_TOL = 1e-9
MAX_ITER = 5000


def as_exponent(alpha) -> Exponent:
    """Keep rationals exact; strings such as "3/4" are parsed as fractions."""
    if isinstance(alpha, Fraction):
        out = alpha
    elif isinstance(alpha, int) and not isinstance(alpha, bool):
        out = Fraction(alpha)
    elif isinstance(alpha, str):
        out = Fraction(alpha) if "/" in alpha else float(alpha)
    else:
        out = float(alpha)
    if not (0 < out <= 1):
        raise InvalidExponent(f"alpha must lie in (0, 1], got {alpha}")
    return out


def is_critical(m: int, alpha) -> bool:
    alpha = as_exponent(alpha)
    if isinstance(alpha, Fraction):
        return alpha == 1 - Fraction(1, m)
    return abs(m * alpha + 1 - m) < CRITICAL_WINDOW


@dataclass(frozen=True)
class ArraySpec:
    """2^{mn} sources of intensity d at spacing h, drained to the centre."""

    m: int
    n: int
    h: float = 1.0
    d: float = 1.0
    alpha: Exponent = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n < 0:
            raise ValueError(f"need m >= 1 and n >= 0, got m={self.m} n={self.n}")
        if not (self.h > 0 and self.d > 0):
            raise ValueError(f"need h > 0 and d > 0, got h={self.h} d={self.d}")
        object.__setattr__(self, "alpha", as_exponent(self.alpha))

    @property
    def a(self) -> float:
        return float(self.alpha)


# --- dyadic array costs -------------------------------------------------


def mean_norm_unit_cube(m: int) -> float:
    """E|U| for U uniform on [-1, 1]^m.

    Uses |x| = (1 / sqrt(pi)) int_0^inf (1 - exp(-s^2 |x|^2)) s^{-2} ds
    and the product structure of the cube: E exp(-s^2 U_1^2) = g(s^2).
    """

    def one_minus_g(t):
        # g(t) = sqrt(pi) erf(sqrt t) / (2 sqrt t) = sum (-t)^k / (k! (2k+1))
        if t < 0.1:
            return -math.fsum((-t) ** k / (math.factorial(k) * (2 * k + 1)) for k in range(1, 12))
        return 1.0 - math.sqrt(math.pi) * special.erf(math.sqrt(t)) / (2.0 * math.sqrt(t))

    def integrand(s):
        if s == 0.0:
            return m / 3.0
        q = one_minus_g(s * s)
        return -math.expm1(m * math.log1p(-q)) / (s * s)

    head, _ = integrate.quad(integrand, 0.0, 4.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(integrand, 4.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return (head + tail) / math.sqrt(math.pi)


@dataclass(frozen=True)
class CentralizedCost:
    lattice: float | None
    integral: float

    @property
    def value(self) -> float:
        return self.integral if self.lattice is None else self.lattice


def _lattice_norm_sum(m: int, n: int) -> float:
    """sum |k| over k in {-2^{n-1}+1/2, ..., 2^{n-1}-1/2}^m."""
    side = 2 ** n
    ticks = np.arange(side) - side / 2 + 0.5
    sq = ticks ** 2
    if m == 1:
        return math.fsum(np.abs(ticks))
    partial = sq
    for _ in range(m - 2):
        partial = (partial[:, None] + sq[None, :]).ravel()
    return math.fsum(float(np.sqrt(partial + s).sum()) for s in sq)


def centralized_cost(spec: ArraySpec) -> CentralizedCost:
    """Cost of wiring every source straight to the sink.

    The exact lattice sum is returned when the array has at most 2^24
    points; the integral approximation d^alpha / h^m int_{cube} |x| dx is
    always returned.
    """
    m, n, h = spec.m, spec.n, spec.h
    if n * (m + 1) > 1000:
        raise OverflowGuard(f"cost ~ 2^{n * (m + 1)} overflows double precision")
    da = spec.d ** spec.a
    half = 2.0 ** (n - 1) * h
    integral = da / h ** m * half ** (m + 1) * 2 ** m * mean_norm_unit_cube(m)
    lattice = None
    if 2 ** (m * n) <= EXACT_SUM_LIMIT:
        lattice = h * da * _lattice_norm_sum(m, n)
    return CentralizedCost(lattice, integral)


def hierarchical_cost_recurrence(spec: ArraySpec) -> float:
    """C(n) = 2^m (C(n-1) + 2^{n-2} h sqrt(m) (2^{m(n-1)} d)^alpha), C(0) = 0."""
    if spec.n > 64:
        raise Unsupported("recurrence evaluated for n <= 64 only")
    m, h, a = spec.m, spec.h, spec.a
    root_m = math.sqrt(m)
    da = spec.d ** a
    c = 0.0
    for k in range(1, spec.n + 1):
        capacity = 2.0 ** (m * (k - 1) * a) * da
        c = 2 ** m * (c + 2.0 ** (k - 2) * h * root_m * capacity)
    return c


def hierarchical_cost_closed_form(spec: ArraySpec) -> float:
    """Closed-form solution of the hierarchical recurrence.

    Away from the critical exponent the geometric factor
    (2^{(m alpha+1) n} - 2^{mn}) / (2^{m alpha+1} - 2^m) is evaluated as
    2^{m(n-1)} expm1(n x) / expm1(x), x = (m alpha + 1 - m) ln 2, which is
    the same quantity without cancellation near the critical value.
    """
    m, n, h, a = spec.m, spec.n, spec.h, spec.a
    if n == 0:
        return 0.0
    da = spec.d ** a
    if is_critical(m, spec.alpha):
        return math.sqrt(m) * da * h / 2.0 * 2.0 ** (m * n) * n
    x = (m * a + 1 - m) * math.log(2.0)
    geom = 2.0 ** (m * (n - 1)) * math.expm1(n * x) / math.expm1(x)
    return 2.0 ** (m - 1) * math.sqrt(m) * da * h * geom


SUB, CRIT, SUPER = "sub-critical", "critical", "super-critical"
GROWTH = {
    SUB: "d^alpha h 2^{mn}",
    CRIT: "d^{1-1/m} h 2^{mn} n",
    SUPER: "d^alpha h 2^{(m alpha+1)n}",
}


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    dominant_growth: str
    critical_alpha: Exponent


def classify_regime(m: int, alpha) -> RegimeReport:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    alpha = as_exponent(alpha)
    crit = 1 - Fraction(1, m)
    if is_critical(m, alpha):
        regime = CRIT
    elif (alpha < crit) if isinstance(alpha, Fraction) else (alpha < float(crit)):
        regime = SUB
    else:
        regime = SUPER
    return RegimeReport(regime, GROWTH[regime], crit)


VERDICTS = {SUB: "geometric", CRIT: "n-linear", SUPER: "bounded"}


@dataclass(frozen=True)
class SweepResult:
    m: int
    alpha: Exponent
    costs: tuple[float, ...]
    verdict: str
    difference_ratio: float | None
    regime: RegimeReport


def irrigability_sweep(m: int, alpha, n_max: int, ratio_tol: float = 1e-6) -> SweepResult:
    """C(n) for n = 0..n_max with h = 2^{-n}, d = 2^{-mn}.

    The verdict comes from the ratio of the last two increments of C:
    below one the sequence is bounded, one means n-linear growth, above
    one geometric growth.
    """
    if not 0 <= n_max <= 30:
        raise Unsupported(f"n_max must be in 0..30, got {n_max}")
    alpha = as_exponent(alpha)
    costs = tuple(
        hierarchical_cost_closed_form(ArraySpec(m, n, 2.0 ** -n, 2.0 ** (-m * n), alpha))
        for n in range(n_max + 1))
    regime = classify_regime(m, alpha)
    q = None
    if n_max >= 3:
        q = (costs[-1] - costs[-2]) / (costs[-2] - costs[-3])
        if q < 1 - ratio_tol:
            verdict = "bounded"
        elif q > 1 + ratio_tol:
            verdict = "geometric"
        else:
            verdict = "n-linear"
    else:
        verdict = VERDICTS[regime.regime]
    return SweepResult(m, alpha, costs, verdict, q, regime)


def sweep_rows(m: int, alpha, n_max: int, h: float = 1.0, d: float = 1.0):
    """Rows (n, centralized, recurrence, closed form, regime) at fixed h, d."""
    regime = classify_regime(m, alpha).regime
    for n in range(n_max + 1):
        spec = ArraySpec(m, n, h, d, alpha)
        yield (n, centralized_cost(spec).value, hierarchical_cost_recurrence(spec),
               hierarchical_cost_closed_form(spec), regime)


# --- branched trees -----------------------------------------------------


@dataclass(frozen=True)
class BranchedTree:
    """Transport tree; terminals are nodes[:len(degrees)], branch points follow.

    An edge (u, v, f) carries flow f > 0 from u to v; the net inflow at a
    terminal equals its degree and vanishes at branch points.
    """

    nodes: tuple[Point, ...]
    degrees: tuple[int, ...]
    edges: tuple[tuple[int, int, float], ...]
    alpha: Exponent
    cost: float

    def to_dict(self) -> dict:
        alpha = self.alpha
        return {
            "nodes": [list(p.coords) for p in self.nodes],
            "degrees": list(self.degrees),
            "edges": [{"u": u, "v": v, "flow": f} for u, v, f in self.edges],
            "alpha": str(alpha) if isinstance(alpha, Fraction) else alpha,
            "cost": self.cost,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BranchedTree":
        return cls(
            tuple(Point(tuple(p)) for p in data["nodes"]),
            tuple(int(d) for d in data["degrees"]),
            tuple((int(e["u"]), int(e["v"]), float(e["flow"])) for e in data["edges"]),
            as_exponent(data["alpha"]),
            float(data["cost"]),
        )

    @property
    def max_flow(self) -> float:
        return max((f for _, _, f in self.edges), default=0.0)


def tree_cost(tree: BranchedTree) -> float:
    """Recompute sum |flow|^alpha * length, checking Kirchhoff's law."""
    n = len(tree.nodes)
    net = np.zeros(n)
    for u, v, f in tree.edges:
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise InvalidTree(f"bad edge ({u}, {v})")
        if not f > 0:
            raise InvalidTree(f"edge ({u}, {v}) has non-positive flow {f}")
        net[v] += f
        net[u] -= f
    want = np.zeros(n)
    want[: len(tree.degrees)] = tree.degrees
    bad = np.abs(net - want) > 1e-9
    if bad.any():
        k = int(np.argmax(bad))
        raise InvalidTree(f"node {k} has net inflow {net[k]}, expected {want[k]}")
    a = float(tree.alpha)
    return math.fsum(f ** a * math.dist(tree.nodes[u].coords, tree.nodes[v].coords)
                     for u, v, f in tree.edges)


@functools.lru_cache(maxsize=None)
def full_topologies(k: int) -> tuple[np.ndarray, np.ndarray]:
    """All full Steiner topologies on k >= 3 terminals.

    Terminals are nodes 0..k-1 and branch points k..2k-3. Returns the edge
    arrays (T, 2k-3, 2) and, for every edge, the boolean mask of nodes on
    its second endpoint's side (T, 2k-3, 2k-2).
    """
    if k < 3:
        raise ValueError("full topologies need at least 3 terminals")
    trees = [[(0, k), (1, k), (2, k)]]
    for t in range(3, k):
        s = k + t - 2
        grown = []
        for edges in trees:
            for idx, (a, b) in enumerate(edges):
                new = edges[:idx] + [(a, s), (s, b), (t, s)] + edges[idx + 1:]
                grown.append(new)
        trees = grown
    n_nodes = 2 * k - 2
    edges = np.array(trees, dtype=np.int64)
    sides = np.zeros(edges.shape[:2] + (n_nodes,), dtype=bool)
    for ti, tree in enumerate(trees):
        adj = [[] for _ in range(n_nodes)]
        for a, b in tree:
            adj[a].append(b)
            adj[b].append(a)
        for ei, (a, b) in enumerate(tree):
            stack, seen = [b], {a, b}
            while stack:
                x = stack.pop()
                sides[ti, ei, x] = True
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
    return edges, sides


def _costs(X, edges, w):
    T = np.arange(X.shape[0])[:, None]
    diff = X[T, edges[..., 1]] - X[T, edges[..., 0]]
    lengths = np.sqrt((diff ** 2).sum(-1))
    return (w * lengths).sum(-1), lengths


def _labels(contracted, edges, n_nodes):
    """Cluster representative (smallest node index) along contracted edges."""
    T = contracted.shape[0]
    lab = np.broadcast_to(np.arange(n_nodes), (T, n_nodes)).copy()
    rows = np.arange(T)
    for _ in range(n_nodes):
        changed = False
        for e in range(edges.shape[1]):
            u, v = edges[:, e, 0], edges[:, e, 1]
            c = contracted[:, e]
            lu, lv = lab[rows, u], lab[rows, v]
            low = np.minimum(lu, lv)
            upd = c & (lu != lv)
            if upd.any():
                changed = True
                for old in (lu, lv):
                    hit = upd[:, None] & (lab == old[:, None])
                    lab[hit] = np.broadcast_to(low[:, None], lab.shape)[hit]
        if not changed:
            break
    return lab


def _mm_step(X, edges, w, contracted, lab, k, mu_scale=1e-12, quadratic=False):
    """One majorize-minimize step for all branch points jointly.

    |z| <= (|z|^2 + l^2) / (2 l) with l the current length; the quadratic
    surrogate is minimized by a weighted-Laplacian solve. Nodes in a
    contracted cluster share the cluster representative's position.
    """
    T, E = w.shape
    N = X.shape[1]
    S = N - k
    rows = np.arange(T)
    _, lengths = _costs(X, edges, w)
    active = (~contracted) & (w > 0) & (lengths > 0)
    if quadratic:
        c = np.where(~contracted, w, 0.0)
    else:
        c = np.where(active, w / np.where(lengths > 0, lengths, 1.0), 0.0)
    A = np.zeros((T, S, S))
    B = np.zeros((T, S, X.shape[2]))
    for e in range(E):
        ru = lab[rows, edges[:, e, 0]]
        rv = lab[rows, edges[:, e, 1]]
        ce = c[:, e]
        for r1, r2 in ((ru, rv), (rv, ru)):
            free = (r1 >= k) & (ce > 0)
            if not free.any():
                continue
            t = rows[free]
            i1 = r1[free] - k
            A[t, i1, i1] += ce[free]
            other = r2[free]
            steiner = other >= k
            A[t[steiner], i1[steiner], other[steiner] - k] -= ce[free][steiner]
            B[t[~steiner], i1[~steiner]] += ce[free][~steiner, None] * X[t[~steiner], other[~steiner]]
    scale = np.maximum(c.max(axis=1), 1.0)
    for s in range(S):
        node = k + s
        rep = lab[:, node]
        is_rep = rep == node
        mu = mu_scale * scale
        A[is_rep, s, s] += mu[is_rep]
        B[is_rep, s] += mu[is_rep, None] * X[is_rep, node]
        tied = ~is_rep
        if tied.any():
            t = rows[tied]
            A[t, s, :] = 0.0
            B[t, s] = 0.0
            A[t, s, s] = 1.0
            r = rep[tied]
            steiner = r >= k
            A[t[steiner], s, r[steiner] - k] = -1.0
            B[t[~steiner], s] = X[t[~steiner], r[~steiner]]
    Y = X.copy()
    Y[:, k:] = np.linalg.solve(A, B)
    return Y


def _try_contract(X, edges, w, contracted, lab, k, cost, snap=SNAP_TOL):
    """Merge clusters joined by an edge shorter than ``snap`` if that does not raise the cost."""
    rows = np.arange(X.shape[0])
    changed = np.zeros(X.shape[0], dtype=bool)
    _, lengths = _costs(X, edges, w)
    if not ((lengths < snap) & ~contracted).any():
        return changed
    for e in range(edges.shape[1]):
        _, lengths = _costs(X, edges, w)
        lu = lab[rows, edges[:, e, 0]]
        lv = lab[rows, edges[:, e, 1]]
        cand = (~contracted[:, e]) & (lengths[:, e] < snap) & (lu != lv) & ~((lu < k) & (lv < k))
        if not cand.any():
            continue
        t = rows[cand]
        keep, move = np.minimum(lu, lv)[cand], np.maximum(lu, lv)[cand]
        X2 = X[t].copy()
        members = lab[t] == move[:, None]
        target = X2[np.arange(len(t)), keep]
        X2 = np.where(members[..., None], target[:, None, :], X2)
        new_cost, _ = _costs(X2, edges[t], w[t])
        ok = new_cost <= cost[t] + 1e-13 * (1.0 + cost[t])
        t_ok = t[ok]
        X[t_ok] = X2[ok]
        contracted[t_ok, e] = True
        lab_t = lab[t_ok]
        lab_t[lab_t == move[ok][:, None]] = np.broadcast_to(keep[ok][:, None], lab_t.shape)[
            lab_t == move[ok][:, None]]
        lab[t_ok] = lab_t
        cost[t_ok] = new_cost[ok]
        changed[t_ok] = True
    return changed


def _try_split(X, edges, w, contracted, k, cost, incident):
    """Vardi-Zhang test: pull a branch point out of its cluster when that lowers the cost."""
    rows = np.arange(X.shape[0])
    split = np.zeros(X.shape[0], dtype=bool)
    S = X.shape[1] - k
    for s in range(S):
        node = k + s
        inc = incident[:, s]                      # (T, 3) edge ids
        ends = edges[rows[:, None], inc]          # (T, 3, 2)
        nbr = np.where(ends[..., 0] == node, ends[..., 1], ends[..., 0])
        ws = w[rows[:, None], inc]
        con = contracted[rows[:, None], inc]
        cand = con.any(axis=1)
        if not cand.any():
            continue
        y = X[:, node]
        xj = X[rows[:, None], nbr]
        diff = xj - y[:, None, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        loose = (~con) & (dist > 0) & (ws > 0)
        inv = np.where(loose, ws / np.where(dist > 0, dist, 1.0), 0.0)
        R = (inv[..., None] * diff).sum(1)
        r = np.sqrt((R ** 2).sum(-1))
        eta = np.where(con, ws, 0.0).sum(1)
        go = cand & (r > eta * (1 + 1e-9)) & (inv.sum(1) > 0)
        if not go.any():
            continue
        t = rows[go]
        target = (inv[go][..., None] * xj[go]).sum(1) / inv[go].sum(1)[:, None]
        step = (1.0 - eta[go] / r[go])[:, None]
        X2 = X[t].copy()
        X2[:, node] = y[go] + step * (target - y[go])
        new_cost, _ = _costs(X2, edges[t], w[t])
        ok = new_cost < cost[t]
        t_ok = t[ok]
        X[t_ok] = X2[ok]
        cost[t_ok] = new_cost[ok]
        c_ok = contracted[t_ok]
        c_ok[np.arange(len(t_ok))[:, None], inc[t_ok]] = False
        contracted[t_ok] = c_ok
        split[t_ok] = True
    return split


def _lower_bound(X, edges, w, contracted, k, cost, hull):
    """Convexity bound  cost - eps - hull * sum_s |g_s|  over all placements.

    Every branch point of an optimum lies in the convex hull of the
    terminals, so |x_s - x_s*| <= hull. On a short or contracted edge of
    length l any z in the unit ball gives a (2 w l)-subgradient; z is
    chosen to cancel as much of the nodal gradient as possible, first
    between branch points, then against terminals.
    """
    T, E = w.shape
    rows = np.arange(T)
    diff = X[rows[:, None], edges[..., 0]] - X[rows[:, None], edges[..., 1]]
    lengths = np.sqrt((diff ** 2).sum(-1))
    free = contracted | (lengths < 1e-3 * hull)
    live = ~free & (lengths > 0)
    unit = np.where(live[..., None], w[..., None] * diff / np.where(live, lengths, 1.0)[..., None], 0.0)
    g = np.zeros_like(X)
    for e in range(E):
        np.add.at(g, (rows, edges[:, e, 0]), unit[:, e])
        np.add.at(g, (rows, edges[:, e, 1]), -unit[:, e])
    g[:, :k] = 0.0
    eps = np.where(free, 2.0 * w * lengths, 0.0).sum(1)

    def clip(v, cap):
        n = np.sqrt((v ** 2).sum(-1))
        return v * np.minimum(1.0, cap / np.where(n > 0, n, 1.0))[:, None]

    us, vs = edges[..., 0], edges[..., 1]
    for terminal_pass in (False, True):
        for e in range(E):
            u, v = us[:, e], vs[:, e]
            fe = free[:, e] & (w[:, e] > 0)
            at_term = (u < k) | (v < k)
            sel = fe & (at_term if terminal_pass else ~at_term)
            if not sel.any():
                continue
            t = rows[sel]
            gu, gv = g[t, u[sel]], g[t, v[sel]]
            cap = w[t, e]
            if terminal_pass:
                # terminal side absorbs the shift; only the branch point counts
                stein = np.where((u[sel] >= k)[:, None], gu, gv)
                shift = clip(-stein, cap)
                node = np.where(u[sel] >= k, u[sel], v[sel])
                g[t, node] = stein + shift
                continue
            best_v = np.zeros_like(gu)
            best_s = np.sqrt((gu ** 2).sum(-1)) + np.sqrt((gv ** 2).sum(-1))
            for cand in (clip(-gu, cap), clip(gv, cap)):
                score = np.sqrt(((gu + cand) ** 2).sum(-1)) + np.sqrt(((gv - cand) ** 2).sum(-1))
                better = score < best_s
                best_v[better], best_s[better] = cand[better], score[better]
            g[t, u[sel]] = gu + best_v
            g[t, v[sel]] = gv - best_v
    gsum = np.sqrt((g[:, k:] ** 2).sum(-1)).sum(1)
    return cost - eps - hull * gsum


@dataclass
class OptimizeInfo:
    topology: int
    n_topologies: int
    iterations: int
    max_increase: float
    costs: np.ndarray = field(repr=False)
    histories: list = field(default_factory=list, repr=False)


def _optimize_topologies(points: np.ndarray, degrees: np.ndarray, a: float, record: bool = False):
    k, m = points.shape
    edges, sides = full_topologies(k)
    T, E, N = sides.shape
    deg_ext = np.zeros(N)
    deg_ext[:k] = degrees
    flows = sides.astype(float) @ deg_ext
    flows = np.where(np.abs(flows) < 1e-12, 0.0, flows)
    w = np.abs(flows) ** a
    w[flows == 0] = 0.0

    incident = np.zeros((T, N - k, 3), dtype=np.int64)
    for s in range(N - k):
        hit = (edges[..., 0] == k + s) | (edges[..., 1] == k + s)
        incident[:, s] = np.argwhere(hit)[:, 1].reshape(T, 3)

    X = np.zeros((T, N, m))
    X[:, :k] = points
    contracted = np.zeros((T, E), dtype=bool)
    lab = np.broadcast_to(np.arange(N), (T, N)).copy()
    # harmonic embedding as a start: distinct branch points, inside the hull
    X = _mm_step(X, edges, np.ones((T, E)), contracted, lab, k, mu_scale=0.0, quadratic=True)
    cost, _ = _costs(X, edges, w)
    max_inc = np.zeros(T)
    histories = [[float(c)] for c in cost] if record else []
    active = np.ones(T, dtype=bool)
    hull = np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1)).max()
    # trial merges well above SNAP_TOL; the split test undoes wrong ones
    snap = max(SNAP_TOL, 1e-4 * hull)
    it = 0
    while active.any() and it < MAX_ITER:
        it += 1
        idx = np.flatnonzero(active)
        Xa = _mm_step(X[idx], edges[idx], w[idx], contracted[idx], lab[idx], k)
        new_cost, _ = _costs(Xa, edges[idx], w[idx])
        # safeguard: a near-zero edge makes the solve ill-conditioned; a
        # step that raises the cost is dropped and counts as converged
        worse = new_cost > cost[idx] + 1e-15 * (1.0 + cost[idx])
        Xa[worse], new_cost[worse] = X[idx][worse], cost[idx][worse]
        move = np.sqrt(((Xa - X[idx]) ** 2).sum(-1)).max(-1)
        max_inc[idx] = np.maximum(max_inc[idx], new_cost - cost[idx])
        X[idx], cost[idx] = Xa, new_cost
        sub_c, sub_l = contracted[idx], lab[idx]
        sub_x, sub_cost = X[idx], cost[idx]
        merged = _try_contract(sub_x, edges[idx], w[idx], sub_c, sub_l, k, sub_cost, snap)
        done = (move < MOVE_TOL) & ~merged
        if done.any():
            split = _try_split(sub_x, edges[idx], w[idx], sub_c, k, sub_cost, incident[idx])
            if split.any():
                sub_l[split] = _labels(sub_c[split], edges[idx][split], N)
            done &= ~split
        X[idx], contracted[idx], lab[idx], cost[idx] = sub_x, sub_c, sub_l, sub_cost
        if record:
            for j, t in enumerate(idx):
                histories[t].append(float(cost[t]))
        active[idx[done]] = False
        if it % 10 == 0 and active.sum() > 1:
            idx = np.flatnonzero(active)
            best = cost.min()
            lb = _lower_bound(X[idx], edges[idx], w[idx], contracted[idx], k, cost[idx], hull)
            active[idx[lb > best + 1e-9 * (1 + best)]] = False
    return edges, flows, X, contracted, lab, cost, max_inc, it, histories


def branched_optimize_detailed(config: ChargeConfig, alpha, record: bool = False):
    """Cheapest branched tree over all full topologies, plus solver diagnostics."""
    alpha = as_exponent(alpha)
    a = float(alpha)
    k = len(config)
    if k > MAX_TERMINALS:
        raise Unsupported(f"branched optimizer handles at most {MAX_TERMINALS} terminals, got {k}")
    pts = config.positions
    degs = config.degrees
    nodes = tuple(c.position for c in config.charges)
    if k == 0:
        return BranchedTree((), (), (), alpha, 0.0), OptimizeInfo(0, 0, 0, 0.0, np.zeros(0))
    if k == 2:
        u, v = (0, 1) if degs[1] > 0 else (1, 0)
        f = float(abs(degs[0]))
        tree = BranchedTree(nodes, tuple(int(d) for d in degs), ((u, v, f),), alpha, 0.0)
        tree = BranchedTree(tree.nodes, tree.degrees, tree.edges, alpha, tree_cost(tree))
        return tree, OptimizeInfo(0, 1, 0, 0.0, np.array([tree.cost]))

    edges, flows, X, contracted, lab, cost, max_inc, it, hist = _optimize_topologies(
        pts, degs.astype(float), a, record)
    best = int(np.argmin(cost))
    near = np.flatnonzero(cost <= cost[best] + 1e-12 * (1 + abs(cost[best])))
    best = int(near[0])
    tree = _extract_tree(config, X[best], edges[best], flows[best], contracted[best], lab[best], alpha)
    info = OptimizeInfo(best, len(cost), it, float(max_inc.max()), cost,
                        hist if record else [])
    return tree, info


def _extract_tree(config, X, edges, flows, contracted, lab, alpha):
    k = len(config)
    keep_nodes = list(range(k))
    index = {i: i for i in range(k)}
    out_edges = []
    for (u, v), f, con in zip(edges, flows, contracted):
        if con or f == 0:
            continue
        ru, rv = int(lab[u]), int(lab[v])
        for r in (ru, rv):
            if r not in index:
                index[r] = len(keep_nodes)
                keep_nodes.append(r)
        a, b = index[ru], index[rv]
        out_edges.append((a, b, float(f)) if f > 0 else (b, a, float(-f)))
    nodes = tuple(config.charges[i].position if i < k else Point(tuple(X[i])) for i in keep_nodes)
    tree = BranchedTree(nodes, tuple(int(d) for d in config.degrees), tuple(out_edges), alpha, 0.0)
    return BranchedTree(nodes, tree.degrees, tree.edges, alpha, tree_cost(tree))


def branched_optimize(config: ChargeConfig, alpha) -> BranchedTree:
    return branched_optimize_detailed(config, alpha)[0]
