"""Minimum-cost transport of integer charges under Euclidean cost.

The problem is

    minimize   sum_ij b_ij |a_i - a_j|
    subject to sum_i (b_ij - b_ji) = d_j,  b_ij >= 0,

so flow runs from negative-degree sites into positive-degree sites. It is
solved as an assignment between unit-split negative and positive
terminals by successive shortest paths with node potentials.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import Unsupported
from .geometry import ChargeConfig, unit_split

INF = float("inf")


class MinCostFlow:
    """Successive shortest paths with Dijkstra on reduced costs.

    Arc costs must be nonnegative. Capacities may be ``math.inf``. After
    :meth:`solve` the attribute ``potential`` holds node potentials with
    nonnegative reduced cost on every residual arc.
    """

    def __init__(self, n: int):
        self.n = n
        self.graph: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []
        self.potential = [0.0] * n

    def add_arc(self, u: int, v: int, cap: float, cost: float) -> int:
        if cost < 0:
            raise ValueError("arc costs must be nonnegative")
        idx = len(self.to)
        self.graph[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.graph[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0.0)
        self.cost.append(-cost)
        return idx

    def flow_on(self, arc: int) -> float:
        return self.cap[arc ^ 1]

    def _dijkstra(self, s: int):
        dist = [INF] * self.n
        prev = [-1] * self.n
        dist[s] = 0.0
        heap = [(0.0, s)]
        pot = self.potential
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for a in self.graph[u]:
                if self.cap[a] <= 0:
                    continue
                v = self.to[a]
                # clamp at 0: reduced costs are >= 0 up to rounding
                nd = d + max(self.cost[a] + pot[u] - pot[v], 0.0)
                if nd < dist[v]:
                    dist[v] = nd
                    prev[v] = a
                    heapq.heappush(heap, (nd, v))
        return dist, prev

    def solve(self, s: int, t: int, amount: float) -> float:
        """Send ``amount`` units from s to t at minimum cost; return the cost."""
        sent, total = 0.0, 0.0
        while sent < amount:
            dist, prev = self._dijkstra(s)
            if dist[t] == INF:
                raise ValueError("demand cannot be routed")
            far = max(d for d in dist if d < INF)
            for v in range(self.n):
                self.potential[v] += dist[v] if dist[v] < INF else far
            push = amount - sent
            v = t
            while v != s:
                a = prev[v]
                push = min(push, self.cap[a])
                v = self.to[a ^ 1]
            v = t
            while v != s:
                a = prev[v]
                self.cap[a] -= push
                self.cap[a ^ 1] += push
                total += push * self.cost[a]
                v = self.to[a ^ 1]
            sent += push
        return total


@dataclass(frozen=True)
class FlowPlan:
    """Transport plan: ``edges`` holds (i, j, b_ij) with flow from i to j."""

    edges: tuple[tuple[int, int, float], ...]
    cost: float

    def to_dict(self) -> dict:
        return {"edges": [{"i": i, "j": j, "flow": f} for i, j, f in self.edges],
                "cost": self.cost}

    @classmethod
    def from_dict(cls, data: dict) -> "FlowPlan":
        edges = tuple((int(e["i"]), int(e["j"]), float(e["flow"])) for e in data["edges"])
        return cls(edges, float(data["cost"]))

    def divergence(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for i, j, f in self.edges:
            out[j] += f
            out[i] -= f
        return out


def plan_cost(config: ChargeConfig, edges) -> float:
    dist = config.distance_matrix()
    return math.fsum(f * dist[i, j] for i, j, f in edges)


def _assignment(config: ChargeConfig):
    """Solve the unit-split assignment; returns (plan, neg units, unit potentials)."""
    neg, pos = unit_split(config)
    if not neg:
        return FlowPlan((), 0.0), [], []
    dist = config.distance_matrix()
    a, b = len(neg), len(pos)
    s, t = 0, a + b + 1
    mcf = MinCostFlow(a + b + 2)
    for u in range(a):
        mcf.add_arc(s, 1 + u, 1.0, 0.0)
    for v in range(b):
        mcf.add_arc(1 + a + v, t, 1.0, 0.0)
    pair_arcs = {}
    for u in range(a):
        for v in range(b):
            # uncapacitated middle arcs: keeps complementary slackness exact
            pair_arcs[u, v] = mcf.add_arc(1 + u, 1 + a + v, INF, dist[neg[u], pos[v]])
    mcf.solve(s, t, float(a))

    flows: dict[tuple[int, int], float] = {}
    for (u, v), arc in pair_arcs.items():
        f = mcf.flow_on(arc)
        if f > 0:
            key = (neg[u], pos[v])
            flows[key] = flows.get(key, 0.0) + f
    edges = []
    for (i, j), f in sorted(flows.items()):
        r = round(f)
        assert abs(f - r) < 1e-9, f"non-integral flow {f}"
        edges.append((i, j, float(r)))
    plan = FlowPlan(tuple(edges), plan_cost(config, edges))
    unit_pot = [mcf.potential[1 + u] for u in range(a)]
    return plan, neg, unit_pot


def min_cost_transport(config: ChargeConfig) -> FlowPlan:
    """Optimal integral transport plan between the charges of ``config``."""
    return _assignment(config)[0]


def brute_force_transport(config: ChargeConfig) -> float:
    """Optimal cost by enumerating every unit assignment (sum |d_i| <= 10)."""
    if config.total_variation() > 10:
        raise Unsupported(f"brute force limited to sum |d_i| <= 10, got {config.total_variation()}")
    neg, pos = unit_split(config)
    if not neg:
        return 0.0
    dist = config.distance_matrix()
    best = INF
    for perm in set(itertools.permutations(pos)):
        best = min(best, math.fsum(dist[i, j] for i, j in zip(neg, perm)))
    return best


def lp_relaxation_optimum(config: ChargeConfig) -> float:
    """Optimum of the continuous LP over b_ij >= 0 (dense HiGHS solve, N <= 12)."""
    from scipy.optimize import linprog

    n = len(config)
    if n > 12:
        raise Unsupported(f"dense LP limited to N <= 12, got {n}")
    if n == 0:
        return 0.0
    dist = config.distance_matrix()
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    c = np.array([dist[i, j] for i, j in pairs])
    a_eq = np.zeros((n, len(pairs)))
    for k, (i, j) in enumerate(pairs):
        a_eq[j, k] += 1.0
        a_eq[i, k] -= 1.0
    res = linprog(c, A_eq=a_eq, b_eq=config.degrees.astype(float), bounds=(0, None),
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return float(res.fun)


def relay_transport_cost(config: ChargeConfig) -> float:
    """Min-cost flow on the complete graph over all sites, relays allowed."""
    n = len(config)
    if n == 0:
        return 0.0
    dist = config.distance_matrix()
    s, t = n, n + 1
    mcf = MinCostFlow(n + 2)
    for i in range(n):
        for j in range(n):
            if i != j:
                mcf.add_arc(i, j, INF, dist[i, j])
    supply = 0
    for i, c in enumerate(config.charges):
        if c.degree < 0:
            mcf.add_arc(s, i, float(-c.degree), 0.0)
            supply -= c.degree
        else:
            mcf.add_arc(i, t, float(c.degree), 0.0)
    return mcf.solve(s, t, float(supply))
