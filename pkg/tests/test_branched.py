import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from conftest import random_config
from oracles import merged_grid_search, steiner_oracle
from topocharge.branched import (ArraySpec, BranchedTree, branched_optimize,
                                 branched_optimize_detailed, as_exponent, centralized_cost,
                                 classify_regime, full_topologies, hierarchical_cost_closed_form,
                                 hierarchical_cost_recurrence, irrigability_sweep,
                                 mean_norm_unit_cube, sweep_rows, tree_cost)
from topocharge.errors import InvalidExponent, InvalidTree, OverflowGuard, Unsupported
from topocharge.geometry import Point, validate_config
from topocharge.transport import min_cost_transport

CLUSTER = [(0.0, 0.0), (0.0, 0.1), (10.0, 0.0), (10.0, 0.1)]
CLUSTER_CFG = validate_config(list(zip(CLUSTER, [1, 1, -1, -1])))


def reference_closed_form(m, n, h, d, alpha):
    """Closed form at 60 digits, written as in the two-branch formula."""
    mpmath.mp.dps = 60
    m_, a = mpmath.mpf(m), mpmath.mpf(alpha.numerator) / alpha.denominator \
        if isinstance(alpha, Fraction) else mpmath.mpf(alpha)
    pre = mpmath.sqrt(m_) * mpmath.mpf(d) ** a * h
    if m_ * a + 1 - m_ == 0:
        return pre / 2 * mpmath.mpf(2) ** (m * n) * n
    num = mpmath.mpf(2) ** ((m_ * a + 1) * n) - mpmath.mpf(2) ** (m * n)
    den = mpmath.mpf(2) ** (m_ * a + 1) - mpmath.mpf(2) ** m
    return mpmath.mpf(2) ** (m - 1) * pre * num / den


# --- exponents and regimes ------------------------------------------------

def test_exponent_parsing():
    assert as_exponent("3/4") == Fraction(3, 4)
    assert as_exponent(1) == Fraction(1)
    assert as_exponent(0.5) == 0.5
    for bad in (0, -0.1, 1.5, "0/1"):
        with pytest.raises(InvalidExponent):
            as_exponent(bad)


def test_regime_examples():
    assert classify_regime(4, Fraction(3, 4)).regime == "critical"
    assert classify_regime(2, 1).regime == "super-critical"
    assert classify_regime(3, Fraction(1, 2)).regime == "sub-critical"
    assert classify_regime(2, 0.5).regime == "critical"
    assert classify_regime(3, 2 / 3).regime == "critical"      # float within the window
    assert classify_regime(3, Fraction(2, 3) + Fraction(1, 10 ** 15)).regime == "super-critical"
    assert classify_regime(2, 0.5).dominant_growth == "d^{1-1/m} h 2^{mn} n"


# --- centralized and hierarchical costs ---------------------------------------

def test_centralized_examples():
    assert centralized_cost(ArraySpec(2, 0)).value == 0.0
    assert centralized_cost(ArraySpec(1, 1, 1.0, 1.0, 1)).value == 1.0
    costs = [centralized_cost(ArraySpec(2, n, 1.0, 1.0, 1)).value for n in range(4, 10)]
    for a, b in zip(costs, costs[1:]):
        assert abs(b / a - 8) / 8 < 0.03


@pytest.mark.parametrize("m,n", [(1, 2), (2, 2), (3, 1), (3, 2), (2, 3)])
def test_lattice_sum_brute_force(m, n):
    side = 2 ** n
    ticks = [t - side / 2 + 0.5 for t in range(side)]
    brute = math.fsum(math.sqrt(sum(c * c for c in k)) for k in itertools.product(ticks, repeat=m))
    h, d, a = 0.3, 2.0, Fraction(1, 2)
    lat = centralized_cost(ArraySpec(m, n, h, d, a)).lattice
    assert lat == pytest.approx(h * d ** 0.5 * brute, rel=1e-13)


def test_mean_norm_unit_cube():
    # closed forms: E|U| on [-1,1]: 1/2; on [-1,1]^2: (sqrt 2 + asinh 1)/3
    assert mean_norm_unit_cube(1) == pytest.approx(0.5, abs=1e-10)
    assert mean_norm_unit_cube(2) == pytest.approx((math.sqrt(2) + math.asinh(1)) / 3, abs=1e-10)
    rng = np.random.default_rng(1)
    u = rng.uniform(-1, 1, size=(400_000, 4))
    assert mean_norm_unit_cube(4) == pytest.approx(np.linalg.norm(u, axis=1).mean(), rel=3e-3)


def test_centralized_integral_tracks_lattice():
    c = centralized_cost(ArraySpec(2, 9, 1.0, 1.0, 1))
    assert abs(c.integral - c.lattice) / c.lattice < 1e-5


def test_centralized_guards():
    c = centralized_cost(ArraySpec(3, 9))           # 2^27 points: integral only
    assert c.lattice is None and c.value == c.integral
    with pytest.raises(OverflowGuard):
        centralized_cost(ArraySpec(8, 150))


def test_recurrence_examples():
    assert hierarchical_cost_recurrence(ArraySpec(2, 0)) == 0.0
    assert hierarchical_cost_recurrence(ArraySpec(2, 1, 1.0, 1.0, 1)) == pytest.approx(
        2 * math.sqrt(2), rel=1e-15)
    for spec in (ArraySpec(3, 5, 1.0, 1.0, Fraction(2, 3)), ArraySpec(4, 7, 0.5, 3.0, "3/4"),
                 ArraySpec(2, 10, 1.0, 1.0, 1)):
        r, c = hierarchical_cost_recurrence(spec), hierarchical_cost_closed_form(spec)
        assert abs(r - c) <= 1e-12 * r
    assert hierarchical_cost_closed_form(ArraySpec(4, 0, alpha="3/4")) == 0.0
    with pytest.raises(Unsupported):
        hierarchical_cost_recurrence(ArraySpec(2, 65))


@pytest.mark.parametrize("m", range(1, 7))
def test_closed_form_against_high_precision(m):
    alphas = [0.25, 0.5, Fraction(m - 1, m), 0.9, 1]
    for a in alphas:
        if a == 0:
            continue
        for n in (1, 2, 7, 19, 30):
            want = reference_closed_form(m, n, 0.7, 1.3, a)
            got = hierarchical_cost_closed_form(ArraySpec(m, n, 0.7, 1.3, a))
            assert abs(got - float(want)) <= 1e-13 * float(want)


def test_near_critical_float_is_stable():
    # just outside the window both branches would lose digits in the plain formula
    a = 0.5 + 1e-9
    got = hierarchical_cost_closed_form(ArraySpec(2, 20, 1.0, 1.0, a))
    want = float(reference_closed_form(2, 20, 1.0, 1.0, a))
    assert abs(got - want) <= 1e-12 * want


def test_hierarchical_beats_centralized():
    ratios = []
    for n in range(3, 9):
        spec = ArraySpec(2, n, 1.0, 1.0, 0.5)
        ratios.append(hierarchical_cost_closed_form(spec) / centralized_cost(spec).value)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.5
    for n in range(1, 12):
        spec = ArraySpec(2, n, 1.0, 1.0, 1)
        assert 0.5 <= hierarchical_cost_closed_form(spec) / centralized_cost(spec).value <= 2


def test_sweep_examples():
    sup = irrigability_sweep(2, 0.9, 30)
    assert sup.verdict == "bounded" and sup.costs[-1] - sup.costs[-2] < 1e-3 * sup.costs[-1]
    crit = irrigability_sweep(2, Fraction(1, 2), 30)
    diffs = np.diff(crit.costs)
    assert crit.verdict == "n-linear" and abs(diffs[-1] / diffs[-10] - 1) < 0.05
    sub = irrigability_sweep(2, 0.3, 30)
    rho = 2 ** (2 * 0.7 - 1)
    assert sub.verdict == "geometric"
    assert abs(sub.costs[-1] / sub.costs[-2] - rho) / rho < 0.02
    with pytest.raises(Unsupported):
        irrigability_sweep(2, 0.5, 31)


def test_sweep_rows():
    rows = list(sweep_rows(2, "1/2", 4))
    assert [r[0] for r in rows] == [0, 1, 2, 3, 4]
    assert all(r[4] == "critical" for r in rows)
    assert all(abs(r[2] - r[3]) <= 1e-12 * max(1, r[2]) for r in rows)


# --- trees ------------------------------------------------------------------

def test_tree_cost_examples():
    tree = BranchedTree((Point((0, 0)), Point((3, 0))), (-2, 2), ((0, 1, 2.0),), Fraction(3, 4), 0)
    assert tree_cost(tree) == pytest.approx(2 ** 0.75 * 3, rel=1e-15)
    b1, b2 = np.array([0.5, 0.05]), np.array([9.5, 0.05])
    pts = [np.array(p) for p in CLUSTER]
    nodes = tuple(Point(tuple(p)) for p in pts + [b1, b2])
    # sources a1, a2 (degree +1 receive flow in this convention): flow from sinks
    edges = ((2, 5, 1.0), (3, 5, 1.0), (5, 4, 2.0), (4, 0, 1.0), (4, 1, 1.0))
    merged = BranchedTree(nodes, (1, 1, -1, -1), edges, 0.5, 0)
    d = np.linalg.norm
    want = (d(pts[0] - b1) + d(pts[1] - b1) + 2 ** 0.5 * d(b2 - b1)
            + d(b2 - pts[2]) + d(b2 - pts[3]))
    assert tree_cost(merged) == pytest.approx(want, rel=1e-14)


def test_tree_cost_rejects_bad_flow():
    nodes = (Point((0, 0)), Point((1, 0)))
    with pytest.raises(InvalidTree):
        tree_cost(BranchedTree(nodes, (1, -1), ((0, 1, 1.0),), 1, 0))
    with pytest.raises(InvalidTree):
        tree_cost(BranchedTree(nodes, (1, -1), ((1, 0, 2.0),), 1, 0))


def test_matching_tree_equals_transport():
    cfg = validate_config([((0, 0), 1), ((4, 0), -1), ((0, 2), -1), ((5, 5), 1)])
    plan = min_cost_transport(cfg)
    tree = BranchedTree(tuple(c.position for c in cfg.charges), tuple(cfg.degrees.tolist()),
                        plan.edges, 1, 0)
    assert tree_cost(tree) == pytest.approx(plan.cost, rel=1e-14)


@pytest.mark.parametrize("k", [3, 4, 5, 6])
def test_topology_enumeration(k):
    edges, sides = full_topologies(k)
    count = math.prod(range(1, 2 * k - 4, 2))
    assert edges.shape == (count, 2 * k - 3, 2)
    splits = set()
    for tree, side in zip(edges, sides):
        deg = np.bincount(tree.ravel(), minlength=2 * k - 2)
        assert (deg[:k] == 1).all() and (deg[k:] == 3).all()
        # a tree is identified by the terminal bipartitions of its edges
        # (the side not containing terminal 0, so both orientations agree)
        key = frozenset(frozenset(np.flatnonzero(s[:k] != s[0]).tolist()) for s in side)
        splits.add(key)
    assert len(splits) == count


def test_subadditivity():
    for a in (0.25, 0.5, 0.75, 0.99):
        for d1, d2 in ((1, 1), (1, 2), (2, 3), (5, 7)):
            assert (d1 + d2) ** a < d1 ** a + d2 ** a


def test_two_terminals():
    cfg = validate_config([((0, 0), 1), ((3, 4), -1)])
    tree = branched_optimize(cfg, 0.5)
    assert tree.cost == 5.0 and len(tree.edges) == 1


def test_empty_and_bounds():
    assert branched_optimize(validate_config([]), 1).cost == 0.0
    ten = validate_config([((i, i * i), 1 if i % 2 else -1) for i in range(10)])
    with pytest.raises(Unsupported):
        branched_optimize(ten, 0.5)
    with pytest.raises(InvalidExponent):
        branched_optimize(CLUSTER_CFG, 0)


def test_clustered_merge():
    tree, info = branched_optimize_detailed(CLUSTER_CFG, 0.5)
    oracle = merged_grid_search(CLUSTER, 0.5)
    assert tree.max_flow == 2.0
    assert tree.cost < min_cost_transport(CLUSTER_CFG).cost
    assert abs(tree.cost - oracle) <= 0.005 * oracle
    assert tree.cost == pytest.approx(tree_cost(tree), rel=1e-14)


def test_four_point_alpha_one_is_a_pairing():
    cfg = validate_config([((0, 0), 1), ((1, 0.2), 1), ((0.1, 1), -1), ((1.3, 1.1), -1)])
    tree = branched_optimize(cfg, 1)
    assert tree.cost >= min_cost_transport(cfg).cost - 1e-8
    assert tree.cost == pytest.approx(min_cost_transport(cfg).cost, rel=1e-7)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 1.0])
def test_small_instances_against_direct_minimization(rng, alpha):
    for _ in range(4):
        cfg = random_config(rng, n_max=4, max_deg=2, scale=3.0)
        if len(cfg) < 3:
            continue
        got = branched_optimize(cfg, alpha).cost
        want = steiner_oracle(cfg.positions, cfg.degrees.tolist(), alpha)
        assert got <= want * (1 + 1e-7) + 1e-9
        assert got >= want * (1 - 1e-6)


def test_alpha_one_never_beats_transport(rng):
    for _ in range(8):
        cfg = random_config(rng, n_max=5, max_deg=3)
        cost = min_cost_transport(cfg).cost
        assert branched_optimize(cfg, 1).cost >= cost - 1e-8


def test_monotone_histories(rng):
    cfg = random_config(rng, n_max=5, max_deg=2)
    while len(cfg) < 5:
        cfg = random_config(rng, n_max=5, max_deg=2)
    _, info = branched_optimize_detailed(cfg, 0.6, record=True)
    assert info.histories
    for hist in info.histories:
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
    assert info.max_increase <= 1e-12


def test_tree_dict_round_trip():
    tree = branched_optimize(CLUSTER_CFG, "1/2")
    back = BranchedTree.from_dict(tree.to_dict())
    assert back == tree
