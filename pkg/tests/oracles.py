"""Reference computations used only by the tests."""

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def _tree_value(pts, degs, alpha, steiner, pairs):
    """Cost of a 3- or 4-terminal star/H tree with explicit branch points."""
    c = lambda f: abs(f) ** alpha
    if len(pts) == 3:
        s = steiner[0]
        return sum(c(d) * np.linalg.norm(p - s) for p, d in zip(pts, degs))
    (i, j), (k, l) = pairs
    s1, s2 = steiner
    total = c(degs[i]) * np.linalg.norm(pts[i] - s1) + c(degs[j]) * np.linalg.norm(pts[j] - s1)
    total += c(degs[k]) * np.linalg.norm(pts[k] - s2) + c(degs[l]) * np.linalg.norm(pts[l] - s2)
    total += c(degs[i] + degs[j]) * np.linalg.norm(s1 - s2)
    return total


def steiner_oracle(points, degrees, alpha):
    """Minimum over full topologies for 3 or 4 terminals by direct minimization."""
    pts = [np.asarray(p, dtype=float) for p in points]
    degs = list(degrees)
    k = len(pts)
    if k == 3:
        layouts = [None]
    elif k == 4:
        layouts = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
    else:
        raise ValueError("oracle handles 3 or 4 terminals")
    centre = np.mean(pts, axis=0)
    best = math.inf
    for pairs in layouts:
        n_s = 1 if k == 3 else 2

        def f(z):
            return _tree_value(pts, degs, alpha, z.reshape(n_s, 2), pairs)

        starts = [np.tile(centre, n_s)] + [np.concatenate(
            [pts[p], pts[q]]) if n_s == 2 else pts[p] for p, q in itertools.combinations(range(k), 2)]
        for z0 in starts:
            res = minimize(f, np.asarray(z0, dtype=float).ravel()[: 2 * n_s], method="Nelder-Mead",
                           options={"xatol": 1e-11, "fatol": 1e-13, "maxiter": 40000,
                                    "maxfev": 40000})
            best = min(best, res.fun)
    return best


def merged_grid_search(points, alpha, size=201, zooms=6):
    """Symmetric merged plan for the clustered 4-terminal instance.

    Sources a1, a2 near x = 0 and sinks a3, a4 their mirror images about
    x = 5: scan the first branch point b1 on a size x size grid over the
    bounding box of the left pair and the midline, put b2 at its mirror
    image, then zoom in around the best cell.
    """
    a1, a2, a3, a4 = (np.asarray(p, dtype=float) for p in points)
    mid = 0.5 * (a1[0] + a3[0])

    def cost(bx, by):
        b1 = np.stack([bx, by], -1)
        b2 = np.stack([2 * mid - bx, by], -1)
        return (np.linalg.norm(a1 - b1, axis=-1) + np.linalg.norm(a2 - b1, axis=-1)
                + 2 ** alpha * np.linalg.norm(b2 - b1, axis=-1)
                + np.linalg.norm(a3 - b2, axis=-1) + np.linalg.norm(a4 - b2, axis=-1))

    x_lo, x_hi = min(a1[0], a2[0]), mid
    y_lo, y_hi = min(a1[1], a2[1]), max(a1[1], a2[1])
    best = math.inf
    for _ in range(zooms):
        xs = np.linspace(x_lo, x_hi, size)
        ys = np.linspace(y_lo, y_hi, size)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        C = cost(X, Y)
        i, j = np.unravel_index(np.argmin(C), C.shape)
        best = min(best, float(C[i, j]))
        dx, dy = (x_hi - x_lo) / (size - 1), (y_hi - y_lo) / (size - 1)
        x_lo, x_hi = xs[i] - 2 * dx, xs[i] + 2 * dx
        y_lo, y_hi = ys[j] - 2 * dy, ys[j] + 2 * dy
    return best
