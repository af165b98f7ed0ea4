"""Analytic test maps and charge arrays.

Vortex fixtures use the argument of a product of complex monomials,
theta(x) = sum_k d_k * angle(x - a_k), so the degree around a_k is d_k.
Grids are laid out so that node coordinates sit at half-integer multiples
of h: a vortex placed on a multiple of h then falls on a plaquette centre.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .degree import GridMap, unit_field
from .errors import InvalidGridMap
from .geometry import ChargeConfig, validate_config

FIXTURE_KINDS = ("single_vortex", "vortex_pair", "vortex_square", "constant", "dyadic_array")


def centered_grid(n: int, half_width: float):
    """Square n x n grid covering [-half_width, half_width]^2 by cells."""
    h = 2.0 * half_width / n
    origin = (-half_width + 0.5 * h, -half_width + 0.5 * h)
    return h, origin


def vortex_map(charges, n: int = 256, half_width: float = 1.0, eps: float = 0.0,
               disk: float | None = None) -> GridMap:
    """Grid map with prescribed vortices.

    charges: iterable of ((x, y), degree). Nodes closer than ``eps`` to a
    vortex, and nodes outside the centred disk of radius ``disk`` when
    given, are masked.
    """
    h, origin = centered_grid(n, half_width)
    x = origin[0] + h * np.arange(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    theta = np.zeros_like(X)
    mask = np.zeros(X.shape, dtype=bool)
    for (ax, ay), deg in charges:
        r = np.hypot(X - ax, Y - ay)
        theta += deg * np.arctan2(Y - ay, X - ax)
        mask |= r <= eps
        mask |= r == 0.0
    if disk is not None:
        mask |= np.hypot(X, Y) > disk
    return GridMap(n, n, h, origin, unit_field(theta), mask)


def single_vortex(n: int = 256, half_width: float = 1.0, eps: float = 0.0,
                  disk: float | None = None, degree: int = 1) -> GridMap:
    """u(x) = x/|x| (raised to ``degree``) centred at the origin."""
    return vortex_map([((0.0, 0.0), degree)], n, half_width, eps, disk)


def vortex_pair(n: int = 512, half_width: float = 2.0, separation: float = 1.0,
                eps: float = 0.0) -> GridMap:
    s = 0.5 * separation
    return vortex_map([((-s, 0.0), 1), ((s, 0.0), -1)], n, half_width, eps)


def vortex_square(n: int = 512, half_width: float = 2.0, side: float = 1.0,
                  eps: float = 0.0) -> GridMap:
    """+1 at (0,0) and (s,s), -1 at (s,0) and (0,s), shifted to centre the square."""
    c = 0.5 * side
    charges = [((-c, -c), 1), ((c, c), 1), ((c, -c), -1), ((-c, c), -1)]
    return vortex_map(charges, n, half_width, eps)


def constant_map(n: int = 64, half_width: float = 1.0, angle: float = 0.0) -> GridMap:
    h, origin = centered_grid(n, half_width)
    theta = np.full((n, n), float(angle))
    return GridMap(n, n, h, origin, unit_field(theta))


def dyadic_array(m: int, n: int, h: float = 1.0, d: int = 1) -> ChargeConfig:
    """2^{mn} sources of degree d on a cubic lattice, sink at the centre.

    Sources sit at h*k for k in {-2^{n-1}+1/2, ..., 2^{n-1}-1/2}^m. For
    n = 0 the only source coincides with the sink and the config is empty.
    """
    if m < 1 or n < 0 or h <= 0 or d < 1:
        raise InvalidGridMap(f"bad dyadic array parameters m={m} n={n} h={h} d={d}")
    if n == 0:
        return validate_config([], dim=m)
    side = 2 ** n
    ticks = [h * (t - side / 2 + 0.5) for t in range(side)]
    raw = [(pt, d) for pt in itertools.product(ticks, repeat=m)]
    raw.append(((0.0,) * m, -d * side ** m))
    return validate_config(raw, dim=m)


def generate_fixture(kind: str, **params):
    """Dispatch by fixture name; returns a GridMap or ChargeConfig."""
    if kind == "single_vortex":
        return single_vortex(**params)
    if kind == "vortex_pair":
        return vortex_pair(**params)
    if kind == "vortex_square":
        return vortex_square(**params)
    if kind == "constant":
        return constant_map(**params)
    if kind == "dyadic_array":
        return dyadic_array(**params)
    raise ValueError(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")


def circle_loop(center, radius: float, theta_fn, count: int = 256) -> np.ndarray:
    """Sample ``theta_fn(x, y)`` on a circle and return the unit vectors."""
    t = 2 * math.pi * np.arange(count) / count
    x = center[0] + radius * np.cos(t)
    y = center[1] + radius * np.sin(t)
    return unit_field(theta_fn(x, y))
