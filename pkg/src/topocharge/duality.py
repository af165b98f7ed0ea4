"""Kantorovich dual of the charge transport problem.

The dual is  sup { sum_i f_i d_i : f_i - f_j <= |a_i - a_j| },  i.e. a
1-Lipschitz price on the charge sites. Optimal prices are read off the
node potentials of the primal solver, so every primal plan comes with a
matching certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degree import GridMap, _component_gradient
from .errors import GridMismatch, InfeasiblePotential
from .geometry import ChargeConfig, as_point
from .transport import _assignment

FEAS_TOL = 1e-9

# Ratio between the grid integral of (u ^ Du) ^ D(phi) and sum_i phi(a_i) d_i.
# Integration by parts gives 2 pi (curl of the lifted phase gradient is
# 2 pi sum_i d_i delta_{a_i}); scripts/calibrate_kappa.py checks it numerically.
KAPPA = 2.0 * math.pi


@dataclass(frozen=True)
class Potential:
    values: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def max_violation(config: ChargeConfig, potential: Potential) -> float:
    f = potential.as_array()
    if f.shape != (len(config),):
        raise InfeasiblePotential(f"potential has {f.size} values for {len(config)} charges")
    if len(config) < 2:
        return 0.0
    excess = np.abs(f[:, None] - f[None, :]) - config.distance_matrix()
    return float(excess.max())


def is_feasible(config: ChargeConfig, potential: Potential, tol: float = FEAS_TOL) -> bool:
    return max_violation(config, potential) <= tol


def dual_value(config: ChargeConfig, potential: Potential) -> float:
    return math.fsum(f * d for f, d in zip(potential.values, config.degrees.tolist()))


def kantorovich_dual(config: ChargeConfig) -> tuple[float, Potential]:
    """Optimal dual value and prices, recovered from the assignment solver.

    Each site gets the Lipschitz extension of the negative-unit potentials,
    f(x) = min_u (pi_u + |x - a_u|); this is 1-Lipschitz everywhere and its
    dual value equals the primal cost. Prices are shifted so the smallest
    is zero.
    """
    plan, neg, pot = _assignment(config)
    n = len(config)
    if n == 0:
        return 0.0, Potential(())
    dist = config.distance_matrix()
    f = np.array([min(p + dist[site, u_site] for p, u_site in zip(pot, neg)) for site in range(n)])
    f -= f.min()
    potential = Potential(tuple(float(v) for v in f))
    viol = max_violation(config, potential)
    if viol > FEAS_TOL * (1.0 + float(dist.max())):
        raise InfeasiblePotential(f"recovered prices violate the Lipschitz bound by {viol}")
    return dual_value(config, potential), potential


def duality_gap(config: ChargeConfig) -> float:
    plan = _assignment(config)[0]
    value, _ = kantorovich_dual(config)
    return plan.cost - value


@dataclass(frozen=True)
class LipschitzField:
    """phi(x) = min_i (f_i + |x - a_i|), the 1-Lipschitz extension of the prices."""

    config: ChargeConfig
    potential: Potential

    def __post_init__(self):
        viol = max_violation(self.config, self.potential)
        if viol > FEAS_TOL:
            raise InfeasiblePotential(f"prices violate the Lipschitz bound by {viol}")

    def __call__(self, x) -> float:
        x = np.asarray(as_point(x).coords)
        if x.shape != (self.config.dim,):
            raise GridMismatch(f"point of dimension {x.size} for a {self.config.dim}-d config")
        if not len(self.config):
            return 0.0
        d = np.sqrt(((self.config.positions - x) ** 2).sum(axis=1))
        return float(np.min(self.potential.as_array() + d))

    def on_grid(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        out = np.full(X.shape, np.inf)
        for (ax, ay), f in zip(self.config.positions, self.potential.values):
            np.minimum(out, f + np.hypot(X - ax, Y - ay), out=out)
        return out


def lipschitz_extend(config: ChargeConfig, potential: Potential, x) -> float:
    return LipschitzField(config, potential)(x)


def dual_functional(gm: GridMap, phi: np.ndarray) -> float:
    """Grid integral of (u ^ Du) ^ D(phi).

    Uses the raw components of u and the same difference stencils as the
    energy; masked nodes contribute nothing.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (gm.nx, gm.ny):
        raise GridMismatch(f"phi shape {phi.shape} != grid {(gm.nx, gm.ny)}")
    u1, u2 = gm.values[..., 0], gm.values[..., 1]
    d1u1, d2u1 = _component_gradient(gm, u1)
    d1u2, d2u2 = _component_gradient(gm, u2)
    d1p, d2p = _component_gradient(gm, phi)
    integrand = (u1 * d1u2 * d2p - u2 * d1u1 * d2p
                 - u1 * d2u2 * d1p + u2 * d2u1 * d1p)
    return math.fsum((gm.h ** 2 * integrand[gm.valid]).ravel())
