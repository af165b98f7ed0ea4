"""Relaxed W^{1,1} energy of a discretized map into S^1.

E(u) = int |Du| + 2 pi * (cheapest transport connecting the singularities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degree import GridMap, SingularitySet, boundary_degree, detect_singularities, p_energy
from .duality import KAPPA, LipschitzField, dual_functional, kantorovich_dual
from .errors import BoundaryChargeImbalance
from .geometry import ChargeConfig, validate_config
from .transport import FlowPlan, min_cost_transport


@dataclass(frozen=True)
class RelaxedEnergyReport:
    dirichlet: float
    transport: float
    total: float
    singularities: SingularitySet
    plan: FlowPlan

    def to_dict(self) -> dict:
        return {
            "dirichlet": self.dirichlet,
            "transport": self.transport,
            "total": self.total,
            "singularities": [{"pos": list(p.coords), "deg": d} for p, d in self.singularities.entries],
            "plan": self.plan.to_dict(),
        }


def singularity_config(gm: GridMap) -> tuple[SingularitySet, ChargeConfig]:
    sing = detect_singularities(gm)
    total = sing.total_degree()
    if total != 0 or boundary_degree(gm) != 0:
        raise BoundaryChargeImbalance(
            f"boundary degree {boundary_degree(gm)} (detected total {total}); "
            "charges would have to be connected to the boundary")
    return sing, validate_config(sing.as_charges(), dim=2)


def relaxed_energy(gm: GridMap) -> RelaxedEnergyReport:
    sing, config = singularity_config(gm)
    dirichlet = p_energy(gm, 1.0)
    plan = min_cost_transport(config)
    total = dirichlet + 2 * math.pi * plan.cost
    assert total >= dirichlet
    return RelaxedEnergyReport(dirichlet, plan.cost, total, sing, plan)


def optimal_dual_field(gm: GridMap, config: ChargeConfig) -> np.ndarray:
    """Extended optimal prices sampled on the grid, capped at max f_i.

    The cap keeps phi 1-Lipschitz and equal to f_i at the sites, and makes
    it constant near the grid border once the border is farther than the
    price spread from every site, which removes the boundary flux term.
    """
    if not len(config):
        return np.zeros((gm.nx, gm.ny))
    _, potential = kantorovich_dual(config)
    X, Y = gm.node_coords()
    phi = LipschitzField(config, potential).on_grid(X, Y)
    return np.minimum(phi, max(potential.values))


def dual_check_sides(gm: GridMap) -> tuple[float, float]:
    """(grid dual functional at the optimal prices, KAPPA * transport cost)."""
    _, config = singularity_config(gm)
    plan = min_cost_transport(config)
    return dual_functional(gm, optimal_dual_field(gm, config)), KAPPA * plan.cost


def relaxed_energy_dual_check(gm: GridMap) -> float:
    """Relative gap between the dual functional and KAPPA * transport.

    Absolute difference when the map has no singularities.
    """
    functional, expected = dual_check_sides(gm)
    if expected == 0.0:
        return abs(functional)
    return abs(functional - expected) / expected
