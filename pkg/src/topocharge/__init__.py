"""Topological charges of circle-valued maps and their transport costs."""

from .branched import (ArraySpec, BranchedTree, branched_optimize, centralized_cost,
                       classify_regime, hierarchical_cost_closed_form,
                       hierarchical_cost_recurrence, irrigability_sweep, tree_cost)
from .degree import (GridMap, SingularitySet, boundary_degree, detect_singularities,
                     gridmap_from_csv, gridmap_to_csv, kronecker_index, p_energy,
                     winding_number)
from .duality import KAPPA, LipschitzField, dual_functional, kantorovich_dual, lipschitz_extend
from .errors import TopoChargeError
from .geometry import (Charge, ChargeConfig, Point, config_from_json, config_to_json,
                       euclidean_distance, validate_config)
from .relaxed import RelaxedEnergyReport, relaxed_energy, relaxed_energy_dual_check
from .transport import FlowPlan, lp_relaxation_optimum, min_cost_transport

__version__ = "0.1.0"
