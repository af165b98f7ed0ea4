"""Refinement study for the dual-functional constant KAPPA.

For the unit-separation vortex pair, compare the grid integral of
(u ^ Du) ^ D(phi) at the optimal extended prices with the transport
cost, at increasing resolution. The ratio should approach 2 pi.

    python3 scripts/calibrate_kappa.py --grids 128 256 512
"""

import argparse
import math

from topocharge.duality import dual_functional
from topocharge.fixtures import vortex_pair
from topocharge.relaxed import optimal_dual_field, singularity_config
from topocharge.transport import min_cost_transport


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[128, 256, 512])
    args = ap.parse_args()
    print("grid,functional,transport,ratio,ratio_over_2pi")
    for n in args.grids:
        gm = vortex_pair(n=n)
        _, config = singularity_config(gm)
        cost = min_cost_transport(config).cost
        f = dual_functional(gm, optimal_dual_field(gm, config))
        print(f"{n},{f:.10g},{cost:.10g},{f / cost:.10g},{f / cost / (2 * math.pi):.6f}")


if __name__ == "__main__":
    main()
