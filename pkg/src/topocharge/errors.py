"""Exception types raised by the library.

Every error carries a short machine name (used by the CLI when it reports
failures as JSON) and a human readable detail string.
"""


class TopoChargeError(Exception):
    """Base class for all domain errors."""

    name = "TopoChargeError"

    def __init__(self, detail=""):
        super().__init__(detail)
        self.detail = detail


class DimensionMismatch(TopoChargeError):
    name = "DimensionMismatch"


class InvalidPoint(TopoChargeError):
    name = "InvalidPoint"


class TopologicalImbalance(TopoChargeError):
    name = "TopologicalImbalance"


class DuplicatePosition(TopoChargeError):
    name = "DuplicatePosition"


class RemovableCharge(TopoChargeError):
    name = "RemovableCharge"


class UnderResolvedLoop(TopoChargeError):
    name = "UnderResolvedLoop"


class InvalidGridMap(TopoChargeError):
    name = "InvalidGridMap"


class GridMismatch(TopoChargeError):
    name = "GridMismatch"


class Unsupported(TopoChargeError):
    name = "Unsupported"


class InfeasiblePotential(TopoChargeError):
    name = "InfeasiblePotential"


class BoundaryChargeImbalance(TopoChargeError):
    name = "BoundaryChargeImbalance"


class InvalidTree(TopoChargeError):
    name = "InvalidTree"


class InvalidExponent(TopoChargeError):
    name = "InvalidExponent"


class OverflowGuard(TopoChargeError):
    name = "OverflowGuard"
