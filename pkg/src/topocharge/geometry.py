"""Point charges in R^m and the metric they are transported under."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicatePosition,
    InvalidPoint,
    RemovableCharge,
    TopologicalImbalance,
)

MAX_DIM = 8


@dataclass(frozen=True)
class Point:
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not 1 <= len(coords) <= MAX_DIM:
            raise InvalidPoint(f"dimension {len(coords)} outside 1..{MAX_DIM}")
        if not all(math.isfinite(c) for c in coords):
            raise InvalidPoint(f"non-finite coordinate in {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def as_point(p) -> Point:
    return p if isinstance(p, Point) else Point(tuple(p))


def euclidean_distance(p, q) -> float:
    p, q = as_point(p), as_point(q)
    if p.dim != q.dim:
        raise DimensionMismatch(f"points of dimension {p.dim} and {q.dim}")
    # math.dist is symmetric bit-for-bit: it squares the coordinate differences
    return math.dist(p.coords, q.coords)


@dataclass(frozen=True)
class Charge:
    position: Point
    degree: int


@dataclass(frozen=True)
class ChargeConfig:
    """Ordered, validated set of point singularities with zero total degree.

    Build instances through :func:`validate_config`; the constructor itself
    does not check the invariants.
    """

    charges: tuple[Charge, ...]
    dim: int = 2

    def __len__(self):
        return len(self.charges)

    @property
    def positions(self) -> np.ndarray:
        if not self.charges:
            return np.zeros((0, self.dim))
        return np.array([c.position.coords for c in self.charges])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([c.degree for c in self.charges], dtype=np.int64)

    def distance_matrix(self) -> np.ndarray:
        n = len(self.charges)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = euclidean_distance(
                    self.charges[i].position, self.charges[j].position
                )
        return out

    def total_variation(self) -> int:
        return int(sum(abs(c.degree) for c in self.charges))

    def transformed(self, scale=1.0, shift=None, flip=False) -> "ChargeConfig":
        """Return the config with positions mapped to scale*x + shift."""
        shift = np.zeros(self.dim) if shift is None else np.asarray(shift, float)
        out = []
        for c in self.charges:
            pos = Point(tuple(scale * c.position.as_array() + shift))
            out.append((pos.coords, -c.degree if flip else c.degree))
        return validate_config(out, dim=self.dim)


def _parse_degree(deg) -> int:
    if isinstance(deg, bool):
        raise TypeError("degree must be an integer")
    if isinstance(deg, float):
        if not deg.is_integer():
            raise TypeError(f"degree {deg} is not an integer")
        deg = int(deg)
    return int(deg)


def validate_config(raw: Iterable, dim: int | None = None) -> ChargeConfig:
    """Validate raw charges and return a :class:`ChargeConfig`.

    ``raw`` is an iterable of ``Charge`` objects, ``(position, degree)``
    pairs, or ``{"pos": [...], "deg": k}`` mappings. Nothing is merged or
    dropped: zero degrees, coincident positions and a nonzero total degree
    are all errors.
    """
    charges = []
    for item in raw:
        if isinstance(item, Charge):
            pos, deg = item.position, item.degree
        elif isinstance(item, dict):
            pos, deg = item["pos"], item["deg"]
        else:
            pos, deg = item
        pos = as_point(pos)
        deg = _parse_degree(deg)
        if deg == 0:
            raise RemovableCharge(f"charge at {pos.coords} has degree 0")
        charges.append(Charge(pos, deg))

    dims = {c.position.dim for c in charges}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    if charges:
        found = dims.pop()
        if dim is not None and dim != found:
            raise DimensionMismatch(f"expected dimension {dim}, got {found}")
        dim = found
    elif dim is None:
        dim = 2

    seen = {}
    for idx, c in enumerate(charges):
        if c.position.coords in seen:
            raise DuplicatePosition(
                f"charges {seen[c.position.coords]} and {idx} share position {c.position.coords}"
            )
        seen[c.position.coords] = idx

    total = sum(c.degree for c in charges)
    if total != 0:
        raise TopologicalImbalance(f"total degree is {total}, expected 0")
    return ChargeConfig(tuple(charges), dim)


def config_to_records(config: ChargeConfig) -> list[dict]:
    return [{"pos": list(c.position.coords), "deg": c.degree} for c in config.charges]


def config_to_json(config: ChargeConfig) -> str:
    from .serialize import dumps

    return dumps(config_to_records(config))


def config_from_json(text: str) -> ChargeConfig:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("charge config JSON must be an array")
    return validate_config(data)


def unit_split(config: ChargeConfig) -> tuple[list[int], list[int]]:
    """Expand each charge into |degree| unit terminals.

    Returns the charge index of every negative unit and every positive unit.
    """
    neg, pos = [], []
    for idx, c in enumerate(config.charges):
        (pos if c.degree > 0 else neg).extend([idx] * abs(c.degree))
    return neg, pos


def pairwise(points: Sequence) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
