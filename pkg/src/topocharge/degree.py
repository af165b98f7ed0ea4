"""Winding numbers and singularities of sampled circle-valued maps.

Degrees are computed by summing wrapped angle increments between
neighbouring samples. The increment from ``v`` to ``w`` is
``atan2(v x w, v . w)``, which lies in (-pi, pi] and is exactly
antisymmetric, so sums over closed loops are multiples of 2 pi up to
rounding and edges shared by two plaquettes cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidGridMap, Unsupported, UnderResolvedLoop
from .geometry import Point
from .serialize import csv_line, fmt_float

NORM_TOL = 1e-9
STEP_MARGIN = 1e-6
INTEGER_TOL = 1e-6


def _check_unit(values: np.ndarray, what: str):
    norms = np.hypot(values[..., 0], values[..., 1])
    bad = ~(np.abs(norms - 1.0) <= NORM_TOL)
    if bad.any():
        idx = tuple(int(k) for k in np.argwhere(bad)[0])
        raise InvalidGridMap(f"{what} value at {idx} has norm {norms[idx]!r}")


def angle_increment(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Signed angle from unit vectors ``v`` to ``w``, in (-pi, pi]."""
    cross = v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
    dot = v[..., 0] * w[..., 0] + v[..., 1] * w[..., 1]
    return np.arctan2(cross, dot)


def _check_resolution(steps: np.ndarray, where: str):
    bad = np.abs(steps) >= math.pi - STEP_MARGIN
    if bad.any():
        idx = tuple(int(k) for k in np.argwhere(bad)[0])
        raise UnderResolvedLoop(f"{where}: angle step {steps[idx]!r} at {idx} is not below pi")


def _to_integer(total: float, where: str) -> int:
    k = round(total / (2 * math.pi))
    if abs(total - 2 * math.pi * k) > INTEGER_TOL:
        raise UnderResolvedLoop(f"{where}: angle sum {total!r} is not a multiple of 2 pi")
    return int(k)


@dataclass(frozen=True)
class LoopSamples:
    """Samples of a closed loop u(theta_k) in S^1, theta_k uniform on [0, 2 pi)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != 2:
            raise InvalidGridMap(f"loop samples must have shape (K, 2), got {vals.shape}")
        if vals.shape[0] < 3:
            raise InvalidGridMap("a loop needs at least 3 samples")
        _check_unit(vals, "loop")
        object.__setattr__(self, "values", vals)

    @property
    def count(self) -> int:
        return self.values.shape[0]


def winding_number(loop) -> int:
    """Degree of a sampled closed loop into the circle.

    Raises UnderResolvedLoop if two consecutive samples are (almost)
    antipodal, since then the direction of rotation is ambiguous.
    """
    if not isinstance(loop, LoopSamples):
        loop = LoopSamples(loop)
    v = loop.values
    steps = angle_increment(v, np.roll(v, -1, axis=0))
    _check_resolution(steps, "loop")
    return _to_integer(math.fsum(steps), "loop")


def kronecker_index(samples, dim: int = 2) -> int:
    """Kronecker index of a sampled sphere map S^{m-1} -> S^{m-1}.

    Only the circle case is supported, where the index is the winding number.
    """
    if dim != 2:
        raise Unsupported(f"Kronecker index only implemented for m = 2, got m = {dim}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2 and samples.shape[1] != 2:
        raise Unsupported(f"samples of dimension {samples.shape[1]} are not circle-valued")
    return winding_number(samples)


@dataclass(frozen=True)
class GridMap:
    """Unit-vector field sampled at nodes ``origin + (i h, j h)``.

    ``values`` has shape (nx, ny, 2); axis 0 is the first coordinate. Masked
    nodes are excluded from every computation and their values are reset
    to zero.
    """

    nx: int
    ny: int
    h: float
    origin: tuple[float, float]
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        nx, ny = int(self.nx), int(self.ny)
        if nx < 2 or ny < 2:
            raise InvalidGridMap(f"grid must be at least 2x2, got {nx}x{ny}")
        h = float(self.h)
        if not (h > 0 and math.isfinite(h)):
            raise InvalidGridMap(f"spacing must be positive, got {self.h!r}")
        origin = tuple(float(c) for c in self.origin)
        if len(origin) != 2 or not all(math.isfinite(c) for c in origin):
            raise InvalidGridMap(f"origin must be a finite 2-vector, got {self.origin!r}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (nx, ny, 2):
            raise InvalidGridMap(f"values shape {vals.shape} != {(nx, ny, 2)}")
        if self.mask is None:
            mask = np.zeros((nx, ny), dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != (nx, ny):
                raise InvalidGridMap(f"mask shape {mask.shape} != {(nx, ny)}")
        vals[mask] = 0.0
        _check_unit(vals[~mask], "grid")
        vals.setflags(write=False)
        mask.setflags(write=False)
        for name, value in (("nx", nx), ("ny", ny), ("h", h), ("origin", origin),
                            ("values", vals), ("mask", mask)):
            object.__setattr__(self, name, value)

    @property
    def valid(self) -> np.ndarray:
        return ~self.mask

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def rotated(self, angle: float) -> "GridMap":
        c, s = math.cos(angle), math.sin(angle)
        u = self.values
        vals = np.stack([c * u[..., 0] - s * u[..., 1], s * u[..., 0] + c * u[..., 1]], -1)
        vals = vals / np.hypot(vals[..., 0], vals[..., 1])[..., None].clip(min=1e-300)
        return GridMap(self.nx, self.ny, self.h, self.origin, vals, self.mask)

    def same_grid(self, other: "GridMap") -> bool:
        return (self.nx, self.ny, self.h, self.origin) == (other.nx, other.ny, other.h, other.origin)


@dataclass(frozen=True)
class SingularitySet:
    entries: tuple[tuple[Point, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if any(d == 0 for _, d in self.entries):
            raise ValueError("singularity degrees must be nonzero")

    def __len__(self):
        return len(self.entries)

    def total_degree(self) -> int:
        return sum(d for _, d in self.entries)

    def as_charges(self):
        return [(p.coords, d) for p, d in self.entries]


def _edge_increments(gm: GridMap):
    """Angle increments along x-edges (nx-1, ny) and y-edges (nx, ny-1).

    Edges touching a masked node get increment 0 and are flagged invalid.
    """
    u, ok = gm.values, gm.valid
    ok_x = ok[:-1, :] & ok[1:, :]
    ok_y = ok[:, :-1] & ok[:, 1:]
    inc_x = np.where(ok_x, angle_increment(u[:-1, :], u[1:, :]), 0.0)
    inc_y = np.where(ok_y, angle_increment(u[:, :-1], u[:, 1:]), 0.0)
    return inc_x, inc_y, ok_x, ok_y


def _plaquette_sums(inc_x, inc_y):
    """Counter-clockwise sum of edge increments around each plaquette."""
    return inc_x[:, :-1] + inc_y[1:, :] - inc_x[:, 1:] - inc_y[:-1, :]


def _hole_components(gm: GridMap):
    """Label the connected groups of plaquettes that touch a masked node.

    Returns (labels, count, interior) where ``interior[k]`` tells whether
    component k+1 stays away from the grid border.
    """
    m = gm.mask
    touched = m[:-1, :-1] | m[1:, :-1] | m[:-1, 1:] | m[1:, 1:]
    labels, count = ndimage.label(touched)
    border = set(np.unique(np.concatenate(
        [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])).tolist())
    interior = [k not in border for k in range(1, count + 1)]
    return touched, labels, count, interior


def detect_singularities(gm: GridMap) -> SingularitySet:
    """Locate the nonzero-degree plaquettes and masked holes of a grid map.

    Plaquettes with four unmasked corners are reported at their centre.
    Groups of plaquettes touching masked nodes that are enclosed by
    unmasked nodes are reported as a single entry at the centroid of the
    group, with the degree of the loop around it.
    """
    inc_x, inc_y, ok_x, ok_y = _edge_increments(gm)
    _check_resolution(np.where(ok_x, inc_x, 0.0), "x-edge")
    _check_resolution(np.where(ok_y, inc_y, 0.0), "y-edge")
    sums = _plaquette_sums(inc_x, inc_y)
    touched, labels, count, interior = _hole_components(gm)

    h, (ox, oy) = gm.h, gm.origin
    entries = []
    full = ~touched
    k = np.rint(sums / (2 * math.pi))
    off = np.abs(sums - 2 * math.pi * k) > INTEGER_TOL
    if (off & full).any():
        idx = tuple(int(t) for t in np.argwhere(off & full)[0])
        raise UnderResolvedLoop(f"plaquette {idx} angle sum is not a multiple of 2 pi")
    for i, j in np.argwhere(full & (k != 0)):
        center = Point((ox + (i + 0.5) * h, oy + (j + 0.5) * h))
        entries.append((center, int(k[i, j])))

    for lab in range(1, count + 1):
        if not interior[lab - 1]:
            continue
        sel = labels == lab
        deg = _to_integer(math.fsum(sums[sel]), f"hole {lab}")
        if deg == 0:
            continue
        ii, jj = np.nonzero(sel)
        center = Point((ox + (ii.mean() + 0.5) * h, oy + (jj.mean() + 0.5) * h))
        entries.append((center, deg))
    entries.sort(key=lambda e: (e[0].coords[0], e[0].coords[1]))
    return SingularitySet(tuple(entries))


def border_loop(gm: GridMap) -> np.ndarray:
    """Samples along the grid border, counter-clockwise from node (0, 0)."""
    u = gm.values
    path = np.concatenate([
        u[:-1, 0],
        u[-1, :-1],
        u[:0:-1, -1],
        u[0, :0:-1],
    ])
    return path


def boundary_degree(gm: GridMap) -> int:
    """Degree of the outer boundary of the unmasked region.

    Obtained from the border edges of the grid minus the contribution of
    masked regions that reach the border, so it never relies on the
    per-plaquette degrees.
    """
    inc_x, inc_y, ok_x, ok_y = _edge_increments(gm)
    total = math.fsum(np.concatenate([
        inc_x[:, 0], inc_y[-1, :], -inc_x[:, -1], -inc_y[0, :]]))
    if gm.mask.any():
        sums = _plaquette_sums(inc_x, inc_y)
        _, labels, count, interior = _hole_components(gm)
        for lab in range(1, count + 1):
            if not interior[lab - 1]:
                total -= math.fsum(sums[labels == lab])
    return _to_integer(total, "boundary")


def _lifted_gradient(gm: GridMap):
    """Gradient of the local angle lift at every node (zero at masked nodes)."""
    inc_x, inc_y, ok_x, ok_y = _edge_increments(gm)
    gx = _stencil(inc_x, ok_x, gm.h, axis=0)
    gy = _stencil(inc_y, ok_y, gm.h, axis=1)
    gx[gm.mask] = 0.0
    gy[gm.mask] = 0.0
    return gx, gy


def _stencil(diff: np.ndarray, ok: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Central differences where both neighbours exist, one-sided otherwise.

    ``diff`` holds the forward differences along ``axis`` on the edges,
    ``ok`` whether each edge is usable.
    """
    diff = np.moveaxis(diff, axis, 0)
    ok = np.moveaxis(ok, axis, 0)
    n = diff.shape[0] + 1
    shape = (n,) + diff.shape[1:]
    fwd = np.zeros(shape)
    bwd = np.zeros(shape)
    has_f = np.zeros(shape, dtype=bool)
    has_b = np.zeros(shape, dtype=bool)
    fwd[:-1], has_f[:-1] = diff, ok
    bwd[1:], has_b[1:] = diff, ok
    both = has_f & has_b
    out = np.where(both, 0.5 * (fwd + bwd), np.where(has_f, fwd, np.where(has_b, bwd, 0.0))) / h
    return np.moveaxis(out, 0, axis)


def _component_gradient(gm: GridMap, comp: np.ndarray):
    """Finite-difference gradient of a scalar node field with the same stencils."""
    ok = gm.valid
    ok_x = ok[:-1, :] & ok[1:, :]
    ok_y = ok[:, :-1] & ok[:, 1:]
    dx = np.where(ok_x, comp[1:, :] - comp[:-1, :], 0.0)
    dy = np.where(ok_y, comp[:, 1:] - comp[:, :-1], 0.0)
    gx = _stencil(dx, ok_x, gm.h, axis=0)
    gy = _stencil(dy, ok_y, gm.h, axis=1)
    gx[gm.mask] = 0.0
    gy[gm.mask] = 0.0
    return gx, gy


def gradient_norm(gm: GridMap) -> np.ndarray:
    """|Du| at each node, via the locally unwrapped angle."""
    gx, gy = _lifted_gradient(gm)
    return np.hypot(gx, gy)


def p_energy(gm: GridMap, p: float) -> float:
    """Discrete p-Dirichlet energy, sum over unmasked nodes of h^2 |Du|^p."""
    p = float(p)
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"p must be finite and >= 1, got {p!r}")
    g = gradient_norm(gm)[gm.valid]
    return math.fsum((gm.h ** 2) * g ** p)


def unit_field(theta: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def gridmap_to_csv(gm: GridMap) -> str:
    lines = [csv_line([gm.nx, gm.ny, gm.h, gm.origin[0], gm.origin[1]])]
    u, m = gm.values, gm.mask
    for i in range(gm.nx):
        for j in range(gm.ny):
            lines.append(f"{i},{j},{fmt_float(u[i, j, 0])},{fmt_float(u[i, j, 1])},{int(m[i, j])}")
    return "\n".join(lines) + "\n"


def gridmap_from_csv(text: str) -> GridMap:
    """Parse the GridMap CSV format.

    The first line carries ``nx,ny,h,ox,oy``; a literal line of those
    column names (and an ``i,j,ux,uy,masked`` line) may precede the data.
    """
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if rows and rows[0].replace(" ", "") == "nx,ny,h,ox,oy":
        rows = rows[1:]
    if not rows:
        raise InvalidGridMap("empty grid file")
    head = rows[0].split(",")
    if len(head) != 5:
        raise InvalidGridMap(f"header must have 5 fields, got {rows[0]!r}")
    try:
        nx, ny = int(head[0]), int(head[1])
        h, ox, oy = float(head[2]), float(head[3]), float(head[4])
    except ValueError as exc:
        raise InvalidGridMap(f"bad header {rows[0]!r}") from exc
    body = rows[1:]
    if body and body[0].replace(" ", "") == "i,j,ux,uy,masked":
        body = body[1:]
    if len(body) != nx * ny:
        raise InvalidGridMap(f"expected {nx * ny} rows, got {len(body)}")
    vals = np.zeros((nx, ny, 2))
    mask = np.zeros((nx, ny), dtype=bool)
    seen = np.zeros((nx, ny), dtype=bool)
    for ln in body:
        parts = ln.split(",")
        if len(parts) != 5:
            raise InvalidGridMap(f"bad row {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            ux, uy, mk = float(parts[2]), float(parts[3]), int(parts[4])
        except ValueError as exc:
            raise InvalidGridMap(f"bad row {ln!r}") from exc
        if not (0 <= i < nx and 0 <= j < ny) or seen[i, j] or mk not in (0, 1):
            raise InvalidGridMap(f"bad or duplicate row {ln!r}")
        seen[i, j] = True
        vals[i, j] = (ux, uy)
        mask[i, j] = bool(mk)
    return GridMap(nx, ny, h, (ox, oy), vals, mask)
