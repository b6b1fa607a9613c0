"""Discrete 2D grid geometry: world/grid transforms, ray casting, field-of-view projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    return a - math.pi


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a top-down grid: size in cells, metres per cell, world origin.

    Cells are addressed as ``(col, row)``; column 0 / row 0 sit at the origin
    corner and columns grow with world x, rows with world y.
    """

    width: int
    height: int
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.resolution > 0.0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")

    def contains(self, cell: tuple[int, int]) -> bool:
        col, row = cell
        return 0 <= col < self.width and 0 <= row < self.height

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        col, row = cell
        return (
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        )


@dataclass(frozen=True)
class Pose:
    """Planar robot pose: world position in metres plus heading in [-pi, pi)."""

    position: tuple[float, float]
    heading: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class FovSpec:
    """Horizontal field of view, maximum sensing range, and ray discretisation."""

    horizontal_fov: float
    max_range: float
    ray_count: int = 181

    def __post_init__(self) -> None:
        if not 0.0 < self.horizontal_fov < TWO_PI:
            raise ValueError(f"horizontal_fov must be in (0, 2*pi), got {self.horizontal_fov}")
        if not self.max_range > 0.0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")
        if self.ray_count < 3:
            raise ValueError(f"ray_count must be at least 3, got {self.ray_count}")


@dataclass(frozen=True)
class VisibleCell:
    """One grid cell seen from a pose: bearing off the optical axis, range, hit flag."""

    cell: tuple[int, int]
    bearing: float
    range_m: float
    terminal: bool


def world_to_grid(point: tuple[float, float], spec: GridSpec) -> tuple[int, int] | None:
    """Map a world point to its ``(col, row)`` cell, or None when outside the grid."""
    col = math.floor((point[0] - spec.origin[0]) / spec.resolution)
    row = math.floor((point[1] - spec.origin[1]) / spec.resolution)
    if 0 <= col < spec.width and 0 <= row < spec.height:
        return (int(col), int(row))
    return None


def grid_to_world(cell: tuple[int, int], spec: GridSpec) -> tuple[float, float]:
    """Centre of a cell in world coordinates."""
    return spec.cell_center(cell)


def fov_bearings(fov: FovSpec) -> list[float]:
    """Ray bearings spanning [-fov/2, +fov/2], endpoint-exact, axis-exact for odd counts."""
    n = fov.ray_count
    half = fov.horizontal_fov / 2.0
    step = fov.horizontal_fov / (n - 1)
    out = [-half + k * step for k in range(n)]
    out[-1] = half
    if n % 2 == 1:
        out[(n - 1) // 2] = 0.0
    return out


def _trace_ray(
    px: float,
    py: float,
    dx: float,
    dy: float,
    spec: GridSpec,
    occupied: bytes | None,
    max_range: float,
) -> tuple[list[tuple[int, int, float]], bool]:
    """Walk the cells a ray crosses, one axis step at a time.

    Starts at world point (px, py) and excludes the starting cell. Each entry
    is (col, row, distance at which the ray enters the cell). Stops at the
    first occupied cell (included, second return value True), at max_range, or
    at the grid boundary. Stepping never moves diagonally in a single hop, so
    one-cell-thick obstacles cannot be jumped; exact corner ties advance the
    x axis first.
    """
    res = spec.resolution
    ox, oy = spec.origin
    w = spec.width
    h = spec.height
    cx = math.floor((px - ox) / res)
    cy = math.floor((py - oy) / res)

    if dx > 0.0:
        step_x = 1
        t_max_x = (ox + (cx + 1) * res - px) / dx
        t_dx = res / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (ox + cx * res - px) / dx
        t_dx = -res / dx
    else:
        step_x = 0
        t_max_x = math.inf
        t_dx = math.inf
    if dy > 0.0:
        step_y = 1
        t_max_y = (oy + (cy + 1) * res - py) / dy
        t_dy = res / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (oy + cy * res - py) / dy
        t_dy = -res / dy
    else:
        step_y = 0
        t_max_y = math.inf
        t_dy = math.inf

    cells: list[tuple[int, int, float]] = []
    while True:
        if t_max_x <= t_max_y:
            t = t_max_x
            cx += step_x
            t_max_x += t_dx
        else:
            t = t_max_y
            cy += step_y
            t_max_y += t_dy
        if t > max_range:
            return cells, False
        if not (0 <= cx < w and 0 <= cy < h):
            return cells, False
        cells.append((cx, cy, t))
        if occupied is not None and occupied[cy * w + cx]:
            return cells, True


def raycast(
    origin: Pose,
    bearing: float,
    occ,
    fov: FovSpec,
) -> tuple[list[tuple[int, int]], bool]:
    """Cells crossed by one ray from a pose, in visit order, with a hit flag.

    The ray points along ``origin.heading + bearing`` and excludes the pose's
    own cell. It stops at the first occupied cell of ``occ`` (included, flag
    True), at ``fov.max_range``, or where it leaves the grid.

    Raises ValueError when the pose lies outside the grid.
    """
    spec = occ.spec
    if world_to_grid(origin.position, spec) is None:
        raise ValueError(f"raycast origin {origin.position} is outside the grid")
    angle = origin.heading + bearing
    occ_bytes = np.ascontiguousarray(occ.occupied_mask).tobytes()
    traced, terminal = _trace_ray(
        origin.position[0],
        origin.position[1],
        math.cos(angle),
        math.sin(angle),
        spec,
        occ_bytes,
        fov.max_range,
    )
    return [(c, r) for c, r, _ in traced], terminal


def focal_cone(origin: Pose, occ, fov: FovSpec) -> list[VisibleCell]:
    """Project the field of view onto the grid with per-ray occlusion.

    Casts ``fov.ray_count`` rays spanning [-fov/2, +fov/2] around the pose
    heading and merges them into one visible set. A cell crossed by several
    rays keeps the bearing/range of the ray closest to the optical axis
    (exact |bearing| ties keep the negative side). Occupied cells are flagged
    terminal; nothing behind them is visible. The result is sorted by
    (row, col) so identical inputs give identical output.

    Raises ValueError when the pose lies outside the grid.
    """
    spec = occ.spec
    if world_to_grid(origin.position, spec) is None:
        raise ValueError(f"focal_cone origin {origin.position} is outside the grid")
    occ_bytes = np.ascontiguousarray(occ.occupied_mask).tobytes()
    px, py = origin.position
    heading = origin.heading
    max_range = fov.max_range
    best: dict[tuple[int, int], tuple[float, float, bool]] = {}

    for b in fov_bearings(fov):
        angle = heading + b
        traced, terminal = _trace_ray(
            px, py, math.cos(angle), math.sin(angle), spec, occ_bytes, max_range
        )
        if not traced:
            continue
        last = len(traced) - 1
        abs_b = abs(b)
        for i, (cx, cy, t) in enumerate(traced):
            key = (cx, cy)
            prev = best.get(key)
            if prev is None or abs_b < abs(prev[0]) or (abs_b == abs(prev[0]) and b < prev[0]):
                best[key] = (b, t, terminal and i == last)

    return [
        VisibleCell(cell=cell, bearing=b, range_m=t, terminal=term)
        for cell, (b, t, term) in sorted(best.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    ]


def swept_cells(
    start: tuple[float, float],
    end: tuple[float, float],
    spec: GridSpec,
) -> tuple[list[tuple[int, int]], bool]:
    """Cells entered when moving in a straight line from start to end.

    Excludes the starting cell. The second return value is True when the
    segment leaves the grid before reaching ``end``.
    """
    dx = end[0] - start[0]
    dy = end[1] - start[1]
    dist = math.hypot(dx, dy)
    exited = world_to_grid(end, spec) is None
    if dist == 0.0:
        return [], exited
    traced, _ = _trace_ray(start[0], start[1], dx / dist, dy / dist, spec, None, dist)
    return [(c, r) for c, r, _ in traced], exited


def line_of_sight(
    start: tuple[float, float],
    end: tuple[float, float],
    occ,
) -> bool:
    """True when no occupied cell blocks the straight segment between two points.

    The cells containing the endpoints themselves do not block.
    """
    spec = occ.spec
    cells, exited = swept_cells(start, end, spec)
    if exited:
        return False
    end_cell = world_to_grid(end, spec)
    mask = occ.occupied_mask
    for col, row in cells:
        if (col, row) == end_cell:
            continue
        if mask[row, col]:
            return False
    return True
