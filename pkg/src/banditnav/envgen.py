"""Procedural indoor environments: rooms, corridors, a target, and a relevance field.

Each environment is a walled grid of axis-aligned rooms linked by corridors.
One room holds the target; the ground-truth relevance field decays
exponentially with geodesic (wall-respecting) distance from the target, so
relevance gradients lead through doorways rather than through walls.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, Pose
from .mapping import OccupancyMap
from .sensor import SemanticField

SQRT2 = math.sqrt(2.0)

CATEGORIES = ("cup", "chair", "printer", "plant", "sink", "television")


class GenerationError(RuntimeError):
    """No valid environment could be generated within the retry budget."""


@dataclass(frozen=True)
class EnvGenConfig:
    """Knobs for the environment generator; sizes are in cells unless noted.

    Two layout families: ``rooms`` scatters tree-connected rectangular rooms;
    ``field`` surrounds the start with a large block-cluttered expanse whose
    occlusion shadows regenerate nearby frontiers almost indefinitely, while
    the target waits in a clean hall behind a doored wall. The field is the
    terrain where myopic nearest-frontier search gets stuck in narrow nearby
    pockets.
    """

    width: int = 48
    height: int = 48
    resolution: float = 0.25
    layout: str = "rooms"
    room_count: int = 6
    room_min: int = 6
    room_max: int = 11
    corridor_width: int = 2
    clutter_per_room: float = 0.0
    field_fraction: float = 0.6
    block_density: float = 0.14
    hall_count: int = 2
    door_count: int = 2
    moat_width: int = 0
    far_target: bool = False
    decay_lambda: float = 8.0
    target_size: int = 1
    min_start_target_m: float = 3.0
    max_retries: int = 100

    def __post_init__(self) -> None:
        if not isinstance(self.width, int) or not isinstance(self.height, int):
            raise ValueError(
                f"grid size must be whole cells, got {self.width!r} x {self.height!r}"
            )
        if self.width < 8 or self.height < 8:
            raise ValueError(f"grid too small for rooms: {self.width}x{self.height}")
        if not float(self.resolution) > 0.0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.layout not in ("rooms", "field", "open"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.room_count < 2:
            raise ValueError(f"need at least 2 rooms, got {self.room_count}")
        if not 2 <= self.room_min <= self.room_max:
            raise ValueError(f"bad room size range [{self.room_min}, {self.room_max}]")
        if self.corridor_width < 1:
            raise ValueError(f"corridor width must be positive, got {self.corridor_width}")
        if not 0.3 <= self.field_fraction <= 0.85:
            raise ValueError(f"field fraction out of range: {self.field_fraction}")
        if not 0.0 <= self.block_density <= 0.3:
            raise ValueError(f"block density out of range: {self.block_density}")
        if self.hall_count < 1:
            raise ValueError(f"need at least 1 hall, got {self.hall_count}")
        if self.door_count < 1:
            raise ValueError(f"need at least 1 door, got {self.door_count}")
        if not self.decay_lambda > 0.0:
            raise ValueError(f"decay lambda must be positive, got {self.decay_lambda}")
        if self.target_size < 1:
            raise ValueError(f"target size must be positive, got {self.target_size}")


@dataclass(frozen=True)
class Environment:
    """One episode's ground truth: geometry, relevance field, target, start."""

    spec: GridSpec
    occ_truth: OccupancyMap
    semantic_truth: SemanticField
    target_cells: frozenset[tuple[int, int]]
    category: str
    start: Pose
    shortest_path_len: float

    def __post_init__(self) -> None:
        if not self.target_cells:
            raise ValueError("environment has no target cells")
        if not self.shortest_path_len > 0.0:
            raise ValueError(
                f"shortest path length must be positive, got {self.shortest_path_len}"
            )


def geodesic_cell_distances(
    free_mask: np.ndarray,
    sources: set[tuple[int, int]],
) -> np.ndarray:
    """8-connected geodesic distance (in cells) from the source set over free cells.

    Unreachable or non-free cells get +inf. Straight steps cost 1, diagonal
    steps sqrt(2).
    """
    height, width = free_mask.shape
    dist = np.full((height, width), np.inf, dtype=np.float64)
    heap: list[tuple[float, int, int]] = []
    for col, row in sources:
        if 0 <= col < width and 0 <= row < height and free_mask[row, col]:
            dist[row, col] = 0.0
            heap.append((0.0, row, col))
    heapq.heapify(heap)

    while heap:
        d, row, col = heapq.heappop(heap)
        if d > dist[row, col]:
            continue
        for dc, dr, cost in (
            (-1, -1, SQRT2), (0, -1, 1.0), (1, -1, SQRT2),
            (-1, 0, 1.0), (1, 0, 1.0),
            (-1, 1, SQRT2), (0, 1, 1.0), (1, 1, SQRT2),
        ):
            nc = col + dc
            nr = row + dr
            if not (0 <= nc < width and 0 <= nr < height):
                continue
            if not free_mask[nr, nc]:
                continue
            nd = d + cost
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return dist


def _field_from_distances(dist: np.ndarray, decay_lambda: float) -> np.ndarray:
    field = np.zeros_like(dist)
    reachable = np.isfinite(dist)
    if math.isinf(decay_lambda):
        field[reachable] = 1.0
    else:
        field[reachable] = np.exp(-dist[reachable] / decay_lambda)
    return field


def relevance_field(
    free_mask: np.ndarray,
    target_cells: set[tuple[int, int]],
    decay_lambda: float,
) -> np.ndarray:
    """exp(-d/lambda) over free cells with d the geodesic distance to the target.

    Walls and unreachable cells get 0; target cells get exactly 1. An infinite
    lambda yields a uniform (uninformative) field over reachable space.
    """
    return _field_from_distances(
        geodesic_cell_distances(free_mask, target_cells), decay_lambda
    )


def _carve_rooms(
    cfg: EnvGenConfig, rng: np.random.Generator
) -> tuple[np.ndarray, list[tuple[int, int, int, int]]]:
    """Place non-overlapping rooms and connect consecutive ones with corridors."""
    walls = np.ones((cfg.height, cfg.width), dtype=bool)
    rooms: list[tuple[int, int, int, int]] = []

    for _ in range(cfg.room_count):
        for _ in range(50):
            w = int(rng.integers(cfg.room_min, cfg.room_max + 1))
            h = int(rng.integers(cfg.room_min, cfg.room_max + 1))
            if cfg.width - w - 2 < 1 or cfg.height - h - 2 < 1:
                continue
            x0 = int(rng.integers(1, cfg.width - w - 1))
            y0 = int(rng.integers(1, cfg.height - h - 1))
            if any(
                x0 < rx + rw + 1 and rx < x0 + w + 1 and y0 < ry + rh + 1 and ry < y0 + h + 1
                for rx, ry, rw, rh in rooms
            ):
                continue
            rooms.append((x0, y0, w, h))
            walls[y0 : y0 + h, x0 : x0 + w] = False
            break

    # Random recursive tree over rooms: branchy layouts with dead-end rooms,
    # unlike a chain where sweeping front to back is near optimal.
    cw = cfg.corridor_width
    for i in range(1, len(rooms)):
        ax, ay, aw, ah = rooms[int(rng.integers(i))]
        bx, by, bw, bh = rooms[i]
        acx, acy = ax + aw // 2, ay + ah // 2
        bcx, bcy = bx + bw // 2, by + bh // 2
        if rng.integers(2):
            acx, acy, bcx, bcy = bcx, bcy, acx, acy
        x_lo, x_hi = sorted((acx, bcx))
        y_lo, y_hi = sorted((acy, bcy))
        walls[
            max(acy, 1) : min(acy + cw, cfg.height - 1),
            max(x_lo, 1) : min(x_hi + cw, cfg.width - 1),
        ] = False
        walls[
            max(y_lo, 1) : min(y_hi + cw, cfg.height - 1),
            max(bcx, 1) : min(bcx + cw, cfg.width - 1),
        ] = False

    # Clutter blocks inside rooms create occlusion pockets and many small
    # frontiers, the terrain where myopic nearest-frontier sweeping degrades.
    if cfg.clutter_per_room > 0.0:
        for x0, y0, w, h in rooms:
            count = int(rng.poisson(cfg.clutter_per_room))
            for _ in range(count):
                if w < 4 or h < 4:
                    break
                bw = int(rng.integers(1, 3))
                bh = int(rng.integers(1, 3))
                bx = int(rng.integers(x0 + 1, max(x0 + 2, x0 + w - bw)))
                by = int(rng.integers(y0 + 1, max(y0 + 2, y0 + h - bh)))
                walls[by : by + bh, bx : bx + bw] = True

    walls[0, :] = walls[-1, :] = True
    walls[:, 0] = walls[:, -1] = True
    return walls, rooms


def _room_cells(
    room: tuple[int, int, int, int], free_mask: np.ndarray
) -> list[tuple[int, int]]:
    x0, y0, w, h = room
    return [
        (c, r)
        for r in range(y0, y0 + h)
        for c in range(x0, x0 + w)
        if free_mask[r, c]
    ]


def _carve_field(
    cfg: EnvGenConfig, rng: np.random.Generator
) -> tuple[np.ndarray, list[tuple[int, int]], list[tuple[int, int]]] | None:
    """Cluttered open field around the start, a clean target region beyond.

    Scattered blocks fill the field with occlusion shadows. With
    ``moat_width`` zero the target region is a set of halls behind a doored
    wall; otherwise an empty featureless band of that width separates the
    field from an open target island, so only deliberate crossings reach it.
    Returns (walls, start candidates, target candidates) or None when the
    grid cannot fit the regions.
    """
    walls = np.ones((cfg.height, cfg.width), dtype=bool)
    wall_x = max(8, int(cfg.width * cfg.field_fraction))
    island_x0 = wall_x + (cfg.moat_width if cfg.moat_width > 0 else 1)
    if island_x0 + 8 > cfg.width - 1 or cfg.height < 16:
        return None

    walls[1 : cfg.height - 1, 1:wall_x] = False  # the field
    walls[1 : cfg.height - 1, island_x0 : cfg.width - 1] = False  # target region
    span = max(2, cfg.corridor_width)

    if cfg.moat_width > 0:
        walls[1 : cfg.height - 1, wall_x:island_x0] = False  # open moat band
    else:
        # Hall dividers (horizontal walls) with one opening each.
        for k in range(1, cfg.hall_count):
            y = 1 + k * (cfg.height - 2) // cfg.hall_count
            walls[y, island_x0 : cfg.width - 1] = True
            gap = island_x0 + int(rng.integers(max(1, cfg.width - 2 - span - island_x0)))
            walls[y, gap : gap + span] = False
        for _ in range(cfg.door_count):
            y = 1 + int(rng.integers(cfg.height - 2 - span))
            walls[y : y + span, wall_x] = False

    # Clutter blocks: keep a clear margin around other blocks so every
    # passage stays navigable, and keep everything beyond the field clear.
    occupied_pad = np.zeros_like(walls)
    occupied_pad[:, max(0, wall_x - 2) :] = True
    start_cell = (wall_x // 2, cfg.height // 2)
    field_area = (wall_x - 1) * (cfg.height - 2)
    target_blocks = int(field_area * cfg.block_density / 6.0)
    placed = 0
    for _ in range(target_blocks * 30):
        if placed >= target_blocks:
            break
        bw = int(rng.integers(2, 4))
        bh = int(rng.integers(2, 4))
        bx = int(rng.integers(2, max(3, wall_x - bw - 1)))
        by = int(rng.integers(2, cfg.height - bh - 2))
        if abs(bx - start_cell[0]) < 4 and abs(by - start_cell[1]) < 4:
            continue
        if occupied_pad[by - 2 : by + bh + 2, bx - 2 : bx + bw + 2].any():
            continue
        walls[by : by + bh, bx : bx + bw] = True
        occupied_pad[by - 1 : by + bh + 1, bx - 1 : bx + bw + 1] = True
        placed += 1

    free = ~walls
    start_candidates = [
        (c, r)
        for r in range(start_cell[1] - 2, start_cell[1] + 3)
        for c in range(start_cell[0] - 2, start_cell[0] + 3)
        if free[r, c]
    ]
    if cfg.moat_width > 0:
        target_candidates = [
            (c, r)
            for r in range(2, cfg.height - 2)
            for c in range(island_x0 + 2, cfg.width - 1)
            if free[r, c]
        ]
    else:
        hall = int(rng.integers(cfg.hall_count))
        y_lo = 1 + hall * (cfg.height - 2) // cfg.hall_count
        y_hi = 1 + (hall + 1) * (cfg.height - 2) // cfg.hall_count
        far_x = island_x0 + (cfg.width - 1 - island_x0) // 2
        target_candidates = [
            (c, r)
            for r in range(y_lo + 1, y_hi - 1)
            for c in range(far_x, cfg.width - 1)
            if free[r, c]
        ]
    return walls, start_candidates, target_candidates


def _carve_open(
    cfg: EnvGenConfig, rng: np.random.Generator
) -> tuple[np.ndarray, list[tuple[int, int]], list[tuple[int, int]]]:
    """Large open expanse with sparse blocks; start central, target anywhere far.

    The sparse blocks shatter the exploration boundary into separate
    frontiers without imposing room structure; reachable space dwarfs the
    step budget, so how a planner spends travel decides success.
    """
    walls = np.ones((cfg.height, cfg.width), dtype=bool)
    walls[1 : cfg.height - 1, 1 : cfg.width - 1] = False

    occupied_pad = np.zeros_like(walls)
    start_cell = (cfg.width // 2, cfg.height // 2)
    area = (cfg.width - 2) * (cfg.height - 2)
    target_blocks = int(area * cfg.block_density / 6.0)
    placed = 0
    for _ in range(target_blocks * 30):
        if placed >= target_blocks:
            break
        bw = int(rng.integers(2, 4))
        bh = int(rng.integers(2, 4))
        bx = int(rng.integers(2, cfg.width - bw - 2))
        by = int(rng.integers(2, cfg.height - bh - 2))
        if abs(bx - start_cell[0]) < 5 and abs(by - start_cell[1]) < 5:
            continue
        if occupied_pad[by - 2 : by + bh + 2, bx - 2 : bx + bw + 2].any():
            continue
        walls[by : by + bh, bx : bx + bw] = True
        occupied_pad[by - 1 : by + bh + 1, bx - 1 : bx + bw + 1] = True
        placed += 1

    free = ~walls
    start_candidates = [
        (c, r)
        for r in range(start_cell[1] - 2, start_cell[1] + 3)
        for c in range(start_cell[0] - 2, start_cell[0] + 3)
        if free[r, c]
    ]
    target_candidates = [
        (int(c), int(r)) for r, c in zip(*np.nonzero(free))
    ]
    return walls, start_candidates, target_candidates


def generate_environment(cfg: EnvGenConfig, seed: int) -> Environment:
    """Build a deterministic environment for a seed.

    Internally re-rolls layouts that leave the target unreachable from the
    start or closer than the minimum separation; raises GenerationError when
    the retry budget runs out.
    """
    rng = np.random.default_rng(seed)
    spec = GridSpec(width=cfg.width, height=cfg.height, resolution=cfg.resolution)

    for _ in range(cfg.max_retries):
        if cfg.layout == "open":
            walls, start_candidates, target_candidates = _carve_open(cfg, rng)
            free = ~walls
        elif cfg.layout == "field":
            carved = _carve_field(cfg, rng)
            if carved is None:
                raise GenerationError(
                    f"grid {cfg.width}x{cfg.height} is too small for a field layout"
                )
            walls, start_candidates, target_candidates = carved
            free = ~walls
        else:
            walls, rooms = _carve_rooms(cfg, rng)
            if len(rooms) < 2:
                continue
            free = ~walls
            if cfg.far_target:
                # Adversarial placement: the target room is the one a
                # distance-ordered sweep from the start reaches last.
                start_room = int(rng.integers(len(rooms)))
                start_candidates = _room_cells(rooms[start_room], free)
                if not start_candidates:
                    continue
                probe = start_candidates[int(rng.integers(len(start_candidates)))]
                from_probe = geodesic_cell_distances(free, {probe})
                best_room = None
                best_dist = -1.0
                for idx, room in enumerate(rooms):
                    if idx == start_room:
                        continue
                    cells = _room_cells(room, free)
                    dists = [
                        from_probe[r, c] for c, r in cells if math.isfinite(from_probe[r, c])
                    ]
                    if not dists:
                        continue
                    room_dist = max(dists)
                    if room_dist > best_dist:
                        best_dist = room_dist
                        best_room = idx
                if best_room is None:
                    continue
                start_candidates = [probe]
                reachable = [
                    (c, r)
                    for c, r in _room_cells(rooms[best_room], free)
                    if math.isfinite(from_probe[r, c])
                ]
                far_cut = max(from_probe[r, c] for c, r in reachable) * 0.7
                target_candidates = [
                    (c, r) for c, r in reachable if from_probe[r, c] >= far_cut
                ]
            else:
                target_room = int(rng.integers(len(rooms)))
                start_room = int(rng.integers(len(rooms) - 1))
                if start_room >= target_room:
                    start_room += 1
                target_candidates = _room_cells(rooms[target_room], free)
                start_candidates = _room_cells(rooms[start_room], free)
        if not target_candidates or not start_candidates:
            continue

        anchor = target_candidates[int(rng.integers(len(target_candidates)))]
        target_cells = {anchor}
        for dc, dr in ((1, 0), (0, 1), (1, 1)):
            if len(target_cells) >= cfg.target_size:
                break
            cell = (anchor[0] + dc, anchor[1] + dr)
            if spec.contains(cell) and free[cell[1], cell[0]]:
                target_cells.add(cell)
        start_cell = start_candidates[int(rng.integers(len(start_candidates)))]
        heading = float(rng.uniform(-math.pi, math.pi))

        dist = geodesic_cell_distances(free, target_cells)
        start_dist_m = float(dist[start_cell[1], start_cell[0]]) * cfg.resolution
        if not math.isfinite(start_dist_m) or start_dist_m < cfg.min_start_target_m:
            continue
        from_start = geodesic_cell_distances(free, {start_cell})
        if any(not math.isfinite(from_start[r, c]) for c, r in target_cells):
            continue

        field = _field_from_distances(dist, cfg.decay_lambda)

        return Environment(
            spec=spec,
            occ_truth=OccupancyMap.from_occupied_mask(spec, walls),
            semantic_truth=SemanticField(values=field),
            target_cells=frozenset(target_cells),
            category=CATEGORIES[int(rng.integers(len(CATEGORIES)))],
            start=Pose(position=spec.cell_center(start_cell), heading=heading),
            shortest_path_len=start_dist_m,
        )

    raise GenerationError(
        f"no valid environment for seed {seed} within {cfg.max_retries} attempts"
    )
