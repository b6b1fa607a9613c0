"""Frontier selection as a multi-armed bandit, plus detection gating and grid A*.

Two uncertainty-informed strategies score frontier beliefs with acquisition
functions (expected improvement and an upper confidence bound); two geometric
baselines pick the nearest or a random frontier. A simulated line-of-sight
detector fires when target cells enter the sensed cone, after which plain A*
point-goal navigation takes over.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .frontier import Frontier
from .grid import Pose, VisibleCell, world_to_grid
from .mapping import OccupancyMap

SQRT2 = math.sqrt(2.0)
SIGMA_FLOOR = 1e-9
DEFAULT_BETA = 1.5
DEFAULT_DETECT_RANGE = 4.0

_NEIGHBOURS = (
    (-1, -1, SQRT2),
    (0, -1, 1.0),
    (1, -1, SQRT2),
    (-1, 0, 1.0),
    (1, 0, 1.0),
    (-1, 1, SQRT2),
    (0, 1, 1.0),
    (1, 1, SQRT2),
)


class Strategy(str, Enum):
    IFBE1 = "ifbe1"
    IFBE2 = "ifbe2"
    CLOSEST = "closest"
    RANDOM = "random"


class UnknownPolicy(str, Enum):
    BLOCKED = "blocked"
    TRAVERSABLE = "traversable"


class NoFrontierError(RuntimeError):
    """No frontier is available (or reachable); the caller decides episode failure."""


@dataclass(frozen=True)
class FrontierBelief:
    """A frontier paired with the map's relevance belief at its centre."""

    frontier: Frontier
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"belief sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class PlannerConfig:
    strategy: Strategy = Strategy.IFBE2
    beta: float = DEFAULT_BETA
    rng_seed: int = 0
    replan_trigger: str = "on_arrival"

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not math.isfinite(self.beta) or self.beta < 0.0:
            raise ValueError(f"beta must be finite and nonnegative, got {self.beta}")
        if self.replan_trigger not in ("on_arrival", "every_step"):
            raise ValueError(f"unknown replan trigger {self.replan_trigger!r}")


@dataclass(frozen=True)
class DetectionEvent:
    """The target entered the sensed view: its cell and the timestep."""

    goal_cell: tuple[int, int]
    step: int


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / SQRT2))


def _norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def expected_improvement(mu: float, sigma: float, incumbent: float) -> float:
    """Expected improvement of a Gaussian belief over the incumbent value.

    Computes (mu - incumbent) * Phi(z) + sigma * phi(z) with
    z = (mu - incumbent) / sigma. Always nonnegative; grows with sigma, so
    uncertain candidates can beat a marginally better certain one.

    Raises ValueError when sigma is not strictly positive (callers clamp
    degenerate sigmas up to a tiny floor instead).
    """
    if not sigma > 0.0:
        raise ValueError(f"expected improvement needs sigma > 0, got {sigma}")
    z = (mu - incumbent) / sigma
    value = (mu - incumbent) * _norm_cdf(z) + sigma * _norm_pdf(z)
    return max(0.0, value)


def gp_ucb(mu: float, sigma: float, beta: float) -> float:
    """Optimistic score mu + sqrt(beta) * sigma; beta trades off exploration."""
    return mu + math.sqrt(beta) * sigma


def _sorted_beliefs(beliefs: list[FrontierBelief]) -> list[FrontierBelief]:
    return sorted(beliefs, key=lambda b: (b.frontier.centroid[1], b.frontier.centroid[0]))


def select_frontier(
    beliefs: list[FrontierBelief],
    robot: Pose,
    config: PlannerConfig,
    occ: OccupancyMap | None = None,
    rng: np.random.Generator | None = None,
) -> Frontier:
    """Pick the next frontier to explore under the configured strategy.

    ``ifbe1`` maximises expected improvement against the best current mean;
    ``ifbe2`` maximises the upper confidence bound; ``closest`` minimises
    grid-path distance (requires ``occ``; unreachable frontiers are skipped);
    ``random`` draws uniformly with the config seed. All ties resolve by
    centroid (row, col) order.

    Raises NoFrontierError when no frontier exists or none is reachable.
    """
    if not beliefs:
        raise NoFrontierError("no frontiers to select from")
    ordered = _sorted_beliefs(beliefs)
    strategy = config.strategy

    if strategy is Strategy.RANDOM:
        generator = rng if rng is not None else np.random.default_rng(config.rng_seed)
        return ordered[int(generator.integers(len(ordered)))].frontier

    if strategy is Strategy.CLOSEST:
        if occ is None:
            raise ValueError("closest strategy needs an occupancy map for path distances")
        start = world_to_grid(robot.position, occ.spec)
        if start is None:
            raise ValueError(f"robot position {robot.position} is outside the grid")
        best = None
        best_cost = math.inf
        for belief in ordered:
            path = plan_path(occ, start, belief.frontier.centroid, UnknownPolicy.TRAVERSABLE)
            if path is None:
                continue
            cost = path_cost(path)
            if cost < best_cost:
                best_cost = cost
                best = belief.frontier
        if best is None:
            raise NoFrontierError("no frontier is reachable from the robot")
        return best

    if strategy is Strategy.IFBE1:
        incumbent = max(b.mu for b in ordered)
        scores = [
            expected_improvement(b.mu, max(b.sigma, SIGMA_FLOOR), incumbent) for b in ordered
        ]
    else:
        scores = [gp_ucb(b.mu, b.sigma, config.beta) for b in ordered]

    best_idx = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best_idx]:
            best_idx = i
    return ordered[best_idx].frontier


def check_detection(
    pose: Pose,
    target_cells: set[tuple[int, int]],
    visible: list[VisibleCell],
    detect_range: float = DEFAULT_DETECT_RANGE,
    step: int = 0,
) -> DetectionEvent | None:
    """Fire when a target cell is inside the sensed cone within detector range.

    Occluded targets never fire because they are not in the visible set. With
    several candidates the nearest wins, ties by (row, col).
    """
    best: VisibleCell | None = None
    for vc in visible:
        if vc.cell not in target_cells or vc.range_m > detect_range:
            continue
        if best is None or (vc.range_m, vc.cell[1], vc.cell[0]) < (
            best.range_m,
            best.cell[1],
            best.cell[0],
        ):
            best = vc
    if best is None:
        return None
    return DetectionEvent(goal_cell=best.cell, step=step)


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def plan_path(
    occ: OccupancyMap,
    start: tuple[int, int],
    goal: tuple[int, int],
    unknown_policy: UnknownPolicy | str = UnknownPolicy.BLOCKED,
) -> list[tuple[int, int]] | None:
    """Minimal-cost 8-connected path avoiding occupied cells, or None.

    Straight moves cost 1, diagonal moves sqrt(2). Unknown cells block or
    pass through depending on the policy; occupied cells always block.
    Diagonal moves may not cut the corner of a blocked cell, matching the
    swept-line motion model that cannot squeeze past wall corners.
    Tie-breaking is deterministic, so identical inputs give identical paths.

    Raises ValueError when the start cell is occupied or outside the grid.
    """
    policy = UnknownPolicy(unknown_policy)
    spec = occ.spec
    if not spec.contains(start):
        raise ValueError(f"start cell {start} outside grid")
    if not spec.contains(goal):
        return None

    occupied = occ.occupied_mask
    if occupied[start[1], start[0]]:
        raise ValueError(f"start cell {start} is occupied")
    if policy is UnknownPolicy.BLOCKED:
        blocked = occupied | occ.unknown_mask
        blocked[start[1], start[0]] = False
    else:
        blocked = occupied
    if blocked[goal[1], goal[0]]:
        return None
    if start == goal:
        return [start]

    width = spec.width
    height = spec.height
    blocked_flat = blocked.ravel()
    start_idx = start[1] * width + start[0]
    goal_idx = goal[1] * width + goal[0]

    g_cost = {start_idx: 0.0}
    parent: dict[int, int] = {}
    open_heap = [(_octile(start, goal), 0.0, start[1], start[0])]
    closed = set()

    while open_heap:
        f, g, row, col = heapq.heappop(open_heap)
        idx = row * width + col
        if idx in closed:
            continue
        if idx == goal_idx:
            path = [(col, row)]
            while idx in parent:
                idx = parent[idx]
                path.append((idx % width, idx // width))
            path.reverse()
            return path
        closed.add(idx)
        for dc, dr, step_cost in _NEIGHBOURS:
            nc = col + dc
            nr = row + dr
            if not (0 <= nc < width and 0 <= nr < height):
                continue
            nidx = nr * width + nc
            if blocked_flat[nidx] or nidx in closed:
                continue
            if (
                dc != 0
                and dr != 0
                and (blocked_flat[row * width + nc] or blocked_flat[nr * width + col])
            ):
                continue
            ng = g + step_cost
            if ng < g_cost.get(nidx, math.inf) - 1e-12:
                g_cost[nidx] = ng
                parent[nidx] = idx
                heapq.heappush(open_heap, (ng + _octile((nc, nr), goal), ng, nr, nc))
    return None


def path_cost(path: list[tuple[int, int]]) -> float:
    """Total step cost of an 8-connected cell path (1 straight, sqrt(2) diagonal)."""
    cost = 0.0
    for (c0, r0), (c1, r1) in zip(path, path[1:]):
        cost += SQRT2 if (c0 != c1 and r0 != r1) else 1.0
    return cost
