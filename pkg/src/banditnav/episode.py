"""Episode state machine and metrics.

One episode senses the world through a field-of-view cone, fuses occupancy and
relevance beliefs, and acts one primitive action per timestep: explore toward
a chosen frontier until the target is sighted, then navigate straight to it
and stop within clearance. Success requires a deliberate stop close to a
target that is actually visible from the final pose; running out of steps is
never a success.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .envgen import Environment
from .frontier import MIN_FRONTIER_SIZE, cluster_frontiers
from .grid import (
    FovSpec,
    Pose,
    focal_cone,
    line_of_sight,
    normalize_angle,
    swept_cells,
    world_to_grid,
)
from .mapping import (
    OccupancyMap,
    SemanticMap,
    mark_cell_free,
    mark_cell_occupied,
    update_occupancy,
    update_semantic,
)
from .planner import (
    DEFAULT_DETECT_RANGE,
    SIGMA_FLOOR,
    FrontierBelief,
    NoFrontierError,
    PlannerConfig,
    Strategy,
    UnknownPolicy,
    check_detection,
    plan_path,
    select_frontier,
)
from .sensor import DEFAULT_CONVENTION, VARIANCE_FLOOR, build_observation
from .sources import (
    BridgeClient,
    BridgeSource,
    SensorFailure,
    SyntheticSource,
    TcpLineTransport,
    TraceReplay,
    ViewQuery,
)

WAYPOINT_REACHED_FACTOR = 0.6
COMMIT_DISSOLVE_RADIUS = 3


def _frontier_near(cells: set[tuple[int, int]], center: tuple[int, int], radius: int) -> bool:
    """Any frontier cell within Chebyshev ``radius`` of ``center``?"""
    c0, r0 = center
    for dc in range(-radius, radius + 1):
        for dr in range(-radius, radius + 1):
            if (c0 + dc, r0 + dr) in cells:
                return True
    return False


def _pursuable_frontier_cells(occ: OccupancyMap) -> set[tuple[int, int]]:
    """Frontier cells whose unknown neighbours can actually be observed.

    Rays step one axis at a time, so an unknown cell walled in on all four
    sides (e.g. an outer grid corner behind two border walls) can never be
    entered by a ray. Frontiers pointing only at such cells would be chased
    forever without resolving; they do not count as exploration targets.
    """
    unknown = occ.unknown_mask
    occupied = occ.occupied_mask
    blocked = np.ones_like(occupied)
    blocked[1:, :] &= occupied[:-1, :]
    blocked[:-1, :] &= occupied[1:, :]
    blocked[:, 1:] &= occupied[:, :-1]
    blocked[:, :-1] &= occupied[:, 1:]
    observable_unknown = unknown & ~blocked

    near = np.zeros_like(observable_unknown)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            src = observable_unknown[
                max(0, -dr) : observable_unknown.shape[0] - max(0, dr),
                max(0, -dc) : observable_unknown.shape[1] - max(0, dc),
            ]
            near[
                max(0, dr) : near.shape[0] - max(0, -dr),
                max(0, dc) : near.shape[1] - max(0, -dc),
            ] |= src
    mask = occ.free_mask & near
    rows, cols = np.nonzero(mask)
    return {(int(c), int(r)) for r, c in zip(rows, cols)}


class Action(str, Enum):
    FORWARD = "forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    STOP = "stop"


class FailureReason(str, Enum):
    TIMEOUT = "timeout"
    NO_FRONTIER = "no_frontier"
    SENSOR_FAILURE = "sensor_failure"
    BAD_STOP = "bad_stop"


@dataclass(frozen=True)
class SensorConfig:
    """Which score source an episode uses and how it is parameterised."""

    kind: str = "synthetic"
    ensemble_size: int = 7
    noise_sigma: float = 0.05
    prompt_biases: tuple[float, ...] | None = None
    convention: str = DEFAULT_CONVENTION
    variance_floor: float = VARIANCE_FLOOR
    trace_path: str | None = None
    endpoint: str | None = None
    prompts: tuple[str, ...] | None = None
    target: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("synthetic", "replay", "bridge"):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if self.kind == "replay" and not self.trace_path:
            raise ValueError("replay sensor needs a trace_path")
        if self.kind == "bridge" and not self.endpoint:
            raise ValueError("bridge sensor needs an endpoint")
        if self.ensemble_size < 1:
            raise ValueError(f"ensemble size must be positive, got {self.ensemble_size}")


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything an episode needs besides the environment itself."""

    max_steps: int = 500
    clearance: float = 1.0
    step_size: float = 0.25
    turn_angle: float = math.radians(30.0)
    fov: FovSpec = FovSpec(horizontal_fov=math.radians(79.0), max_range=5.0, ray_count=181)
    detect_range: float = DEFAULT_DETECT_RANGE
    sensor: SensorConfig = SensorConfig()
    planner: PlannerConfig = PlannerConfig()
    min_frontier_size: int = MIN_FRONTIER_SIZE
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be at least 1, got {self.max_steps}")
        if not self.clearance > 0.0:
            raise ValueError(f"clearance must be positive, got {self.clearance}")
        if not self.step_size > 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not 0.0 < self.turn_angle <= math.pi:
            raise ValueError(f"turn_angle must be in (0, pi], got {self.turn_angle}")


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    steps_used: int
    path_length: float
    spl_term: float
    failure_reason: FailureReason | None = None

    def __post_init__(self) -> None:
        if not self.success and self.spl_term != 0.0:
            raise ValueError("failed episodes must have zero SPL term")
        if self.spl_term > 1.0:
            raise ValueError(f"SPL term {self.spl_term} exceeds 1")


@dataclass
class EpisodeState:
    """Mutable simulation state advanced one action at a time."""

    env: Environment
    config: EpisodeConfig
    pose: Pose
    steps_used: int = 0
    path_length: float = 0.0
    terminated: bool = False
    stopped: bool = False
    collided: bool = False


def step(state: EpisodeState, action: Action) -> EpisodeState:
    """Advance the simulation by one action; mutates and returns the state.

    Forward motion is blocked (pose unchanged, collision flagged) when the
    swept line would cross an occupied ground-truth cell or leave the grid.
    Raises RuntimeError when called after termination.
    """
    if state.terminated:
        raise RuntimeError("episode already terminated")
    action = Action(action)
    state.collided = False
    cfg = state.config

    if action is Action.STOP:
        state.stopped = True
        state.terminated = True
    elif action is Action.TURN_LEFT:
        state.pose = replace(state.pose, heading=state.pose.heading + cfg.turn_angle)
    elif action is Action.TURN_RIGHT:
        state.pose = replace(state.pose, heading=state.pose.heading - cfg.turn_angle)
    else:
        x, y = state.pose.position
        nx = x + cfg.step_size * math.cos(state.pose.heading)
        ny = y + cfg.step_size * math.sin(state.pose.heading)
        crossed, exited = swept_cells((x, y), (nx, ny), state.env.spec)
        occupied = state.env.occ_truth.occupied_mask
        hit = exited or any(occupied[r, c] for c, r in crossed)
        if hit:
            state.collided = True
        else:
            state.pose = replace(state.pose, position=(nx, ny))
            state.path_length += cfg.step_size

    state.steps_used += 1
    return state


class _PathFollower:
    """Keeps a planned cell path fresh and emits one steering action at a time."""

    def __init__(self, config: EpisodeConfig):
        self._config = config
        self._target: tuple[int, int] | None = None
        self._path: list[tuple[int, int]] | None = None
        self._cursor = 0

    def invalidate(self) -> None:
        self._path = None

    def _replan(
        self,
        robot_cell: tuple[int, int],
        target: tuple[int, int],
        occ: OccupancyMap,
        policies: tuple[UnknownPolicy, ...],
    ) -> bool:
        self._target = target
        self._path = None
        self._cursor = 0
        for policy in policies:
            path = plan_path(occ, robot_cell, target, policy)
            if path is not None:
                self._path = path
                return True
        return False

    def action_toward(
        self,
        pose: Pose,
        target: tuple[int, int],
        occ: OccupancyMap,
        policies: tuple[UnknownPolicy, ...],
    ) -> Action | None:
        """Steer toward the target cell, replanning as needed; None if unroutable.

        Emits a turn when already at the target (the caller replans on
        arrival) so every call yields exactly one executable action.
        """
        spec = occ.spec
        robot_cell = world_to_grid(pose.position, spec)
        if robot_cell is None:
            return None
        if target != self._target:
            self._path = None
        if self._path is not None and self._cursor < len(self._path):
            wc, wr = self._path[self._cursor]
            if occ.occupied_mask[wr, wc]:
                self._path = None

        reach = WAYPOINT_REACHED_FACTOR * spec.resolution
        px, py = pose.position
        for _ in range(2):
            if self._path is None and not self._replan(robot_cell, target, occ, policies):
                return None
            while self._cursor < len(self._path):
                cx, cy = spec.cell_center(self._path[self._cursor])
                if math.hypot(cx - px, cy - py) <= reach:
                    self._cursor += 1
                else:
                    break
            if self._cursor < len(self._path):
                break
            self._path = None  # consumed; replan once from the current pose
        else:
            return Action.TURN_LEFT  # effectively at the target; hold until replanned

        cx, cy = spec.cell_center(self._path[self._cursor])
        error = normalize_angle(math.atan2(cy - py, cx - px) - pose.heading)
        half_turn = self._config.turn_angle / 2.0
        if error > half_turn:
            return Action.TURN_LEFT
        if error < -half_turn:
            return Action.TURN_RIGHT
        return Action.FORWARD


@dataclass
class EpisodeRollout:
    """Everything an episode produced: outcome, trajectory, and final beliefs."""

    result: EpisodeResult
    poses: list[Pose]
    actions: list[Action]
    occupancy: OccupancyMap
    semantic: SemanticMap
    detected_step: int | None = None


def _build_source(env: Environment, config: EpisodeConfig, rng: np.random.Generator):
    sensor = config.sensor
    if sensor.kind == "synthetic":
        return SyntheticSource(
            field=env.semantic_truth,
            ensemble_size=sensor.ensemble_size,
            noise_sigma=sensor.noise_sigma,
            rng=rng,
            prompt_biases=sensor.prompt_biases,
            convention=sensor.convention,
        )
    if sensor.kind == "replay":
        return TraceReplay(sensor.trace_path)
    client = BridgeClient(TcpLineTransport(sensor.endpoint))
    prompts = list(sensor.prompts) if sensor.prompts else [f"{env.category}"]
    return BridgeSource(client=client, target=sensor.target or env.category, prompts=prompts)


def _nearest_target(pose: Pose, env: Environment) -> tuple[tuple[int, int], float]:
    px, py = pose.position
    best_cell = None
    best_dist = math.inf
    for cell in sorted(env.target_cells, key=lambda c: (c[1], c[0])):
        cx, cy = env.spec.cell_center(cell)
        d = math.hypot(cx - px, cy - py)
        if d < best_dist:
            best_dist = d
            best_cell = cell
    return best_cell, best_dist


def _success_at(pose: Pose, env: Environment, clearance: float) -> bool:
    px, py = pose.position
    for cell in env.target_cells:
        cx, cy = env.spec.cell_center(cell)
        if math.hypot(cx - px, cy - py) <= clearance and line_of_sight(
            (px, py), (cx, cy), env.occ_truth
        ):
            return True
    return False


def run_episode(
    env: Environment,
    config: EpisodeConfig,
    episode_id: int = 0,
) -> EpisodeRollout:
    """Run one full episode and return its result, trajectory, and final maps.

    Per timestep: sense the cone, update both belief maps, check the detector,
    then either head for the detected target (stopping inside clearance with
    line of sight) or pick and pursue a frontier. Terminates on stop, step
    budget exhaustion, frontier exhaustion, or sensor failure. Deterministic
    for fixed environment and config seeds.
    """
    spec = env.spec
    occ = OccupancyMap.blank(spec)
    sem = SemanticMap.blank(spec)
    rng = np.random.default_rng(config.rng_seed)
    source = _build_source(env, config, rng)
    follower = _PathFollower(config)

    state = EpisodeState(env=env, config=config, pose=env.start)
    poses = [state.pose]
    actions: list[Action] = []
    goal_cell: tuple[int, int] | None = None
    committed: tuple[int, int] | None = None
    detected_step: int | None = None
    failure: FailureReason | None = None
    every_step = config.planner.replan_trigger == "every_step"

    for t in range(config.max_steps):
        visible = focal_cone(state.pose, env.occ_truth, config.fov)
        update_occupancy(occ, state.pose, visible)
        robot_cell = world_to_grid(state.pose.position, spec)
        mark_cell_free(occ, robot_cell)
        try:
            sample = source.sample(
                ViewQuery(
                    visible=visible,
                    fov=config.fov,
                    pose=state.pose,
                    step=t,
                    episode=episode_id,
                )
            )
        except SensorFailure:
            failure = FailureReason.SENSOR_FAILURE
            break
        observation = build_observation(
            sample,
            (vc.bearing for vc in visible),
            config.fov,
            config.sensor.convention,
            config.sensor.variance_floor,
        )
        update_semantic(sem, observation, visible)

        event = check_detection(
            state.pose, set(env.target_cells), visible, config.detect_range, step=t
        )
        if event is not None:
            if goal_cell is None:
                detected_step = t
            goal_cell = event.goal_cell

        action: Action | None = None
        if goal_cell is not None:
            gx, gy = spec.cell_center(goal_cell)
            dist = math.hypot(gx - state.pose.position[0], gy - state.pose.position[1])
            if dist <= config.clearance and line_of_sight(
                state.pose.position, (gx, gy), env.occ_truth
            ):
                action = Action.STOP
            else:
                action = follower.action_toward(
                    state.pose,
                    goal_cell,
                    occ,
                    (UnknownPolicy.BLOCKED, UnknownPolicy.TRAVERSABLE),
                )
                if action is None:
                    goal_cell = None  # believed unroutable; fall back to exploring

        if action is None:
            cells = _pursuable_frontier_cells(occ)
            frontiers = cluster_frontiers(cells, config.min_frontier_size)
            if not frontiers and cells:
                # Below-min-size boundary scraps (e.g. narrow corridor ends)
                # still lead somewhere; only a truly empty boundary ends the hunt.
                frontiers = cluster_frontiers(cells, 1)
            if not frontiers:
                failure = FailureReason.NO_FRONTIER
                break
            # Point-goal commitment: the chosen frontier cell stays the goal
            # until the robot reaches it or it turns out to be occupied. The
            # boundary retreating ahead of the advancing sensor does not
            # cancel the trek; exploration progress accrues along the way.
            arrived = committed is not None and (
                committed == robot_cell
                or math.dist(state.pose.position, spec.cell_center(committed))
                <= WAYPOINT_REACHED_FACTOR * spec.resolution
            )
            gone = committed is not None and occ.occupied_mask[committed[1], committed[0]]
            if committed is None or every_step or arrived or gone:
                beliefs = [
                    FrontierBelief(
                        frontier=f,
                        mu=float(sem.mu[f.centroid[1], f.centroid[0]]),
                        sigma=max(
                            math.sqrt(float(sem.var[f.centroid[1], f.centroid[0]])),
                            SIGMA_FLOOR,
                        ),
                    )
                    for f in frontiers
                ]
                try:
                    committed = select_frontier(
                        beliefs, state.pose, config.planner, occ=occ, rng=rng
                    ).centroid
                except NoFrontierError:
                    failure = FailureReason.NO_FRONTIER
                    break
                follower.invalidate()
            action = follower.action_toward(
                state.pose, committed, occ, (UnknownPolicy.TRAVERSABLE,)
            )
            if action is None:
                # Current choice unroutable: try the remaining frontiers once.
                remaining = [f for f in frontiers if f.centroid != committed]
                committed = None
                for f in remaining:
                    candidate = follower.action_toward(
                        state.pose, f.centroid, occ, (UnknownPolicy.TRAVERSABLE,)
                    )
                    if candidate is not None:
                        committed = f.centroid
                        action = candidate
                        break
                if action is None:
                    failure = FailureReason.NO_FRONTIER
                    break

        step(state, action)
        actions.append(action)
        poses.append(state.pose)
        if state.collided:
            # Contact sensing: the struck wall may be outside the view cone,
            # so record it or the same plan would repeat forever.
            x, y = state.pose.position
            ahead = (
                x + config.step_size * math.cos(state.pose.heading),
                y + config.step_size * math.sin(state.pose.heading),
            )
            crossed, _ = swept_cells((x, y), ahead, spec)
            truth = env.occ_truth.occupied_mask
            for col, row in crossed:
                if truth[row, col]:
                    mark_cell_occupied(occ, (col, row))
                    break
            follower.invalidate()
        if state.terminated:
            break

    success = False
    if failure is not None:
        pass
    elif state.stopped:
        success = _success_at(state.pose, env, config.clearance)
        if not success:
            failure = FailureReason.BAD_STOP
    else:
        failure = FailureReason.TIMEOUT

    if success:
        shortest = env.shortest_path_len
        spl_term = shortest / max(state.path_length, shortest)
    else:
        spl_term = 0.0

    result = EpisodeResult(
        success=success,
        steps_used=state.steps_used,
        path_length=state.path_length,
        spl_term=spl_term,
        failure_reason=failure,
    )
    return EpisodeRollout(
        result=result,
        poses=poses,
        actions=actions,
        occupancy=occ,
        semantic=sem,
        detected_step=detected_step,
    )


def compute_metrics(results, environments) -> tuple[float, float]:
    """Success rate and success-weighted path length over a batch, as percentages.

    Each result pairs with its environment's shortest path; failed episodes
    contribute zero to both. Raises ValueError on empty input.
    """
    results = list(results)
    if not results:
        raise ValueError("cannot compute metrics over zero episodes")
    shortest = [
        env.shortest_path_len if hasattr(env, "shortest_path_len") else float(env)
        for env in environments
    ]
    if len(shortest) != len(results):
        raise ValueError(
            f"{len(results)} results but {len(shortest)} environments"
        )
    sr_terms = []
    spl_terms = []
    for res, l in zip(results, shortest):
        sr_terms.append(1.0 if res.success else 0.0)
        spl_terms.append(l / max(res.path_length, l) if res.success else 0.0)
    return 100.0 * float(np.mean(sr_terms)), 100.0 * float(np.mean(spl_terms))
