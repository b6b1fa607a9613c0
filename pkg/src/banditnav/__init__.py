"""Object-goal search on a desk: probabilistic semantic sensing, Gaussian
relevance mapping, and bandit frontier exploration in a 2D grid simulator."""

from .envgen import EnvGenConfig, Environment, GenerationError, generate_environment
from .episode import (
    Action,
    EpisodeConfig,
    EpisodeResult,
    EpisodeRollout,
    EpisodeState,
    FailureReason,
    SensorConfig,
    compute_metrics,
    run_episode,
    step,
)
from .frontier import Frontier, cluster_frontiers, detect_frontier_cells, frontier_count
from .grid import (
    FovSpec,
    GridSpec,
    Pose,
    VisibleCell,
    focal_cone,
    grid_to_world,
    line_of_sight,
    normalize_angle,
    raycast,
    world_to_grid,
)
from .mapping import (
    CellState,
    DegenerateMeasurementError,
    OccupancyMap,
    SemanticMap,
    load_snapshot,
    query_cell,
    save_snapshot,
    update_occupancy,
    update_semantic,
)
from .planner import (
    DetectionEvent,
    FrontierBelief,
    NoFrontierError,
    PlannerConfig,
    Strategy,
    UnknownPolicy,
    check_detection,
    expected_improvement,
    gp_ucb,
    path_cost,
    plan_path,
    select_frontier,
)
from .sensor import (
    PromptEnsemble,
    RelevanceObservation,
    ScoreSample,
    SemanticField,
    build_observation,
    cosine_similarity,
    ensemble_stats,
    observe_synthetic,
    per_ray_variance,
    qq_correlation,
    viewpoint_confidence,
)
from .sources import (
    BridgeClient,
    BridgeProtocolError,
    BridgeTransportError,
    ScoreCountError,
    ScoreRangeError,
    SensorFailure,
    SyntheticSource,
    TcpLineTransport,
    TraceExhaustedError,
    TraceParseError,
    TraceReplay,
    observe_bridge,
    write_trace,
)

__version__ = "0.1.0"
