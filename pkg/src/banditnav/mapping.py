"""Online geometric-semantic belief maps.

The occupancy layer accumulates log-odds evidence and classifies each cell as
unknown, free, or occupied. The semantic layer keeps an independent Gaussian
belief per cell over relevance and fuses measurements with the closed-form
conjugate update: precisions add, so variance shrinks monotonically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .grid import GridSpec, Pose
from .sensor import RelevanceObservation

LOG_ODDS_CLAMP = 10.0
LOG_ODDS_HIT = 0.9
LOG_ODDS_MISS = 0.9
OCCUPIED_THRESHOLD = 0.85
FREE_THRESHOLD = -0.85

SEMANTIC_PRIOR_MEAN = 0.5
SEMANTIC_PRIOR_VARIANCE = 0.5

SNAPSHOT_MAGIC = b"GSMAP1"


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class GridSpecMismatchError(ValueError):
    """Visible cells or a second map do not fit this map's grid."""


class SnapshotFormatError(ValueError):
    """A snapshot file has the wrong magic, is truncated, or is inconsistent."""


class DegenerateMeasurementError(ValueError):
    """A measurement variance of zero would collapse the belief to a point."""


@dataclass
class OccupancyMap:
    """Tri-state occupancy belief backed by clamped per-cell log-odds.

    Fresh maps are all-unknown (log-odds zero). Cells classify occupied above
    ``occupied_threshold``, free below ``free_threshold``, unknown between.
    """

    spec: GridSpec
    log_odds: np.ndarray
    occupied_threshold: float = OCCUPIED_THRESHOLD
    free_threshold: float = FREE_THRESHOLD

    @classmethod
    def blank(cls, spec: GridSpec) -> "OccupancyMap":
        return cls(spec=spec, log_odds=np.zeros((spec.height, spec.width), dtype=np.float64))

    @classmethod
    def from_occupied_mask(cls, spec: GridSpec, mask: np.ndarray) -> "OccupancyMap":
        """Fully-known map from a boolean wall mask (ground truth environments)."""
        m = np.asarray(mask, dtype=bool)
        if m.shape != (spec.height, spec.width):
            raise GridSpecMismatchError(
                f"mask shape {m.shape} does not match grid {spec.height}x{spec.width}"
            )
        log_odds = np.where(m, LOG_ODDS_CLAMP, -LOG_ODDS_CLAMP).astype(np.float64)
        return cls(spec=spec, log_odds=log_odds)

    @property
    def occupied_mask(self) -> np.ndarray:
        return self.log_odds > self.occupied_threshold

    @property
    def free_mask(self) -> np.ndarray:
        return self.log_odds < self.free_threshold

    @property
    def unknown_mask(self) -> np.ndarray:
        return (self.log_odds <= self.occupied_threshold) & (
            self.log_odds >= self.free_threshold
        )

    def state(self, cell: tuple[int, int]) -> CellState:
        if not self.spec.contains(cell):
            raise ValueError(f"cell {cell} outside grid")
        value = self.log_odds[cell[1], cell[0]]
        if value > self.occupied_threshold:
            return CellState.OCCUPIED
        if value < self.free_threshold:
            return CellState.FREE
        return CellState.UNKNOWN

    def classify(self) -> np.ndarray:
        """Whole-grid classification as a uint8 array of CellState values."""
        out = np.full(self.log_odds.shape, CellState.UNKNOWN, dtype=np.uint8)
        out[self.occupied_mask] = CellState.OCCUPIED
        out[self.free_mask] = CellState.FREE
        return out

    def copy(self) -> "OccupancyMap":
        return OccupancyMap(
            spec=self.spec,
            log_odds=self.log_odds.copy(),
            occupied_threshold=self.occupied_threshold,
            free_threshold=self.free_threshold,
        )


@dataclass
class SemanticMap:
    """Per-cell Gaussian relevance belief with an uninformed wide prior."""

    spec: GridSpec
    mu: np.ndarray
    var: np.ndarray

    @classmethod
    def blank(
        cls,
        spec: GridSpec,
        prior_mean: float = SEMANTIC_PRIOR_MEAN,
        prior_variance: float = SEMANTIC_PRIOR_VARIANCE,
    ) -> "SemanticMap":
        if not prior_variance > 0.0:
            raise ValueError(f"prior variance must be positive, got {prior_variance}")
        shape = (spec.height, spec.width)
        return cls(
            spec=spec,
            mu=np.full(shape, prior_mean, dtype=np.float64),
            var=np.full(shape, prior_variance, dtype=np.float64),
        )

    def copy(self) -> "SemanticMap":
        return SemanticMap(spec=self.spec, mu=self.mu.copy(), var=self.var.copy())


def _cell_arrays(spec: GridSpec, visible) -> tuple[np.ndarray, np.ndarray, list]:
    cells = list(visible)
    cols = np.fromiter((vc.cell[0] for vc in cells), dtype=np.intp, count=len(cells))
    rows = np.fromiter((vc.cell[1] for vc in cells), dtype=np.intp, count=len(cells))
    if len(cells) and (
        cols.min() < 0 or rows.min() < 0 or cols.max() >= spec.width or rows.max() >= spec.height
    ):
        raise GridSpecMismatchError("visible cells fall outside this map's grid")
    return cols, rows, cells


def update_occupancy(occ: OccupancyMap, pose: Pose, visible) -> None:
    """Fold one field-of-view sweep into the occupancy belief.

    Ray-hit (terminal) cells gain occupied evidence, swept cells gain free
    evidence; log-odds saturate at the clamp. ``pose`` anchors the sweep but
    carries no evidence itself. Cells outside the sweep are untouched.
    """
    cols, rows, cells = _cell_arrays(occ.spec, visible)
    if not cells:
        return
    terminal = np.fromiter((vc.terminal for vc in cells), dtype=bool, count=len(cells))
    delta = np.where(terminal, LOG_ODDS_HIT, -LOG_ODDS_MISS)
    updated = occ.log_odds[rows, cols] + delta
    occ.log_odds[rows, cols] = np.clip(updated, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP)


def mark_cell_free(occ: OccupancyMap, cell: tuple[int, int]) -> None:
    """Apply one shot of free evidence to a single cell (e.g. under the robot)."""
    if not occ.spec.contains(cell):
        raise GridSpecMismatchError(f"cell {cell} outside this map's grid")
    col, row = cell
    occ.log_odds[row, col] = max(occ.log_odds[row, col] - LOG_ODDS_MISS, -LOG_ODDS_CLAMP)


def mark_cell_occupied(occ: OccupancyMap, cell: tuple[int, int]) -> None:
    """Apply one shot of occupied evidence to a single cell (e.g. a bumped wall)."""
    if not occ.spec.contains(cell):
        raise GridSpecMismatchError(f"cell {cell} outside this map's grid")
    col, row = cell
    occ.log_odds[row, col] = min(occ.log_odds[row, col] + LOG_ODDS_HIT, LOG_ODDS_CLAMP)


def update_semantic(sem: SemanticMap, observation: RelevanceObservation, visible) -> None:
    """Fuse one relevance observation into every visible cell.

    Each cell's posterior is the precision-weighted average of its prior and
    the observation mean under that cell's per-ray measurement variance.
    Cells are independent, so update order is irrelevant. Raises
    DegenerateMeasurementError on zero measurement variance and ValueError
    when a bearing has no variance entry.
    """
    cols, rows, cells = _cell_arrays(sem.spec, visible)
    if not cells:
        return
    per_ray = observation.per_ray_variance
    try:
        meas_var = np.fromiter(
            (per_ray[vc.bearing] for vc in cells), dtype=np.float64, count=len(cells)
        )
    except KeyError as exc:
        raise ValueError(f"observation does not cover bearing {exc.args[0]}") from exc
    if np.any(meas_var <= 0.0):
        raise DegenerateMeasurementError("measurement variance must be strictly positive")

    prior_mu = sem.mu[rows, cols]
    prior_var = sem.var[rows, cols]
    denom = prior_var + meas_var
    sem.mu[rows, cols] = (prior_var * observation.mean + meas_var * prior_mu) / denom
    sem.var[rows, cols] = prior_var * meas_var / denom


def query_cell(sem: SemanticMap, cell: tuple[int, int]) -> tuple[float, float]:
    """Current (mean, variance) belief of one cell; raises on out-of-bounds."""
    if not sem.spec.contains(cell):
        raise ValueError(f"cell {cell} outside grid")
    col, row = cell
    return float(sem.mu[row, col]), float(sem.var[row, col])


def save_snapshot(occ: OccupancyMap, sem: SemanticMap, path) -> None:
    """Write both map layers to one binary snapshot (path or writable file).

    Layout: magic ``GSMAP1``, little-endian u32 width, u32 height, f64
    resolution, f64 origin x, f64 origin y, then row-major f64 log-odds,
    mu, and variance planes.
    """
    if occ.spec != sem.spec:
        raise SnapshotFormatError(
            f"occupancy grid {occ.spec} and semantic grid {sem.spec} do not match"
        )
    spec = occ.spec
    payload = (
        SNAPSHOT_MAGIC
        + struct.pack(
            "<IIddd", spec.width, spec.height, spec.resolution, spec.origin[0], spec.origin[1]
        )
        + occ.log_odds.astype("<f8").tobytes()
        + sem.mu.astype("<f8").tobytes()
        + sem.var.astype("<f8").tobytes()
    )
    if hasattr(path, "write"):
        path.write(payload)
    else:
        with open(path, "wb") as fh:
            fh.write(payload)


def load_snapshot(path) -> tuple[OccupancyMap, SemanticMap]:
    """Read a snapshot written by save_snapshot; round-trips are bit-exact."""
    if hasattr(path, "read"):
        blob = path.read()
    else:
        with open(path, "rb") as fh:
            blob = fh.read()
    if len(blob) < len(SNAPSHOT_MAGIC):
        raise SnapshotFormatError("snapshot file is truncated before the magic")
    if blob[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(
            f"bad snapshot magic {blob[:len(SNAPSHOT_MAGIC)]!r}; expected {SNAPSHOT_MAGIC!r}"
        )
    header_size = len(SNAPSHOT_MAGIC) + struct.calcsize("<IIddd")
    if len(blob) < header_size:
        raise SnapshotFormatError("snapshot file is truncated inside the header")
    width, height, resolution, origin_x, origin_y = struct.unpack(
        "<IIddd", blob[len(SNAPSHOT_MAGIC) : header_size]
    )
    plane = width * height * 8
    expected = header_size + 3 * plane
    if len(blob) != expected:
        raise SnapshotFormatError(
            f"snapshot payload is {len(blob) - header_size} bytes; "
            f"expected {3 * plane} for a {width}x{height} grid"
        )
    spec = GridSpec(width=width, height=height, resolution=resolution, origin=(origin_x, origin_y))
    planes = [
        np.frombuffer(
            blob[header_size + i * plane : header_size + (i + 1) * plane], dtype="<f8"
        ).reshape(height, width).copy()
        for i in range(3)
    ]
    occ = OccupancyMap(spec=spec, log_odds=planes[0])
    sem = SemanticMap(spec=spec, mu=planes[1], var=planes[2])
    return occ, sem


def snapshot_io(occ: OccupancyMap, sem: SemanticMap, path, direction: str):
    """Dispatch to save or load by direction keyword."""
    if direction == "save":
        save_snapshot(occ, sem, path)
        return None
    if direction == "load":
        return load_snapshot(path)
    raise ValueError(f"direction must be 'save' or 'load', got {direction!r}")
