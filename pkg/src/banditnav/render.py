"""Rasterise map layers and trajectories to PGM/PPM images.

Plain binary netpbm formats keep rendering dependency-free and byte-exact
for tests. Image row 0 corresponds to grid row 0.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec, swept_cells, world_to_grid
from .mapping import CellState, OccupancyMap, SemanticMap

LAYERS = ("occupancy", "relevance_mean", "relevance_var", "trajectory")

OCCUPANCY_SHADES = {
    CellState.UNKNOWN: 128,
    CellState.FREE: 255,
    CellState.OCCUPIED: 0,
}

TRAJECTORY_COLOR = (255, 0, 0)


def write_pgm(path, image: np.ndarray) -> None:
    """Write a grayscale image as binary PGM (P5)."""
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError(f"PGM image must be 2D, got shape {img.shape}")
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_ppm(path, image: np.ndarray) -> None:
    """Write an RGB image as binary PPM (P6)."""
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM image must be HxWx3, got shape {img.shape}")
    height, width = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def render_occupancy(occ: OccupancyMap) -> np.ndarray:
    """Tri-state shading: unknown mid-gray, free white, occupied black."""
    states = occ.classify()
    out = np.full(states.shape, OCCUPANCY_SHADES[CellState.UNKNOWN], dtype=np.uint8)
    out[states == CellState.FREE] = OCCUPANCY_SHADES[CellState.FREE]
    out[states == CellState.OCCUPIED] = OCCUPANCY_SHADES[CellState.OCCUPIED]
    return out


def render_scalar(values: np.ndarray) -> np.ndarray:
    """Linear min-max normalisation to 0..255; constant layers render mid-gray."""
    v = np.asarray(values, dtype=np.float64)
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return np.full(v.shape, 128, dtype=np.uint8)
    return np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)


def render_trajectory(
    occ: OccupancyMap,
    positions: list[tuple[float, float]],
) -> np.ndarray:
    """Occupancy backdrop with the travelled polyline overlaid in red."""
    gray = render_occupancy(occ)
    img = np.stack([gray, gray, gray], axis=-1)
    spec: GridSpec = occ.spec
    cells: list[tuple[int, int]] = []
    if positions:
        first = world_to_grid(positions[0], spec)
        if first is not None:
            cells.append(first)
    for a, b in zip(positions, positions[1:]):
        crossed, _ = swept_cells(a, b, spec)
        cells.extend(crossed)
    for col, row in cells:
        if spec.contains((col, row)):
            img[row, col] = TRAJECTORY_COLOR
    return img


def render_layer(occ: OccupancyMap, sem: SemanticMap, layer: str) -> np.ndarray:
    """Grayscale image for one scalar layer of a map snapshot."""
    if layer == "occupancy":
        return render_occupancy(occ)
    if layer == "relevance_mean":
        return render_scalar(sem.mu)
    if layer == "relevance_var":
        return render_scalar(sem.var)
    raise ValueError(f"unknown layer {layer!r}; expected one of {LAYERS}")
