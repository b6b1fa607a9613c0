"""Frontier detection and clustering: where known free space meets the unknown."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .mapping import OccupancyMap

MIN_FRONTIER_SIZE = 3

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Frontier:
    """One 8-connected cluster of frontier cells with a representative centre."""

    cells: frozenset[tuple[int, int]]
    centroid: tuple[int, int]

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("frontier has no cells")
        if self.centroid not in self.cells:
            raise ValueError(f"centroid {self.centroid} is not a member cell")

    @property
    def size(self) -> int:
        return len(self.cells)


def detect_frontier_cells(occ: OccupancyMap) -> set[tuple[int, int]]:
    """Free cells with at least one unknown 8-neighbour."""
    unknown = occ.unknown_mask
    near_unknown = ndimage.binary_dilation(unknown, structure=_EIGHT_CONNECTED)
    mask = occ.free_mask & near_unknown
    rows, cols = np.nonzero(mask)
    return {(int(c), int(r)) for r, c in zip(rows, cols)}


def cluster_frontiers(
    cells: set[tuple[int, int]],
    min_size: int = MIN_FRONTIER_SIZE,
) -> list[Frontier]:
    """Group frontier cells into 8-connected clusters, dropping tiny ones.

    Each cluster's centroid is the member cell nearest the cluster's mean
    position, ties broken by (row, col); the output is sorted by centroid
    (row, col) so identical inputs give identical lists.
    """
    if not cells:
        return []
    cols = np.fromiter((c for c, _ in cells), dtype=np.intp, count=len(cells))
    rows = np.fromiter((r for _, r in cells), dtype=np.intp, count=len(cells))
    width = int(cols.max()) + 1
    height = int(rows.max()) + 1
    mask = np.zeros((height, width), dtype=bool)
    mask[rows, cols] = True
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)

    frontiers = []
    for label in range(1, count + 1):
        member_rows, member_cols = np.nonzero(labels == label)
        if member_rows.size < min_size:
            continue
        mean_col = member_cols.mean()
        mean_row = member_rows.mean()
        d2 = (member_cols - mean_col) ** 2 + (member_rows - mean_row) ** 2
        order = sorted(
            range(member_rows.size),
            key=lambda i: (d2[i], int(member_rows[i]), int(member_cols[i])),
        )
        best = order[0]
        centroid = (int(member_cols[best]), int(member_rows[best]))
        members = frozenset(
            (int(c), int(r)) for c, r in zip(member_cols, member_rows)
        )
        frontiers.append(Frontier(cells=members, centroid=centroid))

    frontiers.sort(key=lambda f: (f.centroid[1], f.centroid[0]))
    return frontiers


def frontier_count(frontiers: list[Frontier]) -> int:
    """Number of frontiers currently available to the planner."""
    return len(frontiers)
