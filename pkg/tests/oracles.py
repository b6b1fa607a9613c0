"""Independent brute-force oracles the implementation is checked against.

Everything here is deliberately written with a different algorithm than the
library: slab intersections instead of stepping, plain Dijkstra instead of
A*, per-cell scans instead of vectorised masks, BFS instead of labelling.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

SQRT2 = math.sqrt(2.0)


def segment_cells(p0, p1, spec):
    """All cells whose interior the segment p0->p1 crosses, ordered by entry.

    Uses slab interval intersection per cell over the whole grid; excludes the
    cell containing p0. Overlap must be strictly positive, so grazing a cell
    corner does not count as crossing.
    """
    x0, y0 = p0
    x1, y1 = p1
    dx = x1 - x0
    dy = y1 - y0
    length = math.hypot(dx, dy)
    if length == 0.0:
        return []
    res = spec.resolution
    ox, oy = spec.origin
    start_cell = (math.floor((x0 - ox) / res), math.floor((y0 - oy) / res))
    out = []
    for row in range(spec.height):
        for col in range(spec.width):
            if (col, row) == start_cell:
                continue
            lo_x = ox + col * res
            hi_x = lo_x + res
            lo_y = oy + row * res
            hi_y = lo_y + res
            t_min, t_max = 0.0, 1.0
            ok = True
            for d, p, lo, hi in ((dx, x0, lo_x, hi_x), (dy, y0, lo_y, hi_y)):
                if d == 0.0:
                    if not lo <= p <= hi:
                        ok = False
                        break
                else:
                    t_a = (lo - p) / d
                    t_b = (hi - p) / d
                    if t_a > t_b:
                        t_a, t_b = t_b, t_a
                    t_min = max(t_min, t_a)
                    t_max = min(t_max, t_b)
            if not ok or t_max - t_min <= 1e-12:
                continue
            out.append((t_min * length, (col, row)))
    out.sort()
    return [(cell, t) for t, cell in out]


def raycast_oracle(position, angle, occ_mask, spec, max_range):
    """Supercover ray enumeration: slab-ordered cells cut at the first wall."""
    far = (
        position[0] + (max_range + 4.0 * spec.resolution) * math.cos(angle),
        position[1] + (max_range + 4.0 * spec.resolution) * math.sin(angle),
    )
    cells = []
    for cell, t_entry in segment_cells(position, far, spec):
        if t_entry > max_range:
            break
        col, row = cell
        cells.append(cell)
        if occ_mask[row, col]:
            return cells, True
    return cells, False


def visible_free_cells_oracle(position, heading, occ_mask, spec, fov):
    """Free cells whose centre is inside the sector with an unblocked sight line."""
    half = fov.horizontal_fov / 2.0
    out = set()
    for row in range(spec.height):
        for col in range(spec.width):
            if occ_mask[row, col]:
                continue
            cx = spec.origin[0] + (col + 0.5) * spec.resolution
            cy = spec.origin[1] + (row + 0.5) * spec.resolution
            r = math.hypot(cx - position[0], cy - position[1])
            if r == 0.0 or r > fov.max_range:
                continue
            bearing = math.atan2(cy - position[1], cx - position[0]) - heading
            bearing = math.atan2(math.sin(bearing), math.cos(bearing))
            if abs(bearing) > half:
                continue
            blocked = False
            for (ccol, crow), _ in segment_cells(position, (cx, cy), spec):
                if (ccol, crow) == (col, row):
                    continue
                if occ_mask[crow, ccol]:
                    blocked = True
                    break
            if not blocked:
                out.add((col, row))
    return out


def frontier_cells_oracle(occ):
    """Per-cell scan: free cells with at least one unknown 8-neighbour."""
    states = occ.classify()
    height, width = states.shape
    out = set()
    for row in range(height):
        for col in range(width):
            if states[row, col] != 1:  # free
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    nr, nc = row + dr, col + dc
                    if 0 <= nr < height and 0 <= nc < width and states[nr, nc] == 0:
                        out.add((col, row))
    return out


def cluster_oracle(cells, min_size):
    """BFS 8-connected components with exhaustive centroid search."""
    remaining = set(cells)
    clusters = []
    while remaining:
        seed = next(iter(remaining))
        comp = {seed}
        queue = deque([seed])
        remaining.discard(seed)
        while queue:
            col, row = queue.popleft()
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nb = (col + dc, row + dr)
                    if nb in remaining:
                        remaining.discard(nb)
                        comp.add(nb)
                        queue.append(nb)
        if len(comp) < min_size:
            continue
        mean_col = sum(c for c, _ in comp) / len(comp)
        mean_row = sum(r for _, r in comp) / len(comp)
        best = min(
            comp,
            key=lambda cell: (
                (cell[0] - mean_col) ** 2 + (cell[1] - mean_row) ** 2,
                cell[1],
                cell[0],
            ),
        )
        clusters.append((frozenset(comp), best))
    clusters.sort(key=lambda item: (item[1][1], item[1][0]))
    return clusters


def dijkstra_cost_oracle(blocked, start, goal):
    """Uniform-cost search over the 8-connected grid; None when unreachable.

    Same move semantics as the planner: diagonal steps may not cut the
    corner of a blocked cell.
    """
    height, width = blocked.shape
    if blocked[start[1], start[0]] or blocked[goal[1], goal[0]]:
        return None
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > dist.get(cell, math.inf):
            continue
        col, row = cell
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                if dc == 0 and dr == 0:
                    continue
                nc, nr = col + dc, row + dr
                if not (0 <= nc < width and 0 <= nr < height) or blocked[nr, nc]:
                    continue
                if dc != 0 and dr != 0 and (blocked[row, nc] or blocked[nr, col]):
                    continue
                nd = d + (SQRT2 if dc != 0 and dr != 0 else 1.0)
                if nd < dist.get((nc, nr), math.inf) - 1e-12:
                    dist[(nc, nr)] = nd
                    heapq.heappush(heap, (nd, (nc, nr)))
    return None


def fusion_oracle(prior_mean, prior_var, measurements):
    """Gaussian fusion in precision form: precisions add, weighted means add."""
    precision = 1.0 / prior_var
    weighted = prior_mean / prior_var
    for mean, var in measurements:
        precision += 1.0 / var
        weighted += mean / var
    return weighted / precision, 1.0 / precision


def expected_improvement_mc(mu, sigma, incumbent, samples, rng):
    """Monte-Carlo E[max(X - incumbent, 0)] with its standard error."""
    draws = rng.normal(mu, sigma, samples)
    gains = np.maximum(draws - incumbent, 0.0)
    return float(gains.mean()), float(gains.std(ddof=1) / math.sqrt(samples))
