"""Pure-Python/numpy kernels: frame rendering, lidar, grid BFS.

Reference implementation of the hot per-step routines. The Cython module
``gridcraft._kernels`` mirrors these bit for bit; ``gridcraft.kernels``
selects whichever is available at import time. Keep the two in lockstep:
any semantic change here must land in ``_kernels.pyx`` too (enforced by the
parity tests).

Conventions: grids are indexed ``[y, x]``; positions are (x, y); ``occ`` is
an int16 occupancy map holding entity kind or -1; palette rows are
tiles 0-5, boundary 6, agent 7, entities 8+kind.
"""

from collections import deque

import numpy as np

BOUNDARY = 6
PALETTE_AGENT = 7
PALETTE_ENTITY_BASE = 8

_OCTANTS = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))


def render_frame(grid, occ, ax, ay, radius, palette):
    """Egocentric palette rendering; out-of-bounds cells use the boundary row."""
    h, w = grid.shape
    size = 2 * radius + 1
    ids = np.full((size, size), BOUNDARY, dtype=np.intp)
    x0, y0 = ax - radius, ay - radius
    gx0, gy0 = max(x0, 0), max(y0, 0)
    gx1, gy1 = min(ax + radius + 1, w), min(ay + radius + 1, h)
    if gx0 < gx1 and gy0 < gy1:
        sub = grid[gy0:gy1, gx0:gx1].astype(np.intp)
        osub = occ[gy0:gy1, gx0:gx1]
        sub = np.where(osub >= 0, osub.astype(np.intp) + PALETTE_ENTITY_BASE, sub)
        ids[gy0 - y0:gy1 - y0, gx0 - x0:gx1 - x0] = sub
    ids[radius, radius] = PALETTE_AGENT
    return np.ascontiguousarray(palette[ids].transpose(2, 0, 1))


def lidar_scan(grid, occ, ax, ay):
    """First blocking hit per octant ray: (kind codes, Chebyshev distances).

    A ray stops at the first entity, impassable tile, or out-of-bounds cell;
    diagonal steps count one unit of distance.
    """
    h, w = grid.shape
    kinds = np.empty(8, dtype=np.int32)
    dists = np.empty(8, dtype=np.int32)
    for r, (dx, dy) in enumerate(_OCTANTS):
        k = 1
        while True:
            x, y = ax + k * dx, ay + k * dy
            if x < 0 or x >= w or y < 0 or y >= h:
                kinds[r] = BOUNDARY
                break
            if occ[y, x] >= 0:
                kinds[r] = PALETTE_ENTITY_BASE + int(occ[y, x])
                break
            t = int(grid[y, x])
            if t != 0 and t != 2:  # not grass, not sand
                kinds[r] = t
                break
            k += 1
        dists[r] = k
    return kinds, dists


def bfs_dist(passable, sx, sy):
    """Multi-source 4-connected BFS over passable tiles; -1 where unreachable."""
    h, w = passable.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    q = deque()
    for i in range(len(sx)):
        x, y = int(sx[i]), int(sy[i])
        if dist[y, x] < 0:
            dist[y, x] = 0
            q.append((x, y))
    while q:
        x, y = q.popleft()
        d = dist[y, x] + 1
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and passable[ny, nx] and dist[ny, nx] < 0:
                dist[ny, nx] = d
                q.append((nx, ny))
    return dist
