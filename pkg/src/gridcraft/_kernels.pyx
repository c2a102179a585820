# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: frame rendering, lidar, grid BFS.

Bit-for-bit mirror of ``gridcraft._kernels_py``; see that module for the
semantics. Parity between the two is covered by tests.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF BOUNDARY = 6
DEF PALETTE_AGENT = 7
DEF PALETTE_ENTITY_BASE = 8

cdef int[8] _OCT_DX = [0, 1, 1, 1, 0, -1, -1, -1]
cdef int[8] _OCT_DY = [-1, -1, 0, 1, 1, 1, 0, -1]


def render_frame(const cnp.int8_t[:, :] grid, const cnp.int16_t[:, :] occ,
                 int ax, int ay, int radius, const cnp.float32_t[:, :] palette):
    cdef int h = grid.shape[0], w = grid.shape[1]
    cdef int size = 2 * radius + 1
    cdef cnp.ndarray[cnp.float32_t, ndim=3] out = np.empty((3, size, size), dtype=np.float32)
    cdef cnp.float32_t[:, :, :] frame = out
    cdef int row, col, x, y, pid, c
    for row in range(size):
        y = ay - radius + row
        for col in range(size):
            x = ax - radius + col
            if x < 0 or x >= w or y < 0 or y >= h:
                pid = BOUNDARY
            elif occ[y, x] >= 0:
                pid = PALETTE_ENTITY_BASE + occ[y, x]
            else:
                pid = grid[y, x]
            if row == radius and col == radius:
                pid = PALETTE_AGENT
            for c in range(3):
                frame[c, row, col] = palette[pid, c]
    return out


def lidar_scan(const cnp.int8_t[:, :] grid, const cnp.int16_t[:, :] occ, int ax, int ay):
    cdef int h = grid.shape[0], w = grid.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] kinds = np.empty(8, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] dists = np.empty(8, dtype=np.int32)
    cdef int r, k, x, y, t
    for r in range(8):
        k = 1
        while True:
            x = ax + k * _OCT_DX[r]
            y = ay + k * _OCT_DY[r]
            if x < 0 or x >= w or y < 0 or y >= h:
                kinds[r] = BOUNDARY
                break
            if occ[y, x] >= 0:
                kinds[r] = PALETTE_ENTITY_BASE + occ[y, x]
                break
            t = grid[y, x]
            if t != 0 and t != 2:
                kinds[r] = t
                break
            k += 1
        dists[r] = k
    return kinds, dists


def bfs_dist(const cnp.uint8_t[:, :] passable, const cnp.int32_t[:] sx, const cnp.int32_t[:] sy):
    cdef int h = passable.shape[0], w = passable.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] out = np.full((h, w), -1, dtype=np.int32)
    cdef cnp.int32_t[:, :] dist = out
    cdef cnp.ndarray[cnp.int32_t, ndim=1] queue = np.empty(h * w, dtype=np.int32)
    cdef cnp.int32_t[:] q = queue
    cdef int head = 0, tail = 0
    cdef int i, x, y, d, nx, ny, j
    cdef int[4] ndx = [0, 1, 0, -1]
    cdef int[4] ndy = [-1, 0, 1, 0]
    for i in range(sx.shape[0]):
        x = sx[i]
        y = sy[i]
        if dist[y, x] < 0:
            dist[y, x] = 0
            q[tail] = y * w + x
            tail += 1
    while head < tail:
        i = q[head]
        head += 1
        x = i % w
        y = i // w
        d = dist[y, x] + 1
        for j in range(4):
            nx = x + ndx[j]
            ny = y + ndy[j]
            if 0 <= nx < w and 0 <= ny < h and passable[ny, nx] != 0 and dist[ny, nx] < 0:
                dist[ny, nx] = d
                q[tail] = ny * w + nx
                tail += 1
    return out
