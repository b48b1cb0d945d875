"""Uniform spatial hash used for every fixed-radius neighbor query.

Points are binned into cubic cells of edge ``cell``; a query inspects the
3x3(x3) block of cells around the query point.  Queries are run in two passes
(count, then fill) so the output can be written into one flat CSR buffer
without any per-thread allocation, and every row is sorted ascending, which
makes the result independent of thread scheduling.
"""

import numpy as np
from numba import njit, prange


class HashGrid:
    """Cell index over a fixed set of points."""

    def __init__(self, points, cell):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if cell <= 0:
            raise ValueError("cell size must be positive")
        self.points = points
        self.cell = float(cell)
        if len(points):
            self.lo = points.min(axis=0) - 1e-9 * self.cell
            hi = points.max(axis=0)
        else:
            self.lo = np.zeros(3)
            hi = np.zeros(3)
        self.dims = (np.floor((hi - self.lo) / self.cell).astype(np.int64) + 1)
        keys = _cell_keys(points, self.lo, 1.0 / self.cell, self.dims)
        self.order = np.argsort(keys, kind="stable").astype(np.int64)
        self.sorted_keys = keys[self.order]

    def query(self, queries, radius, exclude_self=False, groups=None, query_groups=None):
        """Return CSR ``(ptr, idx)`` of grid points within ``radius`` of each query.

        ``0 < |p - q| <= radius`` is used, so coincident points never match.
        With ``exclude_self`` the i-th query never matches grid point i.  When
        ``groups``/``query_groups`` are given, a match also requires that the
        two group labels differ (used for cross-body contact).
        """
        if radius > self.cell * (1.0 + 1e-12):
            raise ValueError("query radius exceeds the cell size")
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        if groups is None:
            groups = np.zeros(len(self.points), dtype=np.int64)
            query_groups = np.ones(len(queries), dtype=np.int64)
            cross = False
        else:
            groups = np.ascontiguousarray(groups, dtype=np.int64)
            query_groups = np.ascontiguousarray(query_groups, dtype=np.int64)
            cross = True
        args = (queries, self.points, self.order, self.sorted_keys, self.lo,
                1.0 / self.cell, self.dims, radius * radius, exclude_self,
                cross, groups, query_groups)
        counts = _count(*args)
        ptr = np.zeros(len(queries) + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        idx = np.empty(ptr[-1], dtype=np.int64)
        _fill(*args, ptr, idx)
        return ptr, idx


@njit(cache=True)
def _cell_keys(points, lo, inv_h, dims):
    n = points.shape[0]
    keys = np.empty(n, dtype=np.int64)
    for p in range(n):
        cx = int(np.floor((points[p, 0] - lo[0]) * inv_h))
        cy = int(np.floor((points[p, 1] - lo[1]) * inv_h))
        cz = int(np.floor((points[p, 2] - lo[2]) * inv_h))
        keys[p] = (cz * dims[1] + cy) * dims[0] + cx
    return keys


@njit(cache=True)
def _visit(q, queries, points, order, skeys, lo, inv_h, dims, r2, exclude_self,
           cross, groups, qgroups, out, start):
    # returns the number of matches; writes them to out[start:] when out is non-empty
    cx = int(np.floor((queries[q, 0] - lo[0]) * inv_h))
    cy = int(np.floor((queries[q, 1] - lo[1]) * inv_h))
    cz = int(np.floor((queries[q, 2] - lo[2]) * inv_h))
    found = 0
    for dz in range(-1, 2):
        z = cz + dz
        if z < 0 or z >= dims[2]:
            continue
        for dy in range(-1, 2):
            y = cy + dy
            if y < 0 or y >= dims[1]:
                continue
            for dx in range(-1, 2):
                x = cx + dx
                if x < 0 or x >= dims[0]:
                    continue
                key = (z * dims[1] + y) * dims[0] + x
                a = np.searchsorted(skeys, key, side="left")
                b = np.searchsorted(skeys, key, side="right")
                for s in range(a, b):
                    p = order[s]
                    if exclude_self and p == q:
                        continue
                    if cross and groups[p] == qgroups[q]:
                        continue
                    d0 = points[p, 0] - queries[q, 0]
                    d1 = points[p, 1] - queries[q, 1]
                    d2 = points[p, 2] - queries[q, 2]
                    dd = d0 * d0 + d1 * d1 + d2 * d2
                    if dd > 0.0 and dd <= r2:
                        if out.shape[0] > 0:
                            out[start + found] = p
                        found += 1
    return found


@njit(parallel=True, cache=True)
def _count(queries, points, order, skeys, lo, inv_h, dims, r2, exclude_self,
           cross, groups, qgroups):
    n = queries.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    empty = np.empty(0, dtype=np.int64)
    for q in prange(n):
        counts[q] = _visit(q, queries, points, order, skeys, lo, inv_h, dims, r2,
                           exclude_self, cross, groups, qgroups, empty, 0)
    return counts


@njit(parallel=True, cache=True)
def _fill(queries, points, order, skeys, lo, inv_h, dims, r2, exclude_self,
          cross, groups, qgroups, ptr, idx):
    n = queries.shape[0]
    for q in prange(n):
        _visit(q, queries, points, order, skeys, lo, inv_h, dims, r2,
               exclude_self, cross, groups, qgroups, idx, ptr[q])
        idx[ptr[q]:ptr[q + 1]] = np.sort(idx[ptr[q]:ptr[q + 1]])


def radius_neighbors(points, radius):
    """Symmetric fixed-radius neighbor lists of a point set (CSR, ascending)."""
    grid = HashGrid(points, radius)
    return grid.query(points, radius, exclude_self=True)
