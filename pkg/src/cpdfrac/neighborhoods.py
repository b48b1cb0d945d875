"""One-, two- and three-neighbor interaction tables.

Tables are built once on the reference configuration.  Storage keeps every
unordered pair ``{j, k}`` and triple ``{j, k, l}`` once, as slot indices into
the owner's one-neighbor list; the ordered sets of the model are the full
permutation expansion of these (2 orderings per pair, 6 per triple).  The
counts ``n2``/``n3`` are ordered counts, so the effective volumes are the
ones of the ordered sets.  ``h2(i)`` and ``h3(i)`` return the ordered view.
"""

from dataclasses import dataclass
from itertools import permutations
import hashlib
import struct

import numpy as np
from numba import njit, prange

from ._hashgrid import radius_neighbors
from .geometry import full_horizon_volume

DEGENERACY_TOL = 1e-12
PAIR_ORDERINGS = 2
TRIPLE_ORDERINGS = 6


@dataclass
class InteractionTables:
    horizon: float
    dim: int
    # one-neighbor (directed), CSR over points
    h1_ptr: np.ndarray
    h1_idx: np.ndarray
    h1_length: np.ndarray
    h1_bond: np.ndarray
    bonds: np.ndarray
    # two-neighbor, unordered, slots into the owner's h1 row
    h2_ptr: np.ndarray
    h2_slots: np.ndarray
    h2_area: np.ndarray
    # three-neighbor, unordered, signed reference volume of (j, k, l) as stored
    h3_ptr: np.ndarray
    h3_slots: np.ndarray
    h3_volume: np.ndarray
    fullness: np.ndarray
    point_volume: float

    @property
    def n_points(self):
        return len(self.h1_ptr) - 1

    @property
    def n1(self):
        return np.diff(self.h1_ptr)

    @property
    def n2(self):
        return PAIR_ORDERINGS * np.diff(self.h2_ptr)

    @property
    def n3(self):
        return TRIPLE_ORDERINGS * np.diff(self.h3_ptr)

    @property
    def neighborhood_volume(self):
        return self.fullness * full_horizon_volume(self.horizon, self.dim)

    def effective_volumes(self):
        return effective_volumes(self)

    def h1(self, i):
        return self.h1_idx[self.h1_ptr[i]:self.h1_ptr[i + 1]]

    def h2(self, i):
        """Ordered pairs ``(j, k)`` of point ``i``."""
        nb = self.h1(i)
        out = []
        for a, b in self.h2_slots[self.h2_ptr[i]:self.h2_ptr[i + 1]]:
            out.append((nb[a], nb[b]))
            out.append((nb[b], nb[a]))
        return out

    def h3(self, i):
        """Ordered triples ``(j, k, l)`` of point ``i``."""
        nb = self.h1(i)
        out = []
        for slots in self.h3_slots[self.h3_ptr[i]:self.h3_ptr[i + 1]]:
            out.extend(tuple(nb[s] for s in p) for p in permutations(slots))
        return out


def build_h1(positions, horizon):
    """Directed one-neighbor lists ``0 < |Xj - Xi| <= horizon`` as CSR (ascending)."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    return radius_neighbors(positions, horizon)


@njit(cache=True)
def _pair_ok(pos, i, j, k, r2, amin):
    ejk0 = pos[k, 0] - pos[j, 0]
    ejk1 = pos[k, 1] - pos[j, 1]
    ejk2 = pos[k, 2] - pos[j, 2]
    djk = ejk0 * ejk0 + ejk1 * ejk1 + ejk2 * ejk2
    if not (djk > 0.0 and djk <= r2):
        return -1.0
    p0 = pos[j, 0] - pos[i, 0]
    p1 = pos[j, 1] - pos[i, 1]
    p2 = pos[j, 2] - pos[i, 2]
    q0 = pos[k, 0] - pos[i, 0]
    q1 = pos[k, 1] - pos[i, 1]
    q2 = pos[k, 2] - pos[i, 2]
    c0 = p1 * q2 - p2 * q1
    c1 = p2 * q0 - p0 * q2
    c2 = p0 * q1 - p1 * q0
    area = np.sqrt(c0 * c0 + c1 * c1 + c2 * c2)
    if area < amin:
        return -1.0
    return area


@njit(parallel=True, cache=True)
def _h2_count(pos, ptr, idx, r2, amin):
    n = len(ptr) - 1
    counts = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        s, e = ptr[i], ptr[i + 1]
        c = 0
        for a in range(s, e):
            for b in range(a + 1, e):
                if _pair_ok(pos, i, idx[a], idx[b], r2, amin) >= 0.0:
                    c += 1
        counts[i] = c
    return counts


@njit(parallel=True, cache=True)
def _h2_fill(pos, ptr, idx, r2, amin, out_ptr, slots, area):
    n = len(ptr) - 1
    for i in prange(n):
        s, e = ptr[i], ptr[i + 1]
        w = out_ptr[i]
        for a in range(s, e):
            for b in range(a + 1, e):
                ar = _pair_ok(pos, i, idx[a], idx[b], r2, amin)
                if ar >= 0.0:
                    slots[w, 0] = a - s
                    slots[w, 1] = b - s
                    area[w] = ar
                    w += 1


def build_h2(h1_ptr, h1_idx, positions, horizon, tol=DEGENERACY_TOL):
    """Unordered two-neighbor sets: returns ``(ptr, slots, reference_area)``."""
    r2 = horizon * horizon
    amin = tol * horizon ** 2
    counts = _h2_count(positions, h1_ptr, h1_idx, r2, amin)
    ptr = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    slots = np.empty((ptr[-1], 2), dtype=np.uint16)
    area = np.empty(ptr[-1])
    _h2_fill(positions, h1_ptr, h1_idx, r2, amin, ptr, slots, area)
    return ptr, slots, area


@njit(cache=True)
def _adjacency(pos, nb, r2):
    m = len(nb)
    adj = np.zeros((m, m), dtype=np.bool_)
    for a in range(m):
        for b in range(a + 1, m):
            d0 = pos[nb[a], 0] - pos[nb[b], 0]
            d1 = pos[nb[a], 1] - pos[nb[b], 1]
            d2 = pos[nb[a], 2] - pos[nb[b], 2]
            dd = d0 * d0 + d1 * d1 + d2 * d2
            ok = dd > 0.0 and dd <= r2
            adj[a, b] = ok
            adj[b, a] = ok
    return adj


@njit(cache=True)
def _triple_volume(pos, i, j, k, l):
    p0 = pos[j, 0] - pos[i, 0]
    p1 = pos[j, 1] - pos[i, 1]
    p2 = pos[j, 2] - pos[i, 2]
    q0 = pos[k, 0] - pos[i, 0]
    q1 = pos[k, 1] - pos[i, 1]
    q2 = pos[k, 2] - pos[i, 2]
    r0 = pos[l, 0] - pos[i, 0]
    r1 = pos[l, 1] - pos[i, 1]
    r2 = pos[l, 2] - pos[i, 2]
    return (p1 * q2 - p2 * q1) * r0 + (p2 * q0 - p0 * q2) * r1 + (p0 * q1 - p1 * q0) * r2


@njit(parallel=True, cache=True)
def _h3_scan(pos, ptr, idx, r2, vmin, out_ptr, slots, vol, fill):
    n = len(ptr) - 1
    counts = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        s = ptr[i]
        nb = idx[s:ptr[i + 1]]
        m = len(nb)
        adj = _adjacency(pos, nb, r2)
        w = out_ptr[i] if fill else 0
        c = 0
        for a in range(m):
            for b in range(a + 1, m):
                if not adj[a, b]:
                    continue
                for d in range(b + 1, m):
                    if not (adj[a, d] and adj[b, d]):
                        continue
                    v = _triple_volume(pos, i, nb[a], nb[b], nb[d])
                    if abs(v) < vmin:
                        continue
                    if fill:
                        slots[w + c, 0] = a
                        slots[w + c, 1] = b
                        slots[w + c, 2] = d
                        vol[w + c] = v
                    c += 1
        counts[i] = c
    return counts


def build_h3(h1_ptr, h1_idx, positions, horizon, dim=3, tol=DEGENERACY_TOL):
    """Unordered three-neighbor sets: returns ``(ptr, slots, signed_reference_volume)``.

    Two-dimensional clouds have no three-neighbor interactions.
    """
    n = len(h1_ptr) - 1
    if dim == 2:
        return np.zeros(n + 1, dtype=np.int64), np.empty((0, 3), np.uint16), np.empty(0)
    r2 = horizon * horizon
    vmin = tol * horizon ** 3
    no_slots = np.empty((0, 3), dtype=np.uint16)
    counts = _h3_scan(positions, h1_ptr, h1_idx, r2, vmin, np.zeros(n + 1, np.int64),
                      no_slots, np.empty(0), False)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    slots = np.empty((ptr[-1], 3), dtype=np.uint16)
    vol = np.empty(ptr[-1])
    _h3_scan(positions, h1_ptr, h1_idx, r2, vmin, ptr, slots, vol, True)
    return ptr, slots, vol


def _bond_ids(ptr, idx):
    owner = np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))
    lo = np.minimum(owner, idx)
    hi = np.maximum(owner, idx)
    n = len(ptr) - 1
    key = lo * n + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    bonds = np.column_stack([uniq // n, uniq % n]).astype(np.int64)
    return bonds, inverse.astype(np.int64)


def build_tables(cloud, horizon, two_neighbor=True, three_neighbor=True, tol=DEGENERACY_TOL):
    """Build all interaction tables of a cloud.

    ``two_neighbor``/``three_neighbor`` switch off orders whose constant is
    zero; those tables stay empty.  Three-neighbor sets exist only in 3D.
    """
    pos = cloud.positions
    ptr, idx = build_h1(pos, horizon)
    if np.diff(ptr).max(initial=0) > np.iinfo(np.uint16).max:
        raise ValueError("too many one-neighbor interactions per point for slot storage")
    owner = np.repeat(np.arange(len(pos)), np.diff(ptr))
    length = np.linalg.norm(pos[idx] - pos[owner], axis=1)
    bonds, bond_of = _bond_ids(ptr, idx)
    n = len(pos)
    if two_neighbor:
        p2, s2, a2 = build_h2(ptr, idx, pos, horizon, tol)
    else:
        p2, s2, a2 = np.zeros(n + 1, np.int64), np.empty((0, 2), np.uint16), np.empty(0)
    if three_neighbor:
        p3, s3, v3 = build_h3(ptr, idx, pos, horizon, cloud.dim, tol)
    else:
        p3, s3, v3 = np.zeros(n + 1, np.int64), np.empty((0, 3), np.uint16), np.empty(0)
    return InteractionTables(
        horizon=float(horizon), dim=cloud.dim,
        h1_ptr=ptr, h1_idx=idx, h1_length=length, h1_bond=bond_of, bonds=bonds,
        h2_ptr=p2, h2_slots=s2, h2_area=a2,
        h3_ptr=p3, h3_slots=s3, h3_volume=v3,
        fullness=np.asarray(cloud.fullness, dtype=np.float64).copy(),
        point_volume=float(cloud.point_volume),
    )


def _share(total, count):
    out = np.zeros_like(total)
    nz = count > 0
    out[nz] = total[nz] / count[nz]
    return out


def effective_volumes(tables):
    """Return ``(V_H, V1, V2, V3)``; a zero count gives a zero effective volume."""
    vh = tables.neighborhood_volume
    return vh, _share(vh, tables.n1), _share(vh ** 2, tables.n2), _share(vh ** 3, tables.n3)


def _segment_cuts(xa, xb, crack):
    a = np.asarray(crack.a, float)
    b = np.asarray(crack.b, float)
    t = np.asarray(crack.thickness_dir, float)
    ab = b - a
    normal = np.cross(ab, t)
    if not np.linalg.norm(normal) > 0:
        raise ValueError("crack thickness direction is parallel to the crack segment")
    sa = (xa - a) @ normal
    sb = (xb - a) @ normal
    crossing = sa * sb < 0.0
    frac = np.where(crossing, sa / np.where(crossing, sa - sb, 1.0), 0.0)
    hit = xa + frac[:, None] * (xb - xa)
    along = (hit - a) @ ab / (ab @ ab)
    return crossing & (along >= 0.0) & (along <= 1.0)


def precrack_mask(tables, positions, cracks):
    """Boolean mask over bonds whose reference segment crosses any crack."""
    cut = np.zeros(len(tables.bonds), dtype=bool)
    if len(tables.bonds) == 0:
        return cut
    xa = positions[tables.bonds[:, 0]]
    xb = positions[tables.bonds[:, 1]]
    for crack in cracks:
        cut |= _segment_cuts(xa, xb, crack)
    return cut


def apply_precrack(d1, tables, positions, cracks):
    """Mark bonds crossing the cracks as failed; counts and volumes are untouched."""
    mask = precrack_mask(tables, positions, cracks)
    d1[mask] = 0
    return d1


# -- binary cache --------------------------------------------------------------

CACHE_MAGIC = b"CKPD"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIIQQQQQdd")


def tables_cache_key(cloud, horizon, two_neighbor=True, three_neighbor=True, tol=DEGENERACY_TOL):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(cloud.positions).tobytes())
    h.update(np.ascontiguousarray(cloud.fullness).tobytes())
    h.update(struct.pack("<ddi??", horizon, cloud.point_volume, cloud.dim,
                         two_neighbor, three_neighbor))
    h.update(struct.pack("<dI", tol, CACHE_VERSION))
    return h.hexdigest()


def save_tables(path, tables):
    """Write tables to ``path``.

    Layout: a little-endian header (magic ``CKPD``, format version, dim,
    point/bond/one/two/three-neighbor counts, horizon, point volume) followed
    by the raw arrays in a fixed order.
    """
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, tables.dim, tables.n_points,
                          len(tables.bonds), len(tables.h1_idx), len(tables.h2_area),
                          len(tables.h3_volume), tables.horizon, tables.point_volume)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in _cache_arrays(tables):
            fh.write(np.ascontiguousarray(arr).tobytes())


def _cache_arrays(t):
    return (t.fullness, t.h1_ptr, t.h1_idx, t.h1_length, t.h1_bond, t.bonds,
            t.h2_ptr, t.h2_slots, t.h2_area, t.h3_ptr, t.h3_slots, t.h3_volume)


def load_tables(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, dim, n, nb, m1, m2, m3, horizon, dv = _HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC:
        raise ValueError(f"{path}: not an interaction-table cache")
    if version != CACHE_VERSION:
        raise ValueError(f"{path}: cache version {version} unsupported")
    specs = [(np.float64, (n,)), (np.int64, (n + 1,)), (np.int64, (m1,)),
             (np.float64, (m1,)), (np.int64, (m1,)), (np.int64, (nb, 2)),
             (np.int64, (n + 1,)), (np.uint16, (m2, 2)), (np.float64, (m2,)),
             (np.int64, (n + 1,)), (np.uint16, (m3, 3)), (np.float64, (m3,))]
    off = _HEADER.size
    arrays = []
    for dtype, shape in specs:
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=off).reshape(shape).copy()
        off += arr.nbytes
        arrays.append(arr)
    (beta, p1, i1, l1, b1, bonds, p2, s2, a2, p3, s3, v3) = arrays
    return InteractionTables(horizon, dim, p1, i1, l1, b1, bonds, p2, s2, a2, p3, s3, v3,
                             beta, dv)
