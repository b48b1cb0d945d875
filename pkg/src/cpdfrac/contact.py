"""Short-range repulsion between points of distinct bodies."""

from dataclasses import dataclass, field
import math

import numpy as np
from numba import njit, prange

from ._hashgrid import HashGrid


@dataclass
class ContactParams:
    """Contact settings.

    ``horizon`` fixes the length scale of the kernel for every pair; when it
    is None the larger horizon of the two bodies in a pair is used.
    """

    critical_distance: float
    stiffness: float
    pairs: list = field(default_factory=list)
    horizon: float = None

    def __post_init__(self):
        if not self.critical_distance > 0:
            raise ValueError("contact critical distance must be positive")
        if not self.stiffness > 0:
            raise ValueError("contact stiffness must be positive")
        for a, b in self.pairs:
            if a == b:
                raise ValueError("contact pairs must join distinct bodies")


def build_contact_sets(x, body_ids, pairs, critical_distance):
    """Cross-body neighbor lists ``0 < |xj - xi| <= l_c`` in the current configuration.

    Only body pairs listed in ``pairs`` interact.  Returns CSR ``(ptr, idx)``
    with ascending rows.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    body_ids = np.asarray(body_ids, dtype=np.int64)
    n = len(x)
    if not pairs or n == 0:
        return np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    involved = np.unique(np.asarray(pairs).ravel())
    active = np.flatnonzero(np.isin(body_ids, involved))
    grid = HashGrid(x[active], critical_distance)
    ptr_a, idx_a = grid.query(x[active], critical_distance,
                              groups=body_ids[active], query_groups=body_ids[active])
    idx_a = active[idx_a]
    nb = int(body_ids.max()) + 1
    allowed = np.zeros((nb, nb), dtype=bool)
    for a, b in pairs:
        allowed[a, b] = allowed[b, a] = True
    row = np.repeat(np.arange(len(active)), np.diff(ptr_a))
    keep = allowed[body_ids[active][row], body_ids[idx_a]]
    counts = np.zeros(n, dtype=np.int64)
    counts[active] = np.bincount(row[keep], minlength=len(active))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, idx_a[keep]


@njit(parallel=True, cache=True, error_model="numpy")
def _contact_kernel(x, ptr, idx, volume, scale, l_c, out):
    n = len(ptr) - 1
    skipped = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        f0 = 0.0
        f1 = 0.0
        f2 = 0.0
        for p in range(ptr[i], ptr[i + 1]):
            j = idx[p]
            e0 = x[i, 0] - x[j, 0]
            e1 = x[i, 1] - x[j, 1]
            e2 = x[i, 2] - x[j, 2]
            d = np.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
            if d == 0.0:
                skipped[i] += 1
                continue
            s = scale[p] * (l_c - d) / d * volume[j]
            f0 += s * e0
            f1 += s * e1
            f2 += s * e2
        out[i, 0] = f0
        out[i, 1] = f1
        out[i, 2] = f2
    return skipped.sum()


def contact_prefactor(stiffness, horizon):
    return 9.0 * stiffness / (math.pi * horizon ** 5)


def contact_force(x, ptr, idx, volume, body_ids, params, body_horizons):
    """Repulsive contact force density; returns ``(b_con, n_coincident)``.

    The force on ``i`` from ``j`` is ``9 C / (pi delta^5) (l_c - d) V_j`` along
    ``(x_i - x_j)/d``.  ``delta`` is shared by both points of a pair, so every
    pair contributes equal and opposite forces.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    if len(idx) == 0:
        return out, 0
    own = np.repeat(np.arange(len(x)), np.diff(ptr))
    if params.horizon is not None:
        h = np.full(len(idx), float(params.horizon))
    else:
        hb = np.asarray(body_horizons, dtype=np.float64)
        h = np.maximum(hb[body_ids[own]], hb[body_ids[idx]])
    scale = contact_prefactor(params.stiffness, h)
    skipped = _contact_kernel(x, ptr, idx, np.asarray(volume, dtype=np.float64), scale,
                              float(params.critical_distance), out)
    return out, int(skipped)
