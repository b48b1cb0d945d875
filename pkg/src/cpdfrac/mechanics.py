"""Material constants and the internal force-density kernels.

Every kernel sums over the owner's interactions in stored order and writes
only the owner's row, so the output does not depend on the thread count.

Pairs and triples are stored unordered (see ``neighborhoods``).  Because the
potentials depend only on ``|a|`` and ``|v|``, the sum of the two-neighbor
integrand over both orderings of ``{j, k}`` equals ``2 * (dx_ik - dx_ij) x g``
with ``g = dpsi2/da``, and the sum of the three-neighbor integrand over the six
orderings of ``{j, k, l}`` equals ``6 * s * (b x c + c x a + a x b)`` with
``s = dpsi3/dv``.  The kernels evaluate these closed sums.
"""

from dataclasses import dataclass
import math

import numpy as np
from numba import njit, prange

from .neighborhoods import PAIR_ORDERINGS, TRIPLE_ORDERINGS

COLLAPSE_TOL = 1e-12
STRETCH_MEASURES = ("displacement_norm", "length_ratio")


def lame_parameters(E, nu):
    """Return ``(lambda, mu)``."""
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio out of range (-1, 0.5): {nu}")
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


def derive_constants_2d(E, nu, horizon):
    """Interaction constants ``(C1, C2)`` of a plane body."""
    if nu in (1.0, -1.0):
        raise ValueError("Poisson ratio of +-1 makes the two-dimensional constants singular")
    c1 = 12.0 / (math.pi * horizon ** 3) * E / (nu + 1.0)
    c2 = 27.0 / (16.0 * math.pi * horizon ** 6) * E * (1.0 - 3.0 * nu) / (nu * nu - 1.0)
    return c1, c2


def derive_constants_3d(E, nu, horizon):
    """Interaction constants ``(C1, C3)`` of a solid body (``C2 = 0``)."""
    if nu == 0.5:
        raise ValueError("Poisson ratio of 0.5 makes the Lame parameter singular")
    mu = E / (2.0 * (1.0 + nu))
    # lambda - mu, factored so that nu = 1/4 gives exactly zero
    lam_minus_mu = E * (4.0 * nu - 1.0) / (2.0 * (1.0 + nu) * (1.0 - 2.0 * nu))
    c1 = 30.0 * mu / (math.pi * horizon ** 4)
    c3 = 32.0 / (math.pi ** 4 * horizon ** 12) * lam_minus_mu
    return c1, c3


@dataclass(frozen=True)
class Material:
    """Isotropic linear-elastic brittle material with its horizon.

    ``critical_stretch`` overrides the estimate from ``fracture_energy``.
    """

    density: float
    youngs_modulus: float
    poisson_ratio: float
    fracture_energy: float
    horizon: float
    dim: int = 3
    critical_stretch_override: float = None

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError("density must be positive")
        if not self.youngs_modulus > 0:
            raise ValueError("Young's modulus must be positive")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise ValueError(f"Poisson ratio out of range (-1, 0.5): {self.poisson_ratio}")
        if not self.fracture_energy > 0:
            raise ValueError("fracture energy must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")

    @property
    def lame_lambda(self):
        return lame_parameters(self.youngs_modulus, self.poisson_ratio)[0]

    @property
    def shear_modulus(self):
        return lame_parameters(self.youngs_modulus, self.poisson_ratio)[1]

    @property
    def bulk_modulus(self):
        from .damage import bulk_modulus
        return bulk_modulus(self.youngs_modulus, self.poisson_ratio, self.dim)

    @property
    def constants(self):
        """``(C1, C2, C3)``."""
        E, nu, d = self.youngs_modulus, self.poisson_ratio, self.horizon
        if self.dim == 2:
            c1, c2 = derive_constants_2d(E, nu, d)
            return c1, c2, 0.0
        c1, c3 = derive_constants_3d(E, nu, d)
        return c1, 0.0, c3

    @property
    def critical_stretch(self):
        if self.critical_stretch_override is not None:
            return self.critical_stretch_override
        from .damage import critical_stretch
        return critical_stretch(self.fracture_energy, self.youngs_modulus,
                                self.poisson_ratio, self.horizon, self.dim)

    def wave_speed(self):
        """Dilatational wave speed."""
        E, nu = self.youngs_modulus, self.poisson_ratio
        return math.sqrt(E * (1 - nu) / ((1 + nu) * (1 - 2 * nu) * self.density))


def bond_stretch(dX, dx, measure="displacement_norm"):
    """Stretch of one-neighbor interactions (vectorized over the leading axis).

    ``displacement_norm`` is ``|dx - dX| / |dX|``; ``length_ratio`` is the
    rotation-invariant ``(|dx| - |dX|) / |dX|``.
    """
    dX = np.asarray(dX, dtype=float)
    dx = np.asarray(dx, dtype=float)
    L = np.linalg.norm(dX, axis=-1)
    if np.any(L <= 0):
        raise ValueError("zero-length reference bond")
    if measure == "displacement_norm":
        return np.linalg.norm(dx - dX, axis=-1) / L
    if measure == "length_ratio":
        return (np.linalg.norm(dx, axis=-1) - L) / L
    raise ValueError(f"unknown stretch measure {measure!r}")


# -- kernels -------------------------------------------------------------------

@njit(parallel=True, cache=True, error_model="numpy")
def _b1_kernel(x, ptr, idx, L, bond, d1, v1, c1, lmin, out):
    n = len(ptr) - 1
    skipped = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        f0 = 0.0
        f1 = 0.0
        f2 = 0.0
        w = c1 * v1[i]
        for p in range(ptr[i], ptr[i + 1]):
            if d1[bond[p]] == 0:
                continue
            j = idx[p]
            e0 = x[j, 0] - x[i, 0]
            e1 = x[j, 1] - x[i, 1]
            e2 = x[j, 2] - x[i, 2]
            l = np.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
            if l < lmin:
                skipped[i] += 1
                continue
            s = w * (1.0 / L[p] - 1.0 / l)
            f0 += s * e0
            f1 += s * e1
            f2 += s * e2
        out[i, 0] = f0
        out[i, 1] = f1
        out[i, 2] = f2
    return skipped.sum()


@njit(parallel=True, cache=True, error_model="numpy")
def _b2_kernel(x, ptr1, idx1, bond1, d1, ptr2, slots, A, v2, c2, cascade, amin, out):
    n = len(ptr1) - 1
    skipped = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        f0 = 0.0
        f1 = 0.0
        f2 = 0.0
        base = ptr1[i]
        w = 2.0 * c2 * v2[i]
        for q in range(ptr2[i], ptr2[i + 1]):
            sj = base + slots[q, 0]
            sk = base + slots[q, 1]
            if cascade and (d1[bond1[sj]] == 0 or d1[bond1[sk]] == 0):
                continue
            j = idx1[sj]
            k = idx1[sk]
            p0 = x[j, 0] - x[i, 0]
            p1 = x[j, 1] - x[i, 1]
            p2 = x[j, 2] - x[i, 2]
            q0 = x[k, 0] - x[i, 0]
            q1 = x[k, 1] - x[i, 1]
            q2 = x[k, 2] - x[i, 2]
            a0 = p1 * q2 - p2 * q1
            a1 = p2 * q0 - p0 * q2
            a2 = p0 * q1 - p1 * q0
            am = np.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
            if am < amin:
                skipped[i] += 1
                continue
            g = w * (1.0 / A[q] - 1.0 / am)
            r0 = q0 - p0
            r1 = q1 - p1
            r2 = q2 - p2
            f0 += g * (r1 * a2 - r2 * a1)
            f1 += g * (r2 * a0 - r0 * a2)
            f2 += g * (r0 * a1 - r1 * a0)
        out[i, 0] = f0
        out[i, 1] = f1
        out[i, 2] = f2
    return skipped.sum()


@njit(parallel=True, cache=True, error_model="numpy")
def _b3_kernel(x, ptr1, idx1, bond1, d1, ptr3, slots, V, v3, c3, cascade, vmin, out):
    n = len(ptr1) - 1
    skipped = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        f0 = 0.0
        f1 = 0.0
        f2 = 0.0
        base = ptr1[i]
        w = 6.0 * c3 * v3[i]
        for q in range(ptr3[i], ptr3[i + 1]):
            sj = base + slots[q, 0]
            sk = base + slots[q, 1]
            sl = base + slots[q, 2]
            if cascade and (d1[bond1[sj]] == 0 or d1[bond1[sk]] == 0 or d1[bond1[sl]] == 0):
                continue
            j = idx1[sj]
            k = idx1[sk]
            l = idx1[sl]
            a0 = x[j, 0] - x[i, 0]
            a1 = x[j, 1] - x[i, 1]
            a2 = x[j, 2] - x[i, 2]
            b0 = x[k, 0] - x[i, 0]
            b1 = x[k, 1] - x[i, 1]
            b2 = x[k, 2] - x[i, 2]
            c0 = x[l, 0] - x[i, 0]
            c1_ = x[l, 1] - x[i, 1]
            c2_ = x[l, 2] - x[i, 2]
            # b x c, c x a, a x b
            bc0 = b1 * c2_ - b2 * c1_
            bc1 = b2 * c0 - b0 * c2_
            bc2 = b0 * c1_ - b1 * c0
            ca0 = c1_ * a2 - c2_ * a1
            ca1 = c2_ * a0 - c0 * a2
            ca2 = c0 * a1 - c1_ * a0
            ab0 = a1 * b2 - a2 * b1
            ab1 = a2 * b0 - a0 * b2
            ab2 = a0 * b1 - a1 * b0
            v = ab0 * c0 + ab1 * c1_ + ab2 * c2_
            av = abs(v)
            if av < vmin:
                skipped[i] += 1
                continue
            s = w * (1.0 / abs(V[q]) - 1.0 / av) * v
            f0 += s * (bc0 + ca0 + ab0)
            f1 += s * (bc1 + ca1 + ab1)
            f2 += s * (bc2 + ca2 + ab2)
        out[i, 0] = f0
        out[i, 1] = f1
        out[i, 2] = f2
    return skipped.sum()


def _out(tables, out):
    if out is None:
        return np.zeros((tables.n_points, 3))
    return out


def force_b1(x, tables, d1, c1, v1=None, out=None):
    """One-neighbor force density; returns ``(b1, n_collapsed)``."""
    out = _out(tables, out)
    if v1 is None:
        v1 = tables.effective_volumes()[1]
    skipped = _b1_kernel(np.ascontiguousarray(x), tables.h1_ptr, tables.h1_idx,
                         tables.h1_length, tables.h1_bond, d1, v1, float(c1),
                         COLLAPSE_TOL * tables.horizon, out)
    return out, int(skipped)


def force_b2(x, tables, d1, c2, v2=None, cascade=True, out=None):
    """Two-neighbor force density; returns ``(b2, n_collapsed)``."""
    out = _out(tables, out)
    if v2 is None:
        v2 = tables.effective_volumes()[2]
    skipped = _b2_kernel(np.ascontiguousarray(x), tables.h1_ptr, tables.h1_idx,
                         tables.h1_bond, d1, tables.h2_ptr, tables.h2_slots,
                         tables.h2_area, v2, float(c2), bool(cascade),
                         COLLAPSE_TOL * tables.horizon ** 2, out)
    return out, int(skipped)


def force_b3(x, tables, d1, c3, v3=None, cascade=True, out=None):
    """Three-neighbor force density; returns ``(b3, n_collapsed)``."""
    out = _out(tables, out)
    if v3 is None:
        v3 = tables.effective_volumes()[3]
    skipped = _b3_kernel(np.ascontiguousarray(x), tables.h1_ptr, tables.h1_idx,
                         tables.h1_bond, d1, tables.h3_ptr, tables.h3_slots,
                         tables.h3_volume, v3, float(c3), bool(cascade),
                         COLLAPSE_TOL * tables.horizon ** 3, out)
    return out, int(skipped)


def total_internal(x, tables, d1, material, cascade=True, volumes=None):
    """``b1 + b2 + b3``; orders with a zero constant are not evaluated.

    Returns ``(b_int, n_collapsed)``.
    """
    c1, c2, c3 = material.constants
    if volumes is None:
        volumes = tables.effective_volumes()
    _, v1, v2, v3 = volumes
    b, skipped = force_b1(x, tables, d1, c1, v1)
    if c2 != 0.0 and len(tables.h2_area):
        b2, s2 = force_b2(x, tables, d1, c2, v2, cascade)
        b += b2
        skipped += s2
    if c3 != 0.0 and len(tables.h3_volume):
        b3, s3 = force_b3(x, tables, d1, c3, v3, cascade)
        b += b3
        skipped += s3
    return b, skipped


# -- potentials (observables) --------------------------------------------------

def _owners(ptr):
    return np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))


def point_energy_b1(x, tables, d1, c1, v1=None):
    """Per-point one-neighbor energy ``sum_j d1 psi1 V1``."""
    if v1 is None:
        v1 = tables.effective_volumes()[1]
    own = _owners(tables.h1_ptr)
    l = np.linalg.norm(x[tables.h1_idx] - x[own], axis=1)
    L = tables.h1_length
    psi = 0.5 * c1 * L * (l / L - 1.0) ** 2 * d1[tables.h1_bond]
    return np.bincount(own, psi * v1[own], minlength=tables.n_points)


def point_energy_b2(x, tables, d1, c2, v2=None, cascade=True):
    """Per-point two-neighbor energy over the ordered pair set."""
    if v2 is None:
        v2 = tables.effective_volumes()[2]
    own = _owners(tables.h2_ptr)
    sj = tables.h1_ptr[own] + tables.h2_slots[:, 0]
    sk = tables.h1_ptr[own] + tables.h2_slots[:, 1]
    j, k = tables.h1_idx[sj], tables.h1_idx[sk]
    a = np.linalg.norm(np.cross(x[j] - x[own], x[k] - x[own]), axis=1)
    A = tables.h2_area
    psi = 0.5 * c2 * A * (a / A - 1.0) ** 2
    if cascade:
        psi = psi * d1[tables.h1_bond[sj]] * d1[tables.h1_bond[sk]]
    return np.bincount(own, PAIR_ORDERINGS * psi * v2[own], minlength=tables.n_points)


def point_energy_b3(x, tables, d1, c3, v3=None, cascade=True):
    """Per-point three-neighbor energy over the ordered triple set."""
    if v3 is None:
        v3 = tables.effective_volumes()[3]
    own = _owners(tables.h3_ptr)
    base = tables.h1_ptr[own]
    s = [base + tables.h3_slots[:, c] for c in range(3)]
    j, k, l = (tables.h1_idx[si] for si in s)
    xi = x[own]
    v = np.einsum("ij,ij->i", np.cross(x[j] - xi, x[k] - xi), x[l] - xi)
    V = np.abs(tables.h3_volume)
    psi = 0.5 * c3 * V * (np.abs(v) / V - 1.0) ** 2
    if cascade:
        psi = psi * d1[tables.h1_bond[s[0]]] * d1[tables.h1_bond[s[1]]] * d1[tables.h1_bond[s[2]]]
    return np.bincount(own, TRIPLE_ORDERINGS * psi * v3[own], minlength=tables.n_points)
