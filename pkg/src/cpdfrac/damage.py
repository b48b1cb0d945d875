"""Critical stretch, bond failure flags with cascade, and point damage."""

from dataclasses import dataclass
import math

import numpy as np
from numba import njit, prange


def bulk_modulus(E, nu, dim):
    """Bulk modulus; the plane value ``E / (2 (1 - nu))`` is used for ``dim == 2``."""
    if dim == 3:
        return E / (3.0 * (1.0 - 2.0 * nu))
    return E / (2.0 * (1.0 - nu))


def critical_stretch(G_c, E, nu, horizon, dim):
    """Critical one-neighbor stretch from the fracture energy."""
    G = E / (2.0 * (1.0 + nu))
    K = bulk_modulus(E, nu, dim)
    if dim == 3:
        stiff = 3.0 * G + (3.0 / 4.0) ** 4 * (K - 5.0 * G / 3.0)
    elif dim == 2:
        stiff = 6.0 / math.pi * G + 16.0 / (9.0 * math.pi ** 2) * (K - 2.0 * G)
    else:
        raise ValueError("dim must be 2 or 3")
    radicand = G_c / (horizon * stiff)
    if not radicand >= 0 or not math.isfinite(radicand):
        raise ValueError(
            f"critical stretch undefined: G_c / (delta * {stiff:.6g}) = {radicand:.6g} "
            f"is not a non-negative number (E={E}, nu={nu})")
    return math.sqrt(radicand)


def pair_failure(d_ij, d_ik):
    """Two-neighbor failure flag: intact only when both bonds are intact."""
    return d_ij * d_ik


def triple_failure(d_ij, d_ik, d_il):
    """Three-neighbor failure flag: intact only when all three bonds are intact."""
    return d_ij * d_ik * d_il


@dataclass
class FailureState:
    """Per-bond intact flags (one entry per undirected bond) and point damage."""

    d1: np.ndarray
    damage: np.ndarray
    broken_this_step: int = 0

    @classmethod
    def intact(cls, tables):
        return cls(np.ones(len(tables.bonds), dtype=np.uint8), np.zeros(tables.n_points))

    @property
    def n_broken(self):
        return int(len(self.d1) - np.count_nonzero(self.d1))


@njit(parallel=True, cache=True, error_model="numpy")
def _fail_kernel(X, x, bonds, d1, eps_c, protected, ratio_measure, newly):
    nb = bonds.shape[0]
    for b in prange(nb):
        newly[b] = 0
        if d1[b] == 0 or protected[b]:
            continue
        i = bonds[b, 0]
        j = bonds[b, 1]
        R0 = X[j, 0] - X[i, 0]
        R1 = X[j, 1] - X[i, 1]
        R2 = X[j, 2] - X[i, 2]
        r0 = x[j, 0] - x[i, 0]
        r1 = x[j, 1] - x[i, 1]
        r2 = x[j, 2] - x[i, 2]
        L = np.sqrt(R0 * R0 + R1 * R1 + R2 * R2)
        if ratio_measure:
            eps = (np.sqrt(r0 * r0 + r1 * r1 + r2 * r2) - L) / L
        else:
            e0 = r0 - R0
            e1 = r1 - R1
            e2 = r2 - R2
            eps = np.sqrt(e0 * e0 + e1 * e1 + e2 * e2) / L
        if eps > eps_c:
            d1[b] = 0
            newly[b] = 1


def update_bond_failure(X, x, tables, state, eps_c, protected=None, measure="displacement_norm"):
    """Break every intact bond whose stretch exceeds ``eps_c`` (strictly).

    Failure is permanent.  ``protected`` is a boolean mask over bonds that are
    never evaluated.  Returns the number of bonds broken by this call.
    """
    if measure not in ("displacement_norm", "length_ratio"):
        raise ValueError(f"unknown stretch measure {measure!r}")
    if protected is None:
        protected = np.zeros(len(tables.bonds), dtype=np.bool_)
    newly = np.empty(len(tables.bonds), dtype=np.uint8)
    _fail_kernel(np.ascontiguousarray(X), np.ascontiguousarray(x), tables.bonds, state.d1,
                 float(eps_c), protected, measure == "length_ratio", newly)
    state.broken_this_step = int(newly.sum())
    return state.broken_this_step


def point_damage(d1, tables):
    """``D = 1 - (intact bonds)/N1``; points without bonds report 0."""
    n1 = tables.n1
    own = np.repeat(np.arange(tables.n_points), n1)
    intact = np.bincount(own, d1[tables.h1_bond].astype(np.float64), minlength=tables.n_points)
    D = np.zeros(tables.n_points)
    nz = n1 > 0
    D[nz] = 1.0 - intact[nz] / n1[nz]
    return D
