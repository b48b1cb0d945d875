"""Reference point clouds for the discretized bodies.

All clouds store 3-vectors; two-dimensional clouds keep ``z = 0`` and carry
``dim = 2``.  Every body is uniformly spaced, so a single ``point_volume``
(``dx**dim``) applies to all of its points.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._hashgrid import radius_neighbors


@dataclass
class PointCloud:
    """Discretized reference body."""

    positions: np.ndarray
    point_volume: float
    spacing: float
    dim: int = 3
    body_id: int = 0
    fullness: np.ndarray = None
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not self.point_volume > 0:
            raise ValueError("point_volume must be positive")
        if self.fullness is None:
            self.fullness = np.ones(len(self.positions))
        else:
            self.fullness = np.asarray(self.fullness, dtype=np.float64)
            if self.fullness.shape != (len(self.positions),):
                raise ValueError("fullness must hold one value per point")
            if np.any((self.fullness < 0) | (self.fullness > 1)):
                raise ValueError("fullness must lie in [0, 1]")

    def __len__(self):
        return len(self.positions)

    @property
    def n_points(self):
        return len(self.positions)


@dataclass(frozen=True)
class CrackSegment:
    """Straight pre-crack.

    In 2D the crack is the segment ``a``-``b``.  In 3D it is the strip swept by
    that segment along ``thickness_dir`` (unbounded in that direction).
    """

    a: tuple
    b: tuple
    thickness_dir: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != (3,) or b.shape != (3,):
            raise ValueError("crack endpoints must be 3-vectors")
        if np.allclose(a, b, rtol=0.0, atol=0.0):
            raise ValueError("crack endpoints must differ")


def _check_spacing(dx):
    if not dx > 0:
        raise ValueError(f"point spacing must be positive, got {dx}")


def _axis(n, dx):
    return (np.arange(n) - (n - 1) / 2.0) * dx


def build_grid(counts, spacing, origin=(0.0, 0.0, 0.0), dim=None, body_id=0):
    """Regular lattice centered on ``origin``.

    Args:
        counts: points per axis, length 2 or 3.
        spacing: lattice spacing ``dx``.
        origin: center of the lattice.
        dim: 2 or 3; defaults to ``len(counts)``.

    Returns:
        PointCloud with ``prod(counts)`` points and volume ``dx**dim``.
    """
    counts = tuple(int(c) for c in counts)
    dim = len(counts) if dim is None else dim
    if len(counts) != dim or dim not in (2, 3):
        raise ValueError("counts must have one entry per dimension (2 or 3)")
    if any(c < 1 for c in counts):
        raise ValueError(f"grid counts must be >= 1, got {counts}")
    _check_spacing(spacing)
    axes = [_axis(c, spacing) for c in counts]
    if dim == 2:
        axes.append(np.zeros(1))
    # x varies fastest
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()]) + np.asarray(origin, float)
    if dim == 2:
        pos[:, 2] = 0.0
    return PointCloud(pos, spacing ** dim, spacing, dim=dim, body_id=body_id)


def _cut_lattice(half_extent, dx, inside, dim=3, z_layers=None):
    n = int(math.floor(half_extent / dx))
    ax = np.arange(-n, n + 1) * dx
    az = ax if z_layers is None else z_layers
    zz, yy, xx = np.meshgrid(az, ax, ax, indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    return pos[inside(pos)]


def build_sphere(radius, spacing, center=(0.0, 0.0, 0.0), body_id=0):
    """Lattice points with ``|X - center| <= radius`` (lattice through the center)."""
    if not radius > 0:
        raise ValueError("sphere radius must be positive")
    _check_spacing(spacing)
    pos = _cut_lattice(radius, spacing, lambda p: np.einsum("ij,ij->i", p, p) <= radius * radius)
    if len(pos) == 0:
        raise ValueError("sphere discretization is empty")
    return PointCloud(pos + np.asarray(center, float), spacing ** 3, spacing, dim=3, body_id=body_id)


def build_disc(radius, height, spacing, center=(0.0, 0.0, 0.0), body_id=0):
    """Disc with axis along z: ``round(height/dx)`` layers centered on ``center``."""
    if not (radius > 0 and height > 0):
        raise ValueError("disc radius and height must be positive")
    _check_spacing(spacing)
    n_layers = max(1, int(round(height / spacing)))
    layers = _axis(n_layers, spacing)
    pos = _cut_lattice(radius, spacing, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2 <= radius * radius,
                       z_layers=layers)
    if len(pos) == 0:
        raise ValueError("disc discretization is empty")
    return PointCloud(pos + np.asarray(center, float), spacing ** 3, spacing, dim=3, body_id=body_id)


def bar_curve(x):
    return np.cos(0.5 * np.pi * x)


def bar_slope(x):
    return -0.5 * np.pi * np.sin(0.5 * np.pi * x)


def build_curved_bar(n_n, length=1.0, width=0.0625, dim=2, normal_sign="perpendicular", body_id=0):
    """Curved bar along ``f(x) = cos(pi x / 2)`` for ``x`` in ``[-length/2, length/2]``.

    Root points are spread evenly in arc length with spacing close to
    ``dx = width / n_n``.  Through each root a straight cross-section line
    carries ``n_n`` points at spacing ``dx``.  ``normal_sign="printed"`` uses
    the line slope ``+1/f'(x_i)``; ``"perpendicular"`` uses ``-1/f'(x_i)``,
    which is the true normal of the curve.  In 3D the section is replicated
    in ``n_n`` layers across ``z``.

    The first and last cross-section (all layers) are tagged ``left_end`` and
    ``right_end``.
    """
    n_n = int(n_n)
    if n_n < 1:
        raise ValueError("n_n must be >= 1")
    if not (length > 0 and width > 0):
        raise ValueError("bar length and width must be positive")
    if normal_sign not in ("printed", "perpendicular"):
        raise ValueError(f"unknown normal_sign {normal_sign!r}")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    dx = width / n_n
    sign = 1.0 if normal_sign == "printed" else -1.0

    xs = np.linspace(-length / 2, length / 2, 20001)
    ds = np.sqrt(1.0 + bar_slope(xs) ** 2)
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (ds[1:] + ds[:-1]) * np.diff(xs))])
    n_roots = max(2, int(round(arc[-1] / dx)) + 1)
    roots = np.interp(np.linspace(0.0, arc[-1], n_roots), arc, xs)

    fp = bar_slope(roots)
    # direction of the line y = sign/f' (x - x_i) + f(x_i); f' = 0 gives the vertical
    direction = np.column_stack([fp, np.full_like(fp, sign)])
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    direction *= np.sign(direction[:, 1])[:, None]
    offsets = _axis(n_n, dx)
    centers = np.column_stack([roots, bar_curve(roots)])
    sec = centers[:, None, :] + offsets[None, :, None] * direction[:, None, :]
    sec = sec.reshape(-1, 2)
    root_of = np.repeat(np.arange(n_roots), n_n)

    if dim == 2:
        pos = np.column_stack([sec, np.zeros(len(sec))])
        layer_root = root_of
    else:
        zs = _axis(n_n, dx)
        pos = np.concatenate([np.column_stack([sec, np.full(len(sec), z)]) for z in zs])
        layer_root = np.tile(root_of, n_n)

    cloud = PointCloud(pos, dx ** dim, dx, dim=dim, body_id=body_id)
    cloud.tags["left_end"] = np.flatnonzero(layer_root == 0)
    cloud.tags["right_end"] = np.flatnonzero(layer_root == n_roots - 1)
    cloud.tags["root_x"] = roots[layer_root]
    return cloud


def bar_end_angle(length=1.0):
    """Angle of the end-face load direction, ``arctan(-1/f'(L/2))``."""
    return math.atan(-1.0 / bar_slope(length / 2))


def full_horizon_volume(horizon, dim):
    return (4.0 / 3.0) * math.pi * horizon ** 3 if dim == 3 else math.pi * horizon ** 2


def compute_fullness(cloud, horizon):
    """Discrete neighborhood fullness ``(N1 + 1) dV / V_full`` clamped to [0, 1]."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ptr, _ = radius_neighbors(cloud.positions, horizon)
    n1 = np.diff(ptr)
    beta = (n1 + 1) * cloud.point_volume / full_horizon_volume(horizon, cloud.dim)
    return np.clip(beta, 0.0, 1.0)
