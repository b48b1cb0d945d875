"""Explicit time integration, loading, and the simulation loop."""

from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np

from .contact import build_contact_sets, contact_force
from .damage import FailureState, point_damage, update_bond_failure
from .mechanics import total_internal
from .neighborhoods import DEGENERACY_TOL, apply_precrack, build_tables

log = logging.getLogger(__name__)


class SimulationAbort(RuntimeError):
    """Raised when the state becomes non-finite."""


def velocity_verlet_step(u, v, a, dt, accel):
    """One velocity-Verlet step; ``accel(u_new)`` returns the new acceleration."""
    v_half = v + 0.5 * dt * a
    u_new = u + dt * v_half
    a_new = accel(u_new)
    v_new = v_half + 0.5 * dt * a_new
    return u_new, v_new, a_new


def pressure_impulse(t, peak, duration):
    """Parabolic pulse, zero at ``t = 0`` and ``t = duration``, ``peak`` at the middle."""
    if not duration > 0:
        raise ValueError("impulse duration must be positive")
    if t < 0 or t > duration:
        return 0.0
    return -4.0 * peak / duration ** 2 * (t - 0.5 * duration) ** 2 + peak


def stable_timestep(material, spacing, safety=0.5):
    """``safety * dx / c`` with the dilatational wave speed ``c``."""
    if not safety > 0:
        raise ValueError("time-step safety factor must be positive")
    return safety * spacing / material.wave_speed()


@dataclass
class VelocityRegion:
    """Points driven at constant velocity: ``u = velocity * t``."""

    points: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if len(self.points) == 0:
            raise ValueError("velocity region selects no points")


@dataclass
class PressureImpulse:
    """End-layer pressure pulse applied as ``p(t)/dx * n``."""

    points: list          # one index array per loaded layer
    normals: list         # one unit vector per layer
    peak: float
    duration: float
    spacing: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("impulse duration must be positive")
        self.points = [np.asarray(p, dtype=np.int64) for p in self.points]
        self.normals = [np.asarray(nv, dtype=float) for nv in self.normals]
        if any(len(p) == 0 for p in self.points):
            raise ValueError("pressure layer selects no points")

    def apply(self, t, out):
        p = pressure_impulse(t, self.peak, self.duration)
        for idx, nv in zip(self.points, self.normals):
            out[idx] += (p / self.spacing) * nv


@dataclass
class InitialVelocity:
    points: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64)
        self.velocity = np.asarray(self.velocity, dtype=float)


class Body:
    """A discretized body with its material, tables and failure state."""

    def __init__(self, cloud, material, tables=None, cracks=(), cascade=True,
                 degeneracy_tol=DEGENERACY_TOL):
        if cloud.dim != material.dim:
            raise ValueError("cloud and material dimensionality differ")
        self.cloud = cloud
        self.material = material
        c1, c2, c3 = material.constants
        if tables is None:
            tables = build_tables(cloud, material.horizon, two_neighbor=c2 != 0.0,
                                  three_neighbor=c3 != 0.0, tol=degeneracy_tol)
        self.tables = tables
        self.volumes = tables.effective_volumes()
        self.failure = FailureState.intact(tables)
        if cracks:
            apply_precrack(self.failure.d1, tables, cloud.positions, cracks)
        self.failure.damage = point_damage(self.failure.d1, tables)
        self.cascade = cascade
        self.offset = 0
        self.protected = np.zeros(len(tables.bonds), dtype=bool)

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.cloud.n_points)


@dataclass
class SimState:
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    b_int: np.ndarray
    b_con: np.ndarray
    b_ext: np.ndarray
    damage: np.ndarray
    t: float = 0.0
    step: int = 0


@dataclass
class Diagnostics:
    collapsed: int = 0
    coincident_contact: int = 0
    timings: dict = field(default_factory=dict)

    def tick(self, name, start):
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


class Simulation:
    """Explicit dynamics of one or more bodies.

    Each step: half-kick and drift, kinematic boundary conditions, bond
    failure update, force assembly at ``t + dt``, second half-kick.
    """

    def __init__(self, bodies, loads=(), contact=None, dt=None, safety=0.5,
                 stretch_measure="displacement_norm", protect_bc_bonds=True):
        self.bodies = list(bodies)
        offset = 0
        for b in self.bodies:
            b.offset = offset
            offset += b.cloud.n_points
        n = offset
        self.X = np.concatenate([b.cloud.positions for b in self.bodies])
        self.rho = np.concatenate([np.full(b.cloud.n_points, b.material.density) for b in self.bodies])
        self.volume = np.concatenate([np.full(b.cloud.n_points, b.cloud.point_volume)
                                      for b in self.bodies])
        self.body_ids = np.concatenate([np.full(b.cloud.n_points, k) for k, b in enumerate(self.bodies)])
        self.contact = contact
        self.stretch_measure = stretch_measure
        if dt is None:
            dt = min(stable_timestep(b.material, b.cloud.spacing, safety) for b in self.bodies)
        if not dt > 0:
            raise ValueError("time step must be positive")
        self.dt = float(dt)

        self.driven = [l for l in loads if isinstance(l, VelocityRegion)]
        self.pressures = [l for l in loads if isinstance(l, PressureImpulse)]
        z = lambda: np.zeros((n, 3))
        self.state = SimState(z(), z(), z(), z(), z(), z(), np.zeros(n))
        for l in loads:
            if isinstance(l, InitialVelocity):
                self.state.v[l.points] = l.velocity
        if protect_bc_bonds and self.driven:
            mask = np.zeros(n, dtype=bool)
            for l in self.driven:
                mask[l.points] = True
            for b in self.bodies:
                local = mask[b.slice]
                b.protected = local[b.tables.bonds[:, 0]] | local[b.tables.bonds[:, 1]]
        self.diagnostics = Diagnostics()
        self._apply_kinematics(0.0)
        self._update_damage()
        self._assemble(0.0)
        self.state.a = self._acceleration()
        self._apply_kinematics(0.0, final=True)

    # -- phases --------------------------------------------------------------

    def _apply_kinematics(self, t, final=False):
        s = self.state
        for l in self.driven:
            s.u[l.points] = l.velocity * t
            s.v[l.points] = l.velocity
            if final:
                s.a[l.points] = 0.0

    def _update_bonds(self):
        t0 = time.perf_counter()
        x = self.X + self.state.u
        broken = 0
        for b in self.bodies:
            sl = b.slice
            broken += update_bond_failure(b.cloud.positions, x[sl], b.tables, b.failure,
                                          b.material.critical_stretch, b.protected,
                                          self.stretch_measure)
        self.diagnostics.tick("failure", t0)
        return broken

    def _update_damage(self):
        for b in self.bodies:
            b.failure.damage = point_damage(b.failure.d1, b.tables)
            self.state.damage[b.slice] = b.failure.damage

    def _assemble(self, t):
        s = self.state
        x = self.X + s.u
        t0 = time.perf_counter()
        for b in self.bodies:
            sl = b.slice
            bi, skipped = total_internal(x[sl], b.tables, b.failure.d1, b.material,
                                         cascade=b.cascade, volumes=b.volumes)
            s.b_int[sl] = bi
            self.diagnostics.collapsed += skipped
        self.diagnostics.tick("b_int", t0)
        t0 = time.perf_counter()
        if self.contact is not None and self.contact.pairs:
            ptr, idx = build_contact_sets(x, self.body_ids, self.contact.pairs,
                                          self.contact.critical_distance)
            horizons = [b.material.horizon for b in self.bodies]
            s.b_con, skipped = contact_force(x, ptr, idx, self.volume, self.body_ids,
                                             self.contact, horizons)
            self.diagnostics.coincident_contact += skipped
        self.diagnostics.tick("contact", t0)
        t0 = time.perf_counter()
        s.b_ext[:] = 0.0
        for p in self.pressures:
            p.apply(t, s.b_ext)
        self.diagnostics.tick("b_ext", t0)

    def _acceleration(self):
        s = self.state
        return (s.b_int + s.b_con + s.b_ext) / self.rho[:, None]

    def step(self):
        s = self.state
        dt = self.dt
        t_new = (s.step + 1) * dt
        t0 = time.perf_counter()
        s.v += 0.5 * dt * s.a
        s.u += dt * s.v
        self.diagnostics.tick("integrate", t0)
        self._apply_kinematics(t_new)
        broken = self._update_bonds()
        if broken:
            self._update_damage()
        self._assemble(t_new)
        t0 = time.perf_counter()
        s.a = self._acceleration()
        s.v += 0.5 * dt * s.a
        s.step += 1
        s.t = t_new
        self._apply_kinematics(t_new, final=True)
        self.diagnostics.tick("integrate", t0)
        self._check_finite()
        return broken

    def _check_finite(self):
        s = self.state
        for name, arr in (("displacement", s.u), ("velocity", s.v), ("acceleration", s.a)):
            bad = ~np.isfinite(arr).all(axis=1)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise SimulationAbort(
                    f"non-finite {name} at step {s.step} (t={s.t:.6g}) point {i} "
                    f"(body {self.body_ids[i]})")

    # -- observables ---------------------------------------------------------

    @property
    def positions(self):
        return self.X + self.state.u

    def n_broken(self):
        return sum(b.failure.n_broken for b in self.bodies)

    def max_damage(self):
        return float(self.state.damage.max(initial=0.0))

    def run(self, steps, snapshot_every=None, on_snapshot=None, progress_every=None):
        """Advance ``steps`` steps; ``on_snapshot(sim)`` fires at step 0 and every
        ``snapshot_every`` steps.  Returns a report dict."""
        start = time.perf_counter()
        if on_snapshot is not None:
            self._snapshot(on_snapshot)
        for _ in range(int(steps)):
            self.step()
            k = self.state.step
            if progress_every and k % progress_every == 0:
                self.log_progress()
            if on_snapshot is not None and snapshot_every and k % snapshot_every == 0:
                self._snapshot(on_snapshot)
        return self.report(time.perf_counter() - start)

    def _snapshot(self, cb):
        t0 = time.perf_counter()
        cb(self)
        self.diagnostics.tick("snapshot", t0)

    def log_progress(self):
        s = self.state
        umax = float(np.sqrt((s.u ** 2).sum(axis=1)).max(initial=0.0))
        log.info("STEP %d t=%.6g broken=%d maxD=%.6g maxU=%.6g",
                 s.step, s.t, self.n_broken(), self.max_damage(), umax)

    def report(self, wall_clock):
        d = self.diagnostics
        return {
            "steps": self.state.step,
            "time": self.state.t,
            "dt": self.dt,
            "broken_bonds": self.n_broken(),
            "max_damage": self.max_damage(),
            "wall_clock": wall_clock,
            "timings": dict(sorted(d.timings.items())),
            "collapsed_interactions": d.collapsed,
            "coincident_contacts": d.coincident_contact,
        }


def intact_components(body, min_fraction=0.0):
    """Sizes of the connected components of the intact-bond graph (largest first).

    Components smaller than ``min_fraction`` of the body are dropped.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n = body.cloud.n_points
    ok = body.failure.d1.astype(bool)
    e = body.tables.bonds[ok]
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    sizes = np.sort(np.bincount(labels))[::-1]
    return sizes[sizes >= min_fraction * n]
