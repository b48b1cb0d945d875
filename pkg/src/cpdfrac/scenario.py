"""Turn a validated ``ScenarioConfig`` into a ready ``Simulation``."""

import logging
import math
import os

import numpy as np

from . import geometry
from .contact import ContactParams
from .dynamics import Body, InitialVelocity, PressureImpulse, Simulation, VelocityRegion
from .geometry import CrackSegment, compute_fullness
from .mechanics import Material
from .neighborhoods import build_tables, load_tables, save_tables, tables_cache_key

log = logging.getLogger(__name__)


def build_cloud(spec, normal_sign="perpendicular"):
    kind = spec["geometry"]
    if kind == "grid":
        return geometry.build_grid(spec["counts"], spec["spacing"], spec["origin"], body_id=spec["id"])
    if kind == "curved_bar":
        return geometry.build_curved_bar(spec["n_n"], spec["length"], spec["width"], spec["dim"],
                                         normal_sign=normal_sign, body_id=spec["id"])
    if kind == "sphere":
        return geometry.build_sphere(spec["radius"], spec["spacing"], spec["center"], body_id=spec["id"])
    if kind == "disc":
        return geometry.build_disc(spec["radius"], spec["height"], spec["spacing"], spec["center"],
                                   body_id=spec["id"])
    raise ValueError(f"unknown geometry {kind!r}")


def build_material(spec, dim):
    m = spec["material"]
    return Material(m["density"], m["youngs_modulus"], m["poisson_ratio"], m["fracture_energy"],
                    spec["horizon"], dim=dim, critical_stretch_override=m.get("critical_stretch"))


def describe_material(body_id, mat):
    c1, c2, c3 = mat.constants
    return (f"body {body_id}: C1={c1:.6e} C2={c2:.6e} C3={c3:.6e} "
            f"eps_c={mat.critical_stretch:.6e} lambda={mat.lame_lambda:.6e} mu={mat.shear_modulus:.6e}")


def _tables(cloud, mat, cache_dir, tol):
    c1, c2, c3 = mat.constants
    flags = dict(two_neighbor=c2 != 0.0, three_neighbor=c3 != 0.0, tol=tol)
    if not cache_dir:
        return build_tables(cloud, mat.horizon, **flags)
    key = tables_cache_key(cloud, mat.horizon, **flags)
    path = os.path.join(cache_dir, f"{key}.ckpd")
    if os.path.exists(path):
        log.info("loading interaction tables from %s", path)
        return load_tables(path)
    tables = build_tables(cloud, mat.horizon, **flags)
    os.makedirs(cache_dir, exist_ok=True)
    save_tables(path, tables)
    return tables


def _strip(cloud, side, thickness):
    axis = 1
    y = cloud.positions[:, axis]
    band = (thickness - 0.5) * cloud.spacing
    if side == "top":
        return np.flatnonzero(y >= y.max() - band)
    return np.flatnonzero(y <= y.min() + band)


def build_bodies(cfg, base_dir="."):
    sw = cfg.switches
    cache = cfg.simulation.get("table_cache", "")
    if cache and not os.path.isabs(cache):
        cache = os.path.join(base_dir, cache)
    bodies = []
    for spec in sorted(cfg.bodies, key=lambda b: b["id"]):
        cloud = build_cloud(spec, sw["normal_sign"])
        mat = build_material(spec, cloud.dim)
        cloud.fullness = compute_fullness(cloud, mat.horizon)
        log.info(describe_material(spec["id"], mat))
        cracks = [CrackSegment(tuple(c["a"]), tuple(c["b"]), tuple(c["thickness_dir"]))
                  for c in spec["cracks"]]
        tables = _tables(cloud, mat, cache, sw["degeneracy_tol"])
        bodies.append(Body(cloud, mat, tables, cracks=cracks, cascade=sw["cascade"]))
    return bodies


def build_loads(cfg, bodies):
    offsets = np.cumsum([0] + [b.cloud.n_points for b in bodies])
    loads = []
    for spec in cfg.loads:
        k = spec["body"]
        body = bodies[k]
        cloud = body.cloud
        off = offsets[k]
        if spec["kind"] == "velocity_region":
            if spec["region"] == "box":
                lo, hi = np.asarray(spec["box_min"]), np.asarray(spec["box_max"])
                p = cloud.positions
                idx = np.flatnonzero(np.all((p >= lo) & (p <= hi), axis=1))
            else:
                idx = _strip(cloud, spec["region"], cfg.switches["bc_thickness"])
            loads.append(VelocityRegion(idx + off, spec["velocity"]))
        elif spec["kind"] == "pressure_impulse":
            alpha = geometry.bar_end_angle(cfg.body(k)["length"])
            nl = [math.sin(alpha), math.cos(alpha), 0.0]
            nr = [-math.sin(alpha), math.cos(alpha), 0.0]
            loads.append(PressureImpulse([cloud.tags["left_end"] + off, cloud.tags["right_end"] + off],
                                         [nl, nr], spec["peak"], spec["duration"], cloud.spacing))
        else:
            loads.append(InitialVelocity(np.arange(cloud.n_points) + off, spec["velocity"]))
    return loads


def build_simulation(cfg, base_dir=".", dt=None):
    """Build bodies, loads and contact from a config.  ``dt`` overrides the config."""
    bodies = build_bodies(cfg, base_dir)
    loads = build_loads(cfg, bodies)
    contact = None
    if cfg.contact is not None:
        c = cfg.contact
        contact = ContactParams(c["critical_distance"], c["stiffness"],
                                [tuple(p) for p in c["pairs"]], c.get("horizon"))
    sim_cfg = cfg.simulation
    if dt is None and sim_cfg["dt"] != "auto":
        dt = sim_cfg["dt"]
    sim = Simulation(bodies, loads, contact, dt=dt, safety=sim_cfg["safety"],
                     stretch_measure=cfg.switches["stretch_measure"],
                     protect_bc_bonds=cfg.switches["protect_bc_bonds"])
    log.info("time step %.6e s, %d points, %d bodies", sim.dt, len(sim.X), len(bodies))
    return sim
