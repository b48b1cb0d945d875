"""Acceptance suite: one test and one printed pass/fail line per criterion.

The long runs use the ``coarse`` presets.  Tolerances are fixed here and are
not adjusted to observed results.
"""

from itertools import product
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from cpdfrac.config import parse_config, dump_config
from cpdfrac.contact import build_contact_sets
from cpdfrac.damage import critical_stretch, pair_failure, triple_failure
from cpdfrac.dynamics import Body, InitialVelocity, Simulation, SimulationAbort, intact_components
from cpdfrac.geometry import PointCloud, bar_slope, compute_fullness
from cpdfrac.mechanics import (
    Material, derive_constants_2d, derive_constants_3d, force_b1, force_b2, force_b3,
    total_internal,
)
from cpdfrac.neighborhoods import build_tables
from cpdfrac.presets import preset_config
from cpdfrac.scenario import build_simulation
from cpdfrac.snapshots import read_snapshot

from oracles import PointEnergy, contact_sets, h1_sets, h2_sets, h3_sets, jittered_cloud

FD_REL = 1e-5
OBJECTIVITY = 1e-9
OSCILLATOR_REL = 0.01
CONSTANT_REL = 1e-12
BAND_HORIZONS = 3.0
IMPACT_HORIZONS = 5.0
SPHERE_DAMAGED = 0.25


# -- 1 ------------------------------------------------------------------------

def _fd_error(dim, kernel, seed):
    rng = np.random.default_rng(seed)
    if dim == 2:
        X, horizon = jittered_cloud(rng, (7, 7), 1.0), 2.1
    else:
        X, horizon = jittered_cloud(rng, (3, 3, 4), 1.0), 1.8
    assert len(X) <= 50
    cloud = PointCloud(X, 1.0, 1.0, dim=dim)
    cloud.fullness = compute_fullness(cloud, horizon)
    t = build_tables(cloud, horizon)
    d1 = np.ones(len(t.bonds), np.uint8)
    x = X + rng.normal(scale=0.03, size=X.shape) * ([1, 1, 0] if dim == 2 else 1)
    oracle = PointEnergy(X, horizon, dim, 1.0)
    force, energy = {1: (force_b1, oracle.w1), 2: (force_b2, oracle.w2),
                     3: (force_b3, oracle.w3)}[kernel]
    b = force(x, t, d1, 1.0)[0]
    scale = np.abs(b).max()
    worst = 0.0
    for i in range(len(x)):
        g = oracle.gradient(energy, x, i, 1e-7 * horizon, 1.0)
        worst = max(worst, np.abs(b[i] + g).max() / scale)
    return worst


def test_criterion_01_kernel_gradients(criterion):
    errs = {}
    for dim, kernel in [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]:
        errs[f"b{kernel}/{dim}D"] = _fd_error(dim, kernel, 11 * dim + kernel)
    worst = max(errs.values())
    ok = worst <= FD_REL
    criterion(1, ok, "max rel FD error " + ", ".join(f"{k}={v:.1e}" for k, v in errs.items())
              + f" (tol {FD_REL:g})")
    assert ok


# -- 2 ------------------------------------------------------------------------

def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def test_criterion_02_objectivity(criterion):
    rng = np.random.default_rng(2)
    worst = 0.0
    for dim in (2, 3):
        dx = 1e-2
        horizon = 3.015 * dx if dim == 2 else 2.015 * dx
        X = jittered_cloud(rng, (12, 12) if dim == 2 else (6, 6, 6), dx, jitter=0.1)
        cloud = PointCloud(X, dx ** dim, dx, dim=dim)
        cloud.fullness = compute_fullness(cloud, horizon)
        mat = Material(7850.0, 210e9, 0.3 if dim == 2 else 0.2, 100.0, horizon, dim=dim)
        t = build_tables(cloud, horizon)
        d1 = np.ones(len(t.bonds), np.uint8)
        unit = mat.constants[0] * horizon * t.effective_volumes()[1].max()
        if dim == 2:
            c, s = math.cos(1.1), math.sin(1.1)
            Q = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
            shift = np.array([0.7, -0.2, 0.0])
        else:
            Q = _rotation(rng)
            shift = np.array([0.7, -0.2, 1.3])
        for x in (X + shift, X @ Q.T, X @ Q.T + shift):
            b, _ = total_internal(x, t, d1, mat)
            worst = max(worst, np.abs(b).max() / unit)
    ok = worst <= OBJECTIVITY
    criterion(2, ok, f"max |b_int| / (C1 delta V1) under rigid motion = {worst:.2e} (tol {OBJECTIVITY:g})")
    assert ok


# -- 3 ------------------------------------------------------------------------

def test_criterion_03_oracle_equivalence(criterion):
    rng = np.random.default_rng(3)
    mismatches = []
    X = jittered_cloud(rng, (13, 13, 11), 1.0, 0.2)
    t = build_tables(PointCloud(X, 1.0, 1.0), 2.0, two_neighbor=False, three_neighbor=False)
    ref = h1_sets(X, 2.0)
    mismatches += [("H1", i) for i in range(len(X)) if list(t.h1(i)) != ref[i]]

    for dim, counts, horizon in [(2, (17, 17), 2.0), (3, (7, 7, 6), 1.5)]:
        X = jittered_cloud(rng, counts, 1.0, 0.2)
        t = build_tables(PointCloud(X, 1.0, 1.0, dim=dim), horizon)
        r2 = h2_sets(X, horizon)
        r3 = h3_sets(X, horizon) if dim == 3 else [set()] * len(X)
        for i in range(len(X)):
            if sorted(t.h2(i)) != sorted(r2[i]):
                mismatches.append((f"H2/{dim}D", i))
            if sorted(t.h3(i)) != sorted(r3[i]):
                mismatches.append((f"H3/{dim}D", i))

    a = jittered_cloud(rng, (10, 10, 10), 1.0, 0.25)
    b = jittered_cloud(rng, (10, 10, 8), 1.0, 0.25) + [0.3, 0.2, 9.6]
    x = np.concatenate([a, b])
    ids = np.repeat([0, 1], [len(a), len(b)])
    ptr, idx = build_contact_sets(x, ids, [(0, 1)], 1.1)
    ref = contact_sets(x, ids, [(0, 1)], 1.1)
    mismatches += [("contact", i) for i in range(len(x)) if list(idx[ptr[i]:ptr[i + 1]]) != ref[i]]
    ok = not mismatches
    criterion(3, ok, f"H1 (2002 pts), H2/H3 (289, 294 pts), contact (1800 pts): "
                     f"{len(mismatches)} mismatching rows")
    assert ok


# -- 4 ------------------------------------------------------------------------

def test_criterion_04_two_point_oscillator(criterion):
    L, rho = 0.01, 7850.0
    X = np.array([[0.0, 0, 0], [L, 0, 0]])
    body = Body(PointCloud(X, 1e-6, L), Material(rho, 210e9, 0.25, 1e9, 1.5 * L))
    v1 = body.volumes[1][0]
    omega = math.sqrt(2 * body.material.constants[0] * v1 / (rho * L))
    T = 2 * math.pi / omega
    v0 = 1e-6 * L * omega
    sim = Simulation([body], [InitialVelocity([0], [-v0, 0, 0]), InitialVelocity([1], [v0, 0, 0])],
                     dt=T / 1000, stretch_measure="length_ratio")
    sep = []
    for _ in range(5500):
        sim.step()
        sep.append(sim.positions[1, 0] - sim.positions[0, 0] - L)
    s = np.asarray(sep)
    up = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    times = (up + (-s[up]) / (s[up + 1] - s[up])) * sim.dt
    period = np.diff(times).mean()
    rel = abs(period / T - 1)
    ok = rel <= OSCILLATOR_REL
    criterion(4, ok, f"period {period:.6e} s vs analytic {T:.6e} s, rel err {rel:.1e} "
                     f"(tol {OSCILLATOR_REL:g})")
    assert ok


# -- 5 ------------------------------------------------------------------------

def _desk(E, nu, delta, G_c, dim):
    G = E / (2 * (1 + nu))
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    if dim == 2:
        K = E / (2 * (1 - nu))
        c1 = 12 * E / (math.pi * delta ** 3 * (1 + nu))
        cx = 27 * E * (1 - 3 * nu) / (16 * math.pi * delta ** 6 * (nu ** 2 - 1))
        eps = math.sqrt(G_c / ((6 / math.pi * G + 16 / (9 * math.pi ** 2) * (K - 2 * G)) * delta))
    else:
        K = E / (3 * (1 - 2 * nu))
        c1 = 30 * G / (math.pi * delta ** 4)
        cx = 32 * (lam - G) / (math.pi ** 4 * delta ** 12)
        eps = math.sqrt(G_c / ((3 * G + (3 / 4) ** 4 * (K - 5 * G / 3)) * delta))
    return c1, cx, eps


CASES = [
    # (label, E, nu, delta, G_c, dim)
    ("mode-I 2D", 210e9, 0.3, 15.075e-3, 140.0, 2),
    ("mode-I 3D", 210e9, 0.3, 50.25e-3, 500.0, 3),
    ("bar 2D", 210e9, 0.3, 9.42e-3, 1.0, 2),
    ("bar 3D", 210e9, 0.3, 38e-3, 1.0, 3),
    ("sphere", 210e9, 0.25, 12.06e-3, 1500.0, 3),
    ("disc", 50e9, 0.2, 40.075e-3, 1.0, 3),
]


def _rel(a, b):
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(b), 1e-300)


def test_criterion_05_constants(criterion):
    worst = 0.0
    for label, E, nu, delta, G_c, dim in CASES:
        c1, cx, eps = _desk(E, nu, delta, G_c, dim)
        got = derive_constants_2d(E, nu, delta) if dim == 2 else derive_constants_3d(E, nu, delta)
        got_eps = critical_stretch(G_c, E, nu, delta, dim)
        if nu == 0.25:
            # lambda = mu: the desk value is roundoff, so compare on the scale of the mu term
            mu_scale = 32 * E / (2 * (1 + nu)) / (math.pi ** 4 * delta ** 12)
            err_x = abs(got[1] - cx) / mu_scale
        else:
            err_x = _rel(got[1], cx)
        errs = [_rel(got[0], c1), _rel(got_eps, eps), err_x]
        worst = max(worst, *errs)
    eps3 = critical_stretch(500.0, 210e9, 0.3, 50.25e-3, 3)
    ok = worst <= CONSTANT_REL and abs(eps3 / 1.97e-4 - 1) < 5e-3
    criterion(5, ok, f"max rel diff vs desk closed forms {worst:.1e} (tol {CONSTANT_REL:g}); "
                     f"3D mode-I eps_c = {eps3:.4e}")
    assert ok


# -- 6 ------------------------------------------------------------------------

def _mode1(cascade):
    d = preset_config("mode1-2d", "coarse").to_dict()
    d["switches"]["cascade"] = cascade
    cfg = parse_config(dump_config(d))
    sim = build_simulation(cfg)
    body = sim.bodies[0]
    X = body.cloud.positions
    delta = body.material.horizon
    first = None
    aborted = None
    try:
        for _ in range(cfg.simulation["steps"]):
            before = body.failure.d1.copy()
            if sim.step() and first is None:
                newly = np.flatnonzero(before != body.failure.d1)
                first = X[body.tables.bonds[newly]].reshape(-1, 3)
    except SimulationAbort as exc:
        aborted = str(exc)
    D = body.failure.damage
    damaged = D > 0.25
    band = float(np.abs(X[damaged, 1]).max()) if damaged.any() else 0.0
    tip_x = float(X[damaged, 0].max()) if damaged.any() else -np.inf
    return dict(sim=sim, body=body, delta=delta, first=first, band=band, tip_x=tip_x,
                comps=intact_components(body, 0.05), aborted=aborted, step=sim.state.step)


def test_criterion_06_mode1_crack_growth(criterion):
    on = _mode1(True)
    off = _mode1(False)
    delta = on["delta"]
    tip = np.zeros(3)
    first = on["first"]
    a = (first is not None
         and np.linalg.norm(first - tip, axis=1).min() <= delta
         and on["tip_x"] > 3 * delta)
    b = on["band"] <= BAND_HORIZONS * delta
    c = len(on["comps"]) >= 2
    b_off = off["band"] <= BAND_HORIZONS * delta
    ok = a and b and c and not b_off
    off_note = f"aborted at step {off['step']}" if off["aborted"] else f"ran {off['step']} steps"
    criterion(6, ok,
              f"(a) first break {'at' if a else 'not at'} tip, damage reaches x={on['tip_x']:.3f} m: "
              f"{'ok' if a else 'no'}; (b) band {on['band']:.4f} m <= {BAND_HORIZONS:g} delta "
              f"= {BAND_HORIZONS * delta:.4f} m: {'ok' if b else 'no'}; (c) components "
              f"{[int(n) for n in on['comps']]}: {'ok' if c else 'no'}; no cascade: band {off['band']:.4f} m "
              f"({off_note}), (b) {'fails as required' if not b_off else 'PASSES (unexpected)'}")
    assert ok


# -- 7 ------------------------------------------------------------------------

def _arc_fraction(x, length=1.0):
    xs = np.linspace(-length / 2, length / 2, 20001)
    ds = np.sqrt(1 + bar_slope(xs) ** 2)
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (ds[1:] + ds[:-1]) * np.diff(xs))])
    return np.interp(x, xs, arc) / arc[-1], arc[-1]


def _first_damage(cfg, max_steps):
    sim = build_simulation(cfg)
    body = sim.bodies[0]
    rx = body.cloud.tags["root_x"]
    X = body.cloud.positions
    L = np.linalg.norm(X[body.tables.bonds[:, 1]] - X[body.tables.bonds[:, 0]], axis=1)
    peak = 0.0
    for _ in range(max_steps):
        if sim.step():
            idx = np.flatnonzero(body.failure.damage > 0)
            return sim, rx[idx], peak
        if sim.state.step % 25 == 0:
            x = sim.positions
            s = (np.linalg.norm(x[body.tables.bonds[:, 1]] - x[body.tables.bonds[:, 0]], axis=1) - L) / L
            peak = max(peak, float(s.max()))
    return sim, None, peak


def _bar_verdict(cfg, sim, roots):
    mat = sim.bodies[0].material
    _, arc = _arc_fraction(0.0)
    transit = arc / mat.wave_speed()
    if roots is None:
        return False, f"no damage in {sim.state.step} steps (t = {sim.state.t * 1e3:.2f} ms)", transit
    frac, _ = _arc_fraction(roots)
    middle = bool(np.all((frac >= 1 / 3) & (frac <= 2 / 3)))
    late = sim.state.t > transit
    ok = middle and late
    return ok, (f"first damage at t = {sim.state.t * 1e3:.3f} ms (transit {transit * 1e3:.3f} ms), "
                f"arc fraction {frac.min():.3f}..{frac.max():.3f}"), transit


def test_criterion_07_curved_bar_first_damage(criterion):
    cfg = preset_config("curved-bar-2d", "coarse")
    sim, roots, peak = _first_damage(cfg, cfg.simulation["steps"])
    ok, detail, _ = _bar_verdict(cfg, sim, roots)
    eps_c = sim.bodies[0].material.critical_stretch
    criterion(7, ok, f"{detail}; peak bond stretch {peak:.2e} vs eps_c {eps_c:.2e}")
    assert ok


def test_curved_bar_first_damage_location_with_lowered_critical_stretch(capsys):
    """Supplementary to criterion 7, not a substitute for it.

    The bar reaches a peak stretch of a few 1e-6, below the critical stretch
    of the published fracture energy.  With the critical stretch set to
    4e-6, the location and time of first failure can be checked.
    """
    d = preset_config("curved-bar-2d", "coarse").to_dict()
    d["bodies"][0]["material"]["critical_stretch"] = 4e-6
    cfg = parse_config(dump_config(d))
    sim, roots, _ = _first_damage(cfg, cfg.simulation["steps"])
    ok, detail, _ = _bar_verdict(cfg, sim, roots)
    with capsys.disabled():
        print(f"\nsupplementary 7 (eps_c = 4e-6): {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok


# -- 8 ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def impact_run():
    cfg = preset_config("impact", "coarse")
    sim = build_simulation(cfg)
    sphere, disc = sim.bodies
    mass = sim.rho[sphere.slice] * sim.volume[sphere.slice]
    com = []
    for _ in range(cfg.simulation["steps"]):
        sim.step()
        z = sim.positions[sphere.slice, 2]
        com.append(float((mass * z).sum() / mass.sum()))
    return sim, np.asarray(com)


def test_criterion_08_impact(criterion, impact_run):
    sim, com = impact_run
    sphere, disc = sim.bodies
    a = com.min() < 0.0
    Xd = disc.cloud.positions
    r = np.hypot(Xd[:, 0], Xd[:, 1])
    broken = disc.failure.damage > 0.5
    limit = IMPACT_HORIZONS * disc.material.horizon
    r_max = float(r[broken].max()) if broken.any() else 0.0
    b = r_max <= limit
    d_sphere = float(sphere.failure.damage.max())
    c = d_sphere <= SPHERE_DAMAGED
    ok = a and b and c
    criterion(8, ok,
              f"(a) sphere COM z min {com.min() * 1e3:.2f} mm < 0: {'ok' if a else 'no'}; "
              f"(b) disc D>0.5 out to r = {r_max * 1e3:.1f} mm, limit 5 delta = {limit * 1e3:.1f} mm "
              f"({broken.mean() * 100:.0f}% of disc points): {'ok' if b else 'no'}; "
              f"(c) sphere max D {d_sphere:.3f} <= {SPHERE_DAMAGED}: {'ok' if c else 'no'}")
    assert ok


# -- 9 ------------------------------------------------------------------------

def test_criterion_09_damage_truth_table(criterion):
    bad = 0
    for dij, dik in product((0, 1), repeat=2):
        expect = 1 if (dij == 1 and dik == 1) else 0
        bad += pair_failure(dij, dik) != expect
    for dij, dik, dil in product((0, 1), repeat=3):
        expect = 1 if (dij == 1 and dik == 1 and dil == 1) else 0
        bad += triple_failure(dij, dik, dil) != expect
    # and in the kernels: one tetrahedron around point 0
    X = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    t = build_tables(PointCloud(X, 1.0, 1.0), 1.5)
    x = X * 1.05 + [[0.01, -0.02, 0.03], [0, 0, 0], [0, 0, 0], [0, 0, 0]]
    bond = {int(j): t.h1_bond[t.h1_ptr[0] + s] for s, j in enumerate(t.h1(0))}
    full3 = force_b3(x, t, np.ones(len(t.bonds), np.uint8), 1.0)[0][0]
    for flags in product((0, 1), repeat=3):
        d1 = np.ones(len(t.bonds), np.uint8)
        for j, f in zip((1, 2, 3), flags):
            d1[bond[j]] = f
        expect = full3 if all(flags) else np.zeros(3)
        bad += not np.allclose(force_b3(x, t, d1, 1.0)[0][0], expect, rtol=0, atol=1e-14)
    ok = bad == 0
    criterion(9, ok, f"4 pair + 8 triple flag combinations, 8 kernel cases: {bad} mismatches")
    assert ok


# -- 10 -----------------------------------------------------------------------

DET_2D = """\
[simulation]
steps = 300
safety = 0.8
snapshot_every = 100

[switches]
stretch_measure = "length_ratio"

[output]
directory = "out"

[[bodies]]
id = 0
geometry = "grid"
counts = [24, 24]
spacing = 0.01
horizon = 0.03015

[bodies.material]
density = 7580.0
youngs_modulus = 210e9
poisson_ratio = 0.3
fracture_energy = 20.0

[[bodies.cracks]]
a = [-0.13, 0.0, 0.0]
b = [0.0, 0.0, 0.0]

[[loads]]
kind = "velocity_region"
body = 0
region = "top"
velocity = [0.0, 0.5, 0.0]

[[loads]]
kind = "velocity_region"
body = 0
region = "bottom"
velocity = [0.0, -0.5, 0.0]
"""

DET_3D = """\
[simulation]
steps = 150
safety = 0.8
snapshot_every = 50

[switches]
stretch_measure = "length_ratio"

[output]
directory = "out"

[contact]
pairs = [[0, 1]]
critical_distance = 2e-3
stiffness = 1e12
horizon = 8e-3

[[bodies]]
id = 0
geometry = "sphere"
radius = 6e-3
spacing = 2e-3
center = [0.0, 0.0, 11e-3]
horizon = 4.03e-3

[bodies.material]
density = 7850.0
youngs_modulus = 210e9
poisson_ratio = 0.3
fracture_energy = 1500.0

[[bodies]]
id = 1
geometry = "disc"
radius = 20e-3
height = 6e-3
spacing = 2e-3
horizon = 4.03e-3

[bodies.material]
density = 2000.0
youngs_modulus = 50e9
poisson_ratio = 0.2
fracture_energy = 1.0

[[loads]]
kind = "initial_velocity"
body = 0
velocity = [0.0, 0.0, -200.0]
"""


def _run_threads(tmp, text, name, threads):
    cfg = tmp / f"{name}.toml"
    cfg.write_text(text)
    out = tmp / f"{name}-{threads}"
    env = dict(os.environ, NUMBA_NUM_THREADS="8")
    r = subprocess.run([sys.executable, "-m", "cpdfrac.cli", "run", "--config", str(cfg),
                        "--threads", str(threads), "--out", str(out)],
                       capture_output=True, text=True, env=env, cwd=tmp)
    assert r.returncode == 0, r.stderr
    return {p: (out / p).read_bytes() for p in sorted(os.listdir(out)) if p.startswith("snap_")}


def test_criterion_10_determinism(criterion, tmp_path):
    diffs = []
    damaged = []
    for name, text in (("grid2d", DET_2D), ("impact3d", DET_3D)):
        runs = {n: _run_threads(tmp_path, text, name, n) for n in (1, 2, 8)}
        for n in (2, 8):
            if runs[n] != runs[1]:
                diffs.append(f"{name}: {n} threads")
        last = sorted(runs[1])[-1]
        damaged.append(read_snapshot(tmp_path / f"{name}-1" / last)["damage"].max())
    ok = not diffs and len(runs[1]) > 1
    criterion(10, ok, f"2D crack and 3D contact runs, snapshots at 1/2/8 threads "
                      f"{'bit-identical' if not diffs else 'differ: ' + ', '.join(diffs)} "
                      f"(final max damage {damaged[0]:.2f}, {damaged[1]:.2f})")
    assert ok
