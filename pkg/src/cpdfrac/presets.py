"""Ready-made scenario configs for the mode-I, curved-bar and impact experiments.

Every preset has a ``full`` variant with the published discretization and a
``coarse`` variant that runs on a desk machine.  Coarse variants keep the
horizon-to-spacing ratio of the full setup (the impact disc is the exception,
see ``impact``) and scale ``G_c`` with the horizon so that the critical
stretch is unchanged.
"""

import math

from .config import dump_config, parse_config

# density is per unit area in 2D and per unit volume in 3D; same number
STEEL = dict(density=7580.0, youngs_modulus=210e9, poisson_ratio=0.3)

SCALES = ("full", "coarse")


def _scaled_gc(g_c, horizon, reference_horizon):
    # eps_c ~ sqrt(G_c / delta): keep it fixed when delta changes
    return g_c * horizon / reference_horizon


def mode1_2d(scale="full", out="out/mode1-2d"):
    ref_dx, ref_delta = 5e-3, 15.075e-3
    if scale == "full":
        n, dx = 200, ref_dx
    else:
        n, dx = 50, 0.02
    delta = ref_delta / ref_dx * dx
    half = 0.5 * n * dx
    steps = 4000 if scale == "coarse" else 16000
    return {
        "simulation": {"steps": steps, "dt": "auto", "safety": 0.8, "snapshot_every": steps // 8,
                       "progress_every": 500},
        "switches": {"stretch_measure": "length_ratio", "bc_thickness": 3.0},
        "output": {"directory": out, "formats": ["csv"]},
        "bodies": [{
            "id": 0, "geometry": "grid", "counts": [n, n], "spacing": dx, "horizon": delta,
            "material": dict(STEEL, fracture_energy=_scaled_gc(140.0, delta, ref_delta)),
            "cracks": [{"a": [-half - dx, 0.0, 0.0], "b": [0.0, 0.0, 0.0]}],
        }],
        "loads": [
            {"kind": "velocity_region", "body": 0, "region": "top", "velocity": [0.0, 0.005, 0.0]},
            {"kind": "velocity_region", "body": 0, "region": "bottom", "velocity": [0.0, -0.005, 0.0]},
        ],
    }


def mode1_3d(scale="full", out="out/mode1-3d"):
    ref_dx, ref_delta = 16.7e-3, 50.25e-3
    if scale == "full":
        n, dx = 60, ref_dx
    else:
        n, dx = 20, 3 * ref_dx
    delta = ref_delta / ref_dx * dx
    half = 0.5 * n * dx
    return {
        "simulation": {"steps": 2000 if scale == "coarse" else 6000, "dt": "auto", "safety": 0.8,
                       "snapshot_every": 250, "progress_every": 250},
        "switches": {"stretch_measure": "length_ratio", "bc_thickness": 3.0},
        "output": {"directory": out, "formats": ["csv"]},
        "bodies": [{
            "id": 0, "geometry": "grid", "counts": [n, n, 3], "spacing": dx, "horizon": delta,
            "material": dict(STEEL, fracture_energy=_scaled_gc(500.0, delta, ref_delta)),
            "cracks": [{"a": [-half - dx, 0.0, 0.0], "b": [0.0, 0.0, 0.0]}],
        }],
        "loads": [
            {"kind": "velocity_region", "body": 0, "region": "top", "velocity": [0.0, 0.005, 0.0]},
            {"kind": "velocity_region", "body": 0, "region": "bottom", "velocity": [0.0, -0.005, 0.0]},
        ],
    }


def _curved_bar(dim, scale, out):
    if dim == 2:
        ref_nn, ref_delta, peak = 20, 9.42e-3, 4e5
        nn = ref_nn if scale == "full" else 10
    else:
        ref_nn, ref_delta, peak = 5, 38e-3, 1e6
        nn = ref_nn
    width = 0.0625
    delta = ref_delta * ref_nn / nn
    dx = width / nn
    steps = int(round(6e-3 / (0.8 * dx / 6107.0)))
    return {
        "simulation": {"steps": steps, "dt": "auto", "safety": 0.8,
                       "snapshot_every": max(1, steps // 12), "progress_every": 500},
        "switches": {"stretch_measure": "length_ratio", "normal_sign": "perpendicular",
                     "degeneracy_tol": 0.05},
        "output": {"directory": out, "formats": ["csv"]},
        "bodies": [{
            "id": 0, "geometry": "curved_bar", "n_n": nn, "length": 1.0, "width": width, "dim": dim,
            "horizon": delta,
            "material": dict(STEEL,
                             fracture_energy=_scaled_gc(1.0, delta, ref_delta)),
        }],
        "loads": [{"kind": "pressure_impulse", "body": 0, "region": "bar_ends",
                   "peak": peak, "duration": 300e-6}],
    }


def curved_bar_2d(scale="full", out="out/curved-bar-2d"):
    return _curved_bar(2, scale, out)


def curved_bar_3d(scale="full", out="out/curved-bar-3d"):
    return _curved_bar(3, scale, out)


def impact(scale="full", out="out/impact"):
    """Sphere shot through a free disc.

    The coarse disc uses ``delta = 2.015 dx`` and a 100 mm radius: the full
    ratio of about 8 gives hundreds of neighbors per point and an
    intractable three-neighbor table.  The contact horizon stays at the full
    disc horizon so the contact law (which scales with ``delta**-5``) is the
    same in both variants.
    """
    r, sphere_dx = 10e-3, 4e-3
    h, disc_dx = 10e-3, 5e-3
    ref_disc_delta = 40.075e-3
    if scale == "full":
        R, disc_delta = 0.25, ref_disc_delta
    else:
        R, disc_delta = 0.1, 2.015 * disc_dx
    l_c = 2.5e-3
    z0 = 0.5 * h + r + l_c
    travel = 2 * z0 + 2 * r
    steps = int(math.ceil(travel / 50.0 / (0.8 * sphere_dx / 5900.0)))
    return {
        "simulation": {"steps": steps, "dt": "auto", "safety": 0.8,
                       "snapshot_every": max(1, steps // 10), "progress_every": 200},
        "switches": {"stretch_measure": "length_ratio"},
        "output": {"directory": out, "formats": ["csv"]},
        "contact": {"pairs": [[0, 1]], "critical_distance": l_c, "stiffness": 1000e9,
                    "horizon": ref_disc_delta},
        "bodies": [
            {"id": 0, "geometry": "sphere", "radius": r, "spacing": sphere_dx,
             "center": [0.0, 0.0, z0], "horizon": 12.06e-3,
             "material": {"density": 7850.0, "youngs_modulus": 210e9, "poisson_ratio": 0.25,
                          "fracture_energy": 1500.0}},
            {"id": 1, "geometry": "disc", "radius": R, "height": h, "spacing": disc_dx,
             "center": [0.0, 0.0, 0.0], "horizon": disc_delta,
             "material": {"density": 2000.0, "youngs_modulus": 50e9, "poisson_ratio": 0.2,
                          "fracture_energy": _scaled_gc(1.0, disc_delta, ref_disc_delta)}},
        ],
        "loads": [{"kind": "initial_velocity", "body": 0, "velocity": [0.0, 0.0, -50.0]}],
    }


PRESETS = {
    "mode1-2d": mode1_2d,
    "mode1-3d": mode1_3d,
    "curved-bar-2d": curved_bar_2d,
    "curved-bar-3d": curved_bar_3d,
    "impact": impact,
}


def preset_config(name, scale="full", out=None):
    """Return the validated ``ScenarioConfig`` of a preset."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose from {', '.join(SCALES)}")
    kwargs = {"scale": scale}
    if out is not None:
        kwargs["out"] = out
    data = PRESETS[name](**kwargs)
    return parse_config(dump_config(data))


def preset_text(name, scale="full", out=None):
    return dump_config(preset_config(name, scale, out))
