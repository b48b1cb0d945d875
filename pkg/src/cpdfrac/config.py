"""Scenario configuration: strict TOML parsing, validation and echo-dumping.

A scenario file has the sections ``[simulation]``, ``[switches]``,
``[output]``, ``[contact]`` and the arrays ``[[bodies]]`` and ``[[loads]]``.
Every key is checked; unknown keys are errors.  All values are SI.  See
README.md for the full key reference.
"""

from dataclasses import dataclass, field
import math
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

REQUIRED = object()


class ConfigError(ValueError):
    """Validation failure; ``errors`` holds one message per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


# -- value checkers ---------------------------------------------------------------

def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {v!r}")
    return v


def positive(v):
    v = _num(v)
    if not v > 0:
        raise ValueError(f"must be positive, got {v!r}")
    return v


def nonnegative(v):
    v = _num(v)
    if v < 0:
        raise ValueError(f"must be non-negative, got {v!r}")
    return v


def number(v):
    return _num(v)


def integer(lo):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")
        if v < lo:
            raise ValueError(f"must be >= {lo}, got {v}")
        return v
    return check


def boolean(v):
    if not isinstance(v, bool):
        raise ValueError(f"expected true or false, got {v!r}")
    return v


def string(v):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def choice(*options):
    def check(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(map(str, options))}, got {v!r}")
        return v
    return check


def vector(n, elem=number):
    def check(v):
        if not isinstance(v, list) or len(v) != n:
            raise ValueError(f"expected a list of {n} numbers, got {v!r}")
        return [elem(x) for x in v]
    return check


def vec3(v):
    return vector(3)(v)


def counts_list(v):
    if not isinstance(v, list) or len(v) not in (2, 3):
        raise ValueError(f"expected 2 or 3 point counts, got {v!r}")
    return [integer(1)(c) for c in v]


def poisson(v):
    v = _num(v)
    if not -1.0 < v < 0.5:
        raise ValueError(f"Poisson ratio out of range (-1, 0.5): {v}")
    return v


def dt_value(v):
    if v == "auto":
        return v
    return positive(v)


def pairs_list(v):
    if not isinstance(v, list):
        raise ValueError(f"expected a list of body-id pairs, got {v!r}")
    return [vector(2, integer(0))(p) for p in v]


def formats_list(v):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of formats")
    return [choice("csv", "vtk")(f) for f in v]


# -- schema -----------------------------------------------------------------------

SIMULATION = {
    "steps": (REQUIRED, integer(0)),
    "dt": ("auto", dt_value),
    "safety": (0.5, positive),
    "snapshot_every": (0, integer(0)),
    "progress_every": (0, integer(0)),
    "threads": (1, integer(1)),
    "table_cache": ("", string),
}
SWITCHES = {
    "stretch_measure": ("displacement_norm", choice("displacement_norm", "length_ratio")),
    "normal_sign": ("perpendicular", choice("printed", "perpendicular")),
    "bc_thickness": (3.0, positive),
    "cascade": (True, boolean),
    "protect_bc_bonds": (True, boolean),
    "degeneracy_tol": (1e-12, positive),
}
OUTPUT = {
    "directory": (REQUIRED, string),
    "formats": (["csv"], formats_list),
}
CONTACT = {
    "pairs": (REQUIRED, pairs_list),
    "critical_distance": (REQUIRED, positive),
    "stiffness": (REQUIRED, positive),
    "horizon": (None, positive),
}
MATERIAL = {
    "density": (REQUIRED, positive),
    "youngs_modulus": (REQUIRED, positive),
    "poisson_ratio": (REQUIRED, poisson),
    "fracture_energy": (REQUIRED, positive),
    "critical_stretch": (None, positive),
}
CRACK = {
    "a": (REQUIRED, vec3),
    "b": (REQUIRED, vec3),
    "thickness_dir": ([0.0, 0.0, 1.0], vec3),
}
BODY_COMMON = {
    "id": (REQUIRED, integer(0)),
    "geometry": (REQUIRED, choice("grid", "curved_bar", "sphere", "disc")),
    "horizon": (REQUIRED, positive),
    "material": (REQUIRED, None),
    "cracks": ([], None),
}
GEOMETRY = {
    "grid": {"counts": (REQUIRED, counts_list), "spacing": (REQUIRED, positive),
             "origin": ([0.0, 0.0, 0.0], vec3)},
    "curved_bar": {"n_n": (REQUIRED, integer(1)), "length": (1.0, positive),
                   "width": (0.0625, positive), "dim": (2, choice(2, 3))},
    "sphere": {"radius": (REQUIRED, positive), "spacing": (REQUIRED, positive),
               "center": ([0.0, 0.0, 0.0], vec3)},
    "disc": {"radius": (REQUIRED, positive), "height": (REQUIRED, positive),
             "spacing": (REQUIRED, positive), "center": ([0.0, 0.0, 0.0], vec3)},
}
LOAD_COMMON = {
    "kind": (REQUIRED, choice("velocity_region", "pressure_impulse", "initial_velocity")),
    "body": (REQUIRED, integer(0)),
}
LOADS = {
    "velocity_region": {"region": (REQUIRED, choice("top", "bottom", "box")),
                        "velocity": (REQUIRED, vec3),
                        "box_min": (None, vec3), "box_max": (None, vec3)},
    "pressure_impulse": {"region": ("bar_ends", choice("bar_ends")),
                         "peak": (REQUIRED, positive), "duration": (REQUIRED, positive)},
    "initial_velocity": {"velocity": (REQUIRED, vec3)},
}
TOP_LEVEL = ("simulation", "switches", "output", "contact", "bodies", "loads")
REQUIRED_SECTIONS = ("simulation", "output", "bodies")


@dataclass
class ScenarioConfig:
    simulation: dict
    switches: dict
    output: dict
    bodies: list
    loads: list = field(default_factory=list)
    contact: dict = None

    def to_dict(self):
        d = {"simulation": self.simulation, "switches": self.switches,
             "output": self.output, "bodies": self.bodies}
        if self.loads:
            d["loads"] = self.loads
        if self.contact is not None:
            d["contact"] = self.contact
        return _strip_none(d)

    def body(self, body_id):
        for b in self.bodies:
            if b["id"] == body_id:
                return b
        raise KeyError(body_id)


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_strip_none(v) for v in obj]
    return obj


# -- line lookup --------------------------------------------------------------------

_HEADER = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _line_index(text):
    """Map dotted paths (``bodies[0].material.density``) to 1-based line numbers."""
    lines = {}
    counters = {}
    current = ""
    for no, line in enumerate(text.splitlines(), 1):
        m = _HEADER.match(line)
        if m:
            parts = m.group(2).split(".")
            path = ""
            for depth, part in enumerate(parts):
                name = f"{path}.{part}" if path else part
                last = depth == len(parts) - 1
                if last and m.group(1) == "[[":
                    counters[name] = counters.get(name, -1) + 1
                    path = f"{name}[{counters[name]}]"
                elif name in counters:
                    path = f"{name}[{counters[name]}]"
                else:
                    path = name
            current = path
            lines.setdefault(current, no)
            continue
        m = _KEY.match(line)
        if m:
            key = f"{current}.{m.group(1)}" if current else m.group(1)
            lines.setdefault(key, no)
    return lines


class _Checker:
    def __init__(self, text):
        self.lines = _line_index(text)
        self.errors = []

    def where(self, path):
        probe = path
        while probe:
            if probe in self.lines:
                return f"line {self.lines[probe]}: "
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        return ""

    def error(self, path, msg):
        self.errors.append(f"{self.where(path)}{path}: {msg}")

    def section(self, data, schema, path, skip=()):
        if not isinstance(data, dict):
            self.error(path, "expected a table")
            return {}
        out = {}
        for key in data:
            if key not in schema and key not in skip:
                self.error(f"{path}.{key}", "unknown key")
        for key, (default, check) in schema.items():
            if key in skip:
                continue
            if key not in data:
                if default is REQUIRED:
                    self.error(f"{path}.{key}", "missing required key")
                else:
                    out[key] = default
                continue
            if check is None:
                out[key] = data[key]
                continue
            try:
                out[key] = check(data[key])
            except ValueError as exc:
                self.error(f"{path}.{key}", str(exc))
        return out


def parse_config(text):
    """Parse and validate scenario text; raise ``ConfigError`` listing every problem."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    chk = _Checker(text)
    for key in data:
        if key not in TOP_LEVEL:
            chk.error(key, "unknown section")
    missing = [s for s in REQUIRED_SECTIONS if s not in data]
    if missing:
        chk.errors.append("missing required section(s): " + ", ".join(f"[{s}]" for s in missing))

    sim = chk.section(data.get("simulation", {}), SIMULATION, "simulation") if "simulation" in data else {}
    switches = chk.section(data.get("switches", {}), SWITCHES, "switches")
    output = chk.section(data["output"], OUTPUT, "output") if "output" in data else {}
    contact = chk.section(data["contact"], CONTACT, "contact") if "contact" in data else None

    bodies = []
    raw_bodies = data.get("bodies", [])
    if not isinstance(raw_bodies, list) or ("bodies" in data and not raw_bodies):
        chk.error("bodies", "expected at least one [[bodies]] entry")
        raw_bodies = []
    for n, rb in enumerate(raw_bodies):
        bodies.append(_body(chk, rb, f"bodies[{n}]"))

    ids = [b.get("id") for b in bodies]
    known = set(i for i in ids if i is not None)
    if len(known) != len([i for i in ids if i is not None]):
        chk.error("bodies", "duplicate body id")
    if known and sorted(known) != list(range(len(bodies))):
        chk.error("bodies", "body ids must be 0, 1, ..., n-1")

    loads = []
    raw_loads = data.get("loads", [])
    if not isinstance(raw_loads, list):
        chk.error("loads", "expected [[loads]] entries")
        raw_loads = []
    for n, rl in enumerate(raw_loads):
        loads.append(_load(chk, rl, f"loads[{n}]", known, bodies))

    if contact is not None:
        for a, b in contact.get("pairs", []):
            for i in (a, b):
                if i not in known:
                    chk.error("contact.pairs", f"unknown body id {i}")
            if a == b:
                chk.error("contact.pairs", "a contact pair must join two distinct bodies")

    if chk.errors:
        raise ConfigError(chk.errors)
    return ScenarioConfig(sim, switches, output, bodies, loads, contact)


def _body(chk, rb, path):
    if not isinstance(rb, dict):
        chk.error(path, "expected a table")
        return {}
    kind = rb.get("geometry")
    geo = GEOMETRY.get(kind, {})
    schema = dict(BODY_COMMON, **geo)
    body = chk.section(rb, schema, path)
    if "material" in rb:
        body["material"] = chk.section(rb["material"], MATERIAL, f"{path}.material")
    cracks = rb.get("cracks", [])
    if not isinstance(cracks, list):
        chk.error(f"{path}.cracks", "expected [[bodies.cracks]] entries")
        cracks = []
    body["cracks"] = [chk.section(c, CRACK, f"{path}.cracks[{k}]") for k, c in enumerate(cracks)]
    for k, c in enumerate(body["cracks"]):
        if c.get("a") is not None and c.get("a") == c.get("b"):
            chk.error(f"{path}.cracks[{k}]", "crack endpoints must differ")
    return body


def _load(chk, rl, path, known, bodies):
    if not isinstance(rl, dict):
        chk.error(path, "expected a table")
        return {}
    kind = rl.get("kind")
    schema = dict(LOAD_COMMON, **LOADS.get(kind, {}))
    load = chk.section(rl, schema, path)
    body = load.get("body")
    if body is not None and body not in known:
        chk.error(f"{path}.body", f"unknown body id {body}")
    if kind == "velocity_region" and load.get("region") == "box":
        if load.get("box_min") is None or load.get("box_max") is None:
            chk.error(path, "region = 'box' needs box_min and box_max")
    if kind == "pressure_impulse" and body in known:
        b = next(b for b in bodies if b.get("id") == body)
        if b.get("geometry") != "curved_bar":
            chk.error(f"{path}.region", "bar_ends loading needs a curved_bar body")
    return load


def dump_config(cfg):
    """TOML text of a config; a ``ScenarioConfig`` is written with defaults made explicit."""
    data = cfg.to_dict() if isinstance(cfg, ScenarioConfig) else _strip_none(cfg)
    return tomli_w.dumps(data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
