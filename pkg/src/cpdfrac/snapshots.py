"""Snapshot files (CSV and legacy VTK) and the run report."""

import csv
import json
import os

import numpy as np

COLUMNS = ("body", "X1", "X2", "X3", "u1", "u2", "u3", "v1", "v2", "v3", "damage")


def snapshot_name(step, ext="csv"):
    return f"snap_{step:08d}.{ext}"


def _rows(sim):
    s = sim.state
    return zip(sim.body_ids, sim.X, s.u, s.v, s.damage)


def write_csv(path, sim):
    """One row per point.  Floats are written with ``repr`` so reading back is exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for body, X, u, v, d in _rows(sim):
            w.writerow([int(body), *map(repr, map(float, X)), *map(repr, map(float, u)),
                        *map(repr, map(float, v)), repr(float(d))])


def read_snapshot(path):
    """Read a CSV snapshot into a dict of arrays keyed by column name."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = list(r)
    data = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    out = {name: data[:, k] for k, name in enumerate(COLUMNS)}
    out["body"] = out["body"].astype(np.int64)
    return out


def write_vtk(path, sim):
    """Legacy ASCII VTK polydata with displacement, velocity, damage and body id."""
    s = sim.state
    x = sim.positions
    n = len(x)
    fmt = lambda a: "\n".join(" ".join(repr(float(c)) for c in row) for row in a)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"step {s.step} t {s.t!r}\n")
        fh.write("ASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {n} double\n{fmt(x)}\n")
        fh.write(f"VERTICES {n} {2 * n}\n")
        fh.write("\n".join(f"1 {i}" for i in range(n)) + "\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write(f"VECTORS displacement double\n{fmt(s.u)}\n")
        fh.write(f"VECTORS velocity double\n{fmt(s.v)}\n")
        fh.write("SCALARS damage double 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(repr(float(d)) for d in s.damage) + "\n")
        fh.write("SCALARS body int 1\nLOOKUP_TABLE default\n")
        fh.write("\n".join(str(int(b)) for b in sim.body_ids) + "\n")


class SnapshotWriter:
    """Callback for ``Simulation.run`` writing one file per format and snapshot."""

    def __init__(self, directory, formats=("csv",)):
        self.directory = directory
        self.formats = tuple(formats)
        self.written = []
        os.makedirs(directory, exist_ok=True)

    def __call__(self, sim):
        step = sim.state.step
        for f in self.formats:
            path = os.path.join(self.directory, snapshot_name(step, f))
            (write_csv if f == "csv" else write_vtk)(path, sim)
            self.written.append(path)


def write_report(path, report):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
