"""Continuum-kinematics-based peridynamics with cascading interaction failure."""

from .contact import ContactParams
from .damage import critical_stretch, point_damage
from .dynamics import Body, Simulation, SimulationAbort, intact_components
from .geometry import (
    CrackSegment, PointCloud, build_curved_bar, build_disc, build_grid, build_sphere,
    compute_fullness,
)
from .mechanics import Material, derive_constants_2d, derive_constants_3d
from .neighborhoods import InteractionTables, build_tables

__version__ = "0.1.0"

__all__ = [
    "Body", "ContactParams", "CrackSegment", "InteractionTables", "Material", "PointCloud",
    "Simulation", "SimulationAbort", "build_curved_bar", "build_disc", "build_grid",
    "build_sphere", "build_tables", "compute_fullness", "critical_stretch", "derive_constants_2d",
    "derive_constants_3d", "intact_components", "point_damage",
]
