"""Thermodynamic formalism for weighted iterated function systems on [0,1]."""

from .expr import parse, to_string
from .grid import GridFunction, GridMeasure
from .holonomic import (
    LiftedMeasure,
    OrbitMeasure,
    Word,
    disintegrate,
    holonomy_defect,
    lift,
    make_orbit_measure,
    sigma_invariance_defect,
)
from .sim import birkhoff_average, chaos_game, cylinder_probability, empirical_measure
from .thermo import (
    beta_sweep,
    entropy_alt,
    entropy_inf,
    equilibrium_check,
    pressure_spectral,
    pressure_variational,
)
from .transfer import WeightedSystem, conjugate_system, normalize_system, spectral_triple

__all__ = [
    "GridFunction", "GridMeasure", "LiftedMeasure", "OrbitMeasure", "WeightedSystem", "Word",
    "beta_sweep", "birkhoff_average", "chaos_game", "conjugate_system", "cylinder_probability",
    "disintegrate", "empirical_measure", "entropy_alt", "entropy_inf", "equilibrium_check",
    "holonomy_defect", "lift", "make_orbit_measure", "normalize_system", "parse",
    "pressure_spectral", "pressure_variational", "sigma_invariance_defect", "spectral_triple",
    "to_string",
]
