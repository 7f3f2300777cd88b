"""Model-free data-driven elasto-plasticity in Haigh-Westergaard space."""

from .data_foundry import build_extended, gen_tension_torsion, gen_tensile_paths, nearest_by_alpha
from .dd_engine import DataDrivenSolver
from .reference_plasticity import ReferenceMaterial, ReferenceSolver
from .yield_surface import YieldSurfaceInterpolator, fit_yield

__all__ = [
    "DataDrivenSolver",
    "ReferenceMaterial",
    "ReferenceSolver",
    "YieldSurfaceInterpolator",
    "build_extended",
    "fit_yield",
    "gen_tension_torsion",
    "gen_tensile_paths",
    "nearest_by_alpha",
]

__version__ = "0.1.0"
