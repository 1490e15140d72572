"""Operator-splitting simulator for stochastically forced fluid-structure interaction."""

__version__ = "0.1.0"

from .config import InitialData, NoiseConfig, PressureSignal, SchemeConfig, load_config
from .discretization import build_discretization, build_mesh, build_structure_mesh
from .scheme import run_path

__all__ = [
    "InitialData", "NoiseConfig", "PressureSignal", "SchemeConfig", "load_config",
    "build_discretization", "build_mesh", "build_structure_mesh", "run_path", "__version__",
]
