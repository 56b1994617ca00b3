"""Master-equation and quantum-jump tools for nearly degenerate open quantum systems."""

from .analytic import AnalyticSolution, solution_for
from .bases import (
    BasisTransform,
    BlochVector,
    basis_by_name,
    bloch_map,
    decoherence_basis,
    diagonalize_lindblad,
    transform_state,
    v_model_pm_basis,
)
from .master import (
    Liouvillian,
    TimescaleReport,
    assemble,
    evolve,
    perturbative_slow_eigenvalue,
    steady_state,
    timescales,
)
from .models import BathSpec, Model, build_two_level, build_v_model, ground_state, thermal_state
from .trajectories import EnsembleSummary, TrajectoryRecord, ensemble_average, sample_trajectory

__version__ = "0.1.0"

__all__ = [
    "AnalyticSolution",
    "BasisTransform",
    "BathSpec",
    "BlochVector",
    "EnsembleSummary",
    "Liouvillian",
    "Model",
    "TimescaleReport",
    "TrajectoryRecord",
    "assemble",
    "basis_by_name",
    "bloch_map",
    "build_two_level",
    "build_v_model",
    "decoherence_basis",
    "diagonalize_lindblad",
    "ensemble_average",
    "evolve",
    "ground_state",
    "perturbative_slow_eigenvalue",
    "sample_trajectory",
    "solution_for",
    "steady_state",
    "thermal_state",
    "timescales",
    "transform_state",
    "v_model_pm_basis",
]
