"""P1 finite elements and three-level time stepping for weakly damped wave equations."""

from .analysis import (DecayFit, DecayRateEstimator, EnergyRecord, ErrorRecord,
                       compensator_params, convergence_rates, discrete_energy,
                       error_norms, fit_decay_rate, fit_norm_decay,
                       steady_state_solve, theoretical_delta_max)
from .assembly import (CoefficientField, assemble_load, assemble_stiffness,
                       assemble_weighted_mass, nodal_interpolant)
from .linalg import ConvergenceError, SolveReport, cg_solve, smallest_eigenvalue
from .mesh import Mesh, build_rect_mesh, interior_index_map
from .stepper import (NumericalError, PrecomputedSystem, SimConfig, StepperState,
                      cubic, initialize, run, step)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "SolveReport",
    "cg_solve",
    "smallest_eigenvalue",
    "Mesh",
    "build_rect_mesh",
    "interior_index_map",
    "DecayFit",
    "DecayRateEstimator",
    "EnergyRecord",
    "ErrorRecord",
    "compensator_params",
    "convergence_rates",
    "discrete_energy",
    "error_norms",
    "fit_decay_rate",
    "fit_norm_decay",
    "steady_state_solve",
    "theoretical_delta_max",
    "CoefficientField",
    "assemble_load",
    "assemble_stiffness",
    "assemble_weighted_mass",
    "nodal_interpolant",
    "NumericalError",
    "PrecomputedSystem",
    "SimConfig",
    "StepperState",
    "cubic",
    "initialize",
    "run",
    "step",
]
