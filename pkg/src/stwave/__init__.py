"""Unconditionally stable space-time spline Petrov--Galerkin solver for the wave equation."""
from .analysis import (ErrorReport, convergence_rates, energy_trace, phase_errors,
                       space_time_errors, stability_bound_check)
from .assembly import (LinearSystem, apply_lifting, assemble_1d, assemble_fem_stab,
                       assemble_iga_stab, assemble_plain, assemble_rhs, assemble_system)
from .discretization import DiscreteFunction, SpaceTimeSpace, build_spaces, interpolate_lifting
from .estimator import SpaceTimeWaveSolver
from .exceptions import *  # noqa: F401,F403
from .geometry import half_annulus, pullback_gradient, unit_box
from .linsolve import factorize, solve, solve_separable
from .problem import PROBLEMS, WaveProblem, make_problem
from .quadrature import gauss_legendre, map_to_element
from .splines import (KnotVector, eval_basis, greville_abscissae, make_open_knot_vector,
                      make_periodic_space)

__version__ = "0.1.0"
