"""Estimator-style front end: configure, ``fit`` a problem, ``predict`` at points."""
import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_positive
from .analysis import space_time_errors
from .assembly import (METHODS, LinearSystem, apply_lifting, assemble_rhs, assemble_system,
                       default_delta, separable_factors, tensor_factors)
from .discretization import build_spaces
from .exceptions import InvalidParameterError, InvalidRegularityError, SingularSystemError
from .discretization import interpolate_lifting
from .linsolve import factorize, residual_norm, solve, solve_modes, solve_separable
from .splines import make_open_knot_vector, make_periodic_space

__all__ = ["SpaceTimeWaveSolver"]


class SpaceTimeWaveSolver(BaseEstimator):
    """Space-time spline Petrov--Galerkin solver for the wave equation.

    Parameters
    ----------
    degree : int, default=2
        Spatial spline degree (also the temporal one unless
        ``degree_time`` is given).
    degree_time : int, optional
    n_elements_space : int or tuple of int, default=16
        Uniform elements per space direction.
    n_elements_time : int, default=16
    regularity_space, regularity_time : int, optional
        Continuity at interior breakpoints (default: maximal, ``p - 1``).
    method : {"plain", "iga-stab", "fem-stab"}, default="iga-stab"
    delta : float, optional
        Penalty weight of ``"iga-stab"``; default ``10**-degree_time``.
    c0_breakpoints : sequence of float, default=()
        Parametric locations where every spatial direction is only C0.
    assembly : {"auto", "kron", "element"}, default="auto"
    threads : int, default=1
        Workers of the element-loop assembly.
    refine : int, default=1
        Rounds of iterative refinement after the direct solve.
    solver : {"auto", "banded", "sparse", "modes"}, default="auto"
        ``"modes"`` splits 2D problems with constant velocity on a box or
        half annulus into one system per eigenfunction of the second
        direction (:func:`~stwave.linsolve.solve_modes`); the full
        operator is never assembled, so much finer meshes fit in memory.
    fallback : {"raise", "exact"}, default="raise"
        What to do when the direct solver finds the operator numerically
        singular.  ``"exact"`` switches to the modal solve in exact rational
        arithmetic (:func:`~stwave.linsolve.solve_separable`), available for
        time-independent velocity without Robin faces; otherwise the
        :class:`~stwave.exceptions.SingularSystemError` propagates.

    Attributes
    ----------
    solution_ : DiscreteFunction
        Discrete solution (lifting included) on the unconstrained space.
    system_ : LinearSystem
    coef_ : ndarray
        Trial-space coefficients.
    residual_ : dict
        Residual report of the final solve.
    status_ : {"ok", "singular-exact"}
    n_dof_ : int
    problem_ : WaveProblem

    Examples
    --------
    >>> from stwave import SpaceTimeWaveSolver, make_problem
    >>> est = SpaceTimeWaveSolver(degree=2, n_elements_space=8, n_elements_time=8)
    >>> est.fit(make_problem("standing_wave", T=1.0)).n_dof_
    72
    """

    def __init__(self, degree=2, degree_time=None, n_elements_space=16, n_elements_time=16,
                 regularity_space=None, regularity_time=None, method="iga-stab", delta=None,
                 c0_breakpoints=(), assembly="auto", threads=1, refine=1, solver="auto",
                 fallback="raise"):
        self.degree = degree
        self.degree_time = degree_time
        self.n_elements_space = n_elements_space
        self.n_elements_time = n_elements_time
        self.regularity_space = regularity_space
        self.regularity_time = regularity_time
        self.method = method
        self.delta = delta
        self.c0_breakpoints = c0_breakpoints
        self.assembly = assembly
        self.threads = threads
        self.refine = refine
        self.solver = solver
        self.fallback = fallback

    # ------------------------------------------------------------------
    def _validate(self, dim):
        p = check_count(self.degree, "degree", 1)
        pt = p if self.degree_time is None else check_count(self.degree_time, "degree_time", 1)
        ne = self.n_elements_space
        ne = (ne,) * dim if isinstance(ne, numbers.Integral) else tuple(ne)
        if len(ne) != dim:
            raise InvalidParameterError(f"n_elements_space needs {dim} entries, got {len(ne)}")
        ne = tuple(check_count(n, "n_elements_space", 1) for n in ne)
        nt = check_count(self.n_elements_time, "n_elements_time", 1)
        for q, deg, name in ((self.regularity_space, p, "regularity_space"),
                             (self.regularity_time, pt, "regularity_time")):
            if q is not None and not -1 <= q <= deg - 1:
                raise InvalidRegularityError(f"{name} must lie in [-1, {deg - 1}], got {q}")
        method = str(self.method).replace("_", "-")
        if method not in METHODS:
            raise InvalidParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.delta is not None:
            check_positive(self.delta, "delta")
        if self.assembly not in ("auto", "kron", "element"):
            raise InvalidParameterError(f"assembly must be auto, kron or element, got {self.assembly!r}")
        check_count(self.threads, "threads", 1)
        check_count(self.refine, "refine", 0)
        if self.solver not in ("auto", "banded", "sparse", "modes"):
            raise InvalidParameterError(f"solver must be auto, banded, sparse or modes, got {self.solver!r}")
        if self.fallback not in ("raise", "exact"):
            raise InvalidParameterError(f"fallback must be raise or exact, got {self.fallback!r}")
        return p, pt, ne, nt, method

    def build_spaces(self, problem):
        """Trial and test spaces for ``problem`` under the current parameters."""
        p, pt, ne, nt, _ = self._validate(problem.dim)
        if problem.periodic:
            kvs = [make_periodic_space((0.0, 1.0), n, p) for n in ne]
        else:
            kvs = [make_open_knot_vector((0.0, 1.0), n, p, self.regularity_space,
                                         tuple(self.c0_breakpoints)) for n in ne]
        tkv = make_open_knot_vector((0.0, problem.T), nt, pt, self.regularity_time)
        return build_spaces(kvs, tkv, problem.dirichlet_faces())

    def fit(self, problem, y=None):
        """Assemble and solve ``problem`` (a :class:`~stwave.problem.WaveProblem`)."""
        _, _, _, _, method = self._validate(problem.dim)
        trial, test = self.build_spaces(problem)
        if self.solver == "modes":
            return self._fit_modes(problem, trial, test, method)
        system = assemble_system(problem, trial, test, method, delta=self.delta, path=self.assembly,
                                 threads=self.threads)
        try:
            fact = factorize(system, method=self.solver)
            coef, info = solve(fact, system.rhs, refine=self.refine, return_info=True)
            stats, status = dict(fact.stats, kind=fact.kind), "ok"
        except SingularSystemError as exc:
            if self.fallback != "exact":
                raise
            try:
                factors = separable_factors(problem, trial, test, method, self.delta)
            except InvalidParameterError:
                raise exc from None
            coef = solve_separable(*factors, system.rhs)
            with np.errstate(all="ignore"):
                res, scale = residual_norm(system.operator, coef, system.rhs)
            info = {"residual": res, "scale": scale,
                    "relative_residual": res / scale if scale > 0 else 0.0, "ok": False}
            stats = {"kind": "exact-modal", "min_pivot_ratio": exc.pivot_ratio}
            status = "singular-exact"
        self.problem_ = problem
        self.system_ = system
        self.status_ = status
        self.factorization_stats_ = stats
        self.coef_ = coef
        self.residual_ = info
        self.n_dof_ = trial.n_dof
        self.solution_ = system.solution(coef)
        return self

    def _fit_modes(self, problem, trial, test, method):
        op = tensor_factors(problem, trial, test, method, self.delta)
        full_op = tensor_factors(problem, trial, test, method, self.delta, columns="full")
        delta = None
        if method == "iga-stab":
            delta = default_delta(trial.degree_time) if self.delta is None else float(self.delta)
        system = LinearSystem(op, assemble_rhs(problem, test), trial, test, problem.geometry,
                              method, delta, "tensor", full_op)
        if problem.u0 is not None:
            system = apply_lifting(system, interpolate_lifting(problem.u0, trial, problem.geometry))
        coef, info = solve_modes(op, system.rhs, refine=self.refine, return_info=True)
        self.problem_ = problem
        self.system_ = system
        self.status_ = "ok"
        self.factorization_stats_ = {"kind": "modes", "n_modes": info.pop("n_modes"),
                                     "min_pivot_ratio": info.pop("min_pivot_ratio")}
        self.coef_ = coef
        self.residual_ = info
        self.n_dof_ = trial.n_dof
        self.solution_ = system.solution(coef)
        return self

    def predict(self, X):
        """Solution values at space-time points.

        Parameters
        ----------
        X : array_like, shape (n, d + 1)
            Columns ``x_1, ..., x_d, t``.
        """
        check_is_fitted(self, "solution_")
        X = np.asarray(X, dtype=float)
        d = self.problem_.dim
        if X.ndim != 2 or X.shape[1] != d + 1:
            raise InvalidParameterError(f"X must have shape (n, {d + 1}), got {X.shape}")
        return self.solution_(X[:, :d], X[:, d])

    def error_report(self, exact=None, n_quad=None):
        """:class:`~stwave.analysis.ErrorReport` against ``exact`` (default: the problem's)."""
        check_is_fitted(self, "solution_")
        exact = exact if exact is not None else self.problem_.exact
        if exact is None:
            raise InvalidParameterError("problem has no exact solution")
        return space_time_errors(self.solution_, exact, self.problem_.velocity, n_quad,
                                 method=self.system_.method, residual=self.residual_["residual"],
                                 n_dof=self.n_dof_)
