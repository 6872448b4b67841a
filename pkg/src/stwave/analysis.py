"""
Error norms, convergence rates, energy, dispersion and stability diagnostics.

All integrals use elementwise Gauss quadrature on the solution's own mesh
(``p + 3`` points per element and direction unless stated otherwise).
Discrete functions are sampled through collocation matrices, so a full
space-time grid costs two sparse products per time chunk.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .discretization import spatial_collocation
from .exceptions import DomainError, InvalidSizeError, UndefinedRatioError
from .quadrature import mesh_quadrature, tensor_grid

__all__ = [
    "BLOW_UP",
    "ErrorReport",
    "EnergyTrace",
    "PhaseErrorTrace",
    "space_time_errors",
    "convergence_rates",
    "energy_trace",
    "exact_energy_trace",
    "phase_errors",
    "fourier_coefficient",
    "stability_constant",
    "stability_bound_check",
    "relative_difference",
]

BLOW_UP = 1e100


class _Grid:
    """Tensor quadrature grid on given spatial and temporal breakpoints."""

    def __init__(self, geometry, spatial_breaks, temporal_breaks, nq, nq_t=None):
        self.geometry = geometry
        pts, wts = zip(*(mesh_quadrature(b, nq) for b in spatial_breaks))
        self.pts_1d = list(pts)
        self.eta, w = tensor_grid(self.pts_1d, list(wts))
        self.X = geometry.map(self.eta)
        J = geometry.jacobian(self.eta)
        self.w = w * np.abs(np.linalg.det(J))
        self.invJT = np.linalg.inv(np.transpose(J, (0, 2, 1)))
        self.t, self.wt = mesh_quadrature(temporal_breaks, nq_t or nq)

    @classmethod
    def for_function(cls, fn, n_quad=None, nq_t=None):
        sp_ = fn.space
        nq = n_quad or max(sp_.degree_space, sp_.degree_time) + 3
        return cls(fn.geometry, [kv.breakpoints for kv in sp_.spatial], sp_.temporal.breakpoints, nq,
                   nq_t)

    def chunks(self, times, size=None):
        size = size or max(1, int(4e6 // max(self.eta.shape[0], 1)))
        for s in range(0, len(times), size):
            yield slice(s, s + size)

    def exact_fields(self, exact, t):
        """Exact u, u_t and gradient on ``X x t`` (shape (n_x, n_t[, d]))."""
        n, d = self.X.shape
        Xr = np.tile(self.X, (t.size, 1))
        tr = np.repeat(t, n)
        u = exact.u(Xr, tr).reshape(t.size, n).T
        ut = exact.u_t(Xr, tr).reshape(t.size, n).T
        g = exact.grad(Xr, tr).reshape(t.size, n, d).transpose(1, 0, 2)
        return u, ut, g

    def velocity(self, c, t):
        n = self.X.shape[0]
        if not callable(c):
            return np.full((n, t.size), float(c))
        Xr = np.tile(self.X, (t.size, 1))
        return np.asarray(c(Xr, np.repeat(t, n)), dtype=float).reshape(t.size, n).T


class _Sampler:
    """Values and derivatives of a DiscreteFunction on a grid."""

    def __init__(self, fn, grid):
        sp_ = fn.space
        dim = sp_.dim
        self.fn = fn
        self.C = fn.coefficient_matrix()
        self.B = spatial_collocation(sp_.spatial, grid.pts_1d, [0] * dim)
        self.BC = self.B @ self.C
        self.grid = grid

    @cached_property
    def dBC(self):
        sp_ = self.fn.space
        return [spatial_collocation(sp_.spatial, self.grid.pts_1d, [int(k == d) for k in range(sp_.dim)])
                @ self.C for d in range(sp_.dim)]

    def _temporal(self, t, deriv):
        return self.fn.space.temporal.collocation(t, deriv).toarray()

    def values(self, t):
        return self.BC @ self._temporal(t, 0).T

    def time_derivative(self, t):
        return self.BC @ self._temporal(t, 1).T

    def gradient(self, t):
        """Physical gradient, shape (n_x, n_t, d)."""
        Bt = self._temporal(t, 0).T
        hat = np.stack([dBC @ Bt for dBC in self.dBC], axis=-1)
        return np.einsum("xkd,xtd->xtk", self.grid.invJT, hat)


# ----------------------------------------------------------------------
@dataclass
class ErrorReport:
    """Discretization errors of one solve.

    ``l2`` and ``h1`` are relative space-time errors (``h1`` in the weighted
    seminorm ``int |e_t|^2 + c^2 |grad e|^2``); ``l2_final`` and ``h1_final``
    are relative errors of ``u_h(., T)`` in L2 and H1 of the domain.  When
    an exact norm vanishes the corresponding absolute error is stored and
    ``relative`` is False.
    """

    l2: float
    h1: float
    l2_final: float
    h1_final: float
    h_s: float
    h_t: float
    n_dof: int
    method: str = ""
    residual: float = float("nan")
    relative: bool = True
    blow_up: bool = False
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        out = {k: getattr(self, k) for k in ("h_t", "h_s", "n_dof", "l2", "h1", "l2_final",
                                             "h1_final", "residual", "method", "blow_up")}
        out.update(self.extra)
        return out


def _ratio(num, den):
    return (np.sqrt(num / den), True) if den > 0 else (np.sqrt(num), False)


def space_time_errors(solution, exact, velocity=1.0, n_quad=None, method="", residual=float("nan"),
                      n_dof=None):
    """Errors of a discrete solution against an analytic one.

    Parameters
    ----------
    solution : DiscreteFunction
    exact : ExactSolution
        Needs ``u``, ``u_t`` and ``grad``.
    velocity : float or callable
        Wave speed weighting the gradient term.
    n_quad : int, optional
        Points per element and direction (default ``p + 3``).
    method, residual, n_dof : optional
        Metadata copied into the report; ``n_dof`` defaults to the
        dimension of ``solution.space``.

    Returns
    -------
    ErrorReport
    """
    grid = _Grid.for_function(solution, n_quad)
    smp = _Sampler(solution, grid)
    e_l2 = u_l2 = e_h1 = u_h1 = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for s in grid.chunks(grid.t):
            t = grid.t[s]
            W = grid.w[:, None] * grid.wt[None, s]
            u, ut, g = grid.exact_fields(exact, t)
            c2 = grid.velocity(velocity, t) ** 2
            e = smp.values(t) - u
            et = smp.time_derivative(t) - ut
            eg = smp.gradient(t) - g
            e_l2 += np.sum(W * e * e)
            u_l2 += np.sum(W * u * u)
            e_h1 += np.sum(W * (et * et + c2 * np.sum(eg * eg, axis=-1)))
            u_h1 += np.sum(W * (ut * ut + c2 * np.sum(g * g, axis=-1)))

        T = np.array([solution.space.T])
        u, _, g = grid.exact_fields(exact, T)
        e = smp.values(T) - u
        eg = smp.gradient(T) - g
        w = grid.w[:, None]
        fe_l2 = np.sum(w * e * e)
        fu_l2 = np.sum(w * u * u)
        fe_h1 = fe_l2 + np.sum(w * np.sum(eg * eg, axis=-1))
        fu_h1 = fu_l2 + np.sum(w * np.sum(g * g, axis=-1))

    l2, rel1 = _ratio(e_l2, u_l2)
    h1, rel2 = _ratio(e_h1, u_h1)
    l2f, rel3 = _ratio(fe_l2, fu_l2)
    h1f, rel4 = _ratio(fe_h1, fu_h1)
    vals = np.array([l2, h1, l2f, h1f])
    blow = bool(np.any(~np.isfinite(vals)) or np.any(vals > BLOW_UP))
    sp_ = solution.space
    return ErrorReport(float(l2), float(h1), float(l2f), float(h1f), sp_.h_s, sp_.h_t,
                       int(sp_.n_dof if n_dof is None else n_dof), method, float(residual),
                       rel1 and rel2 and rel3 and rel4, blow)


def convergence_rates(pairs):
    """Pairwise slopes ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``.

    Parameters
    ----------
    pairs : sequence of (h, error)

    Returns
    -------
    ndarray, shape (len(pairs) - 1,)
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise InvalidSizeError("need at least two (h, error) pairs")
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise DomainError("mesh sizes and errors must be positive and finite")
    h, e = arr[:, 0], arr[:, 1]
    dh = np.log(h[:-1] / h[1:])
    if np.any(dh == 0):
        raise DomainError("consecutive mesh sizes must differ")
    return np.log(e[:-1] / e[1:]) / dh


# ----------------------------------------------------------------------
@dataclass
class EnergyTrace:
    """Discrete energy over time; ``sign`` is +1 where E_h > E, -1 below."""

    times: np.ndarray
    energy: np.ndarray
    exact: float
    rel_error: np.ndarray
    sign: np.ndarray


def _energy_trace_from(grid, u_t, grad, times, exact_energy, velocity=1.0):
    E = np.empty(len(times))
    for s in grid.chunks(times):
        t = np.asarray(times[s])
        ut = u_t(t)
        g = grad(t)
        c2 = grid.velocity(velocity, t) ** 2
        E[s] = 0.5 * (grid.w @ (ut * ut)) + 0.5 * (grid.w @ (c2 * np.sum(g * g, axis=-1)))
    if exact_energy is None or exact_energy == 0:
        rel = np.full_like(E, np.nan)
    else:
        rel = np.abs(E - exact_energy) / exact_energy
    sign = np.sign(E - exact_energy) if exact_energy is not None else np.zeros_like(E)
    return EnergyTrace(np.asarray(times, dtype=float), E, exact_energy, rel, sign)


def energy_trace(solution, times=None, exact_energy=None, n_quad=None, velocity=1.0):
    """``E_h(t) = 1/2 ||d_t u_h||^2 + 1/2 ||c grad u_h||^2`` at sample times.

    ``times`` defaults to 201 uniform samples on ``[0, T]``.
    """
    if times is None:
        times = np.linspace(0.0, solution.space.T, 201)
    grid = _Grid.for_function(solution, n_quad)
    smp = _Sampler(solution, grid)
    return _energy_trace_from(grid, smp.time_derivative, smp.gradient, np.asarray(times, float),
                              exact_energy, velocity)


def exact_energy_trace(exact, geometry, spatial_breaks, times, n_quad=8, exact_energy=None,
                       velocity=1.0):
    """Energy of an analytic field through the same quadrature pipeline.

    ``spatial_breaks`` holds one breakpoint array per direction; a single
    flat array is accepted for 1D geometries.
    """
    if np.ndim(spatial_breaks[0]) == 0:
        spatial_breaks = [spatial_breaks]
    grid = _Grid(geometry, spatial_breaks, np.array([0.0, geometry.T]), n_quad)

    def u_t(t):
        return grid.exact_fields(exact, t)[1]

    def grad(t):
        return grid.exact_fields(exact, t)[2]

    return _energy_trace_from(grid, u_t, grad, np.asarray(times, float), exact_energy, velocity)


# ----------------------------------------------------------------------
@dataclass
class PhaseErrorTrace:
    """Phase errors ``errors[i, j]`` of mode ``modes[i]`` at ``times[j]``."""

    modes: np.ndarray
    times: np.ndarray
    errors: np.ndarray
    coefficients: np.ndarray
    skipped: list = field(default_factory=list)


def fourier_coefficient(solution, modes, times, n_quad=None):
    """``c_{n,h}(t) = (1/L) int_0^L u_h(x, t) exp(-2 pi i n x / L) dx`` (1D).

    Returns
    -------
    ndarray, complex, shape (len(modes), len(times))
    """
    if solution.space.dim != 1:
        raise DomainError("Fourier coefficients are defined for 1D solutions")
    modes = np.atleast_1d(np.asarray(modes))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    p = solution.space.degree_space
    nq = n_quad or max(p + 3, 8)
    grid = _Grid.for_function(solution, nq)
    smp = _Sampler(solution, grid)
    L = float(solution.geometry.map(np.array([[1.0]]))[0, 0])
    x = grid.X[:, 0]
    U = smp.values(times)
    E = np.exp(-2j * np.pi * np.outer(modes, x) / L) * grid.w[None, :]
    return (E @ U) / L


def phase_errors(solution, modes, times, fourier, n_quad=None, tol=1e-14):
    """``|arg(c_n conj(c_{n,h}))|`` per mode and sample time.

    Parameters
    ----------
    fourier : callable
        ``fourier(n, t)`` exact coefficient (vectorized in ``t``).

    Modes whose exact coefficient vanishes are reported as NaN and listed
    in ``skipped``.
    """
    modes = np.atleast_1d(np.asarray(modes))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ch = fourier_coefficient(solution, modes, times, n_quad)
    errors = np.empty(ch.shape)
    skipped = []
    for i, n in enumerate(modes):
        c = np.asarray(fourier(n, times), dtype=complex)
        bad = np.abs(c) <= tol
        errors[i] = np.abs(np.angle(c * np.conj(ch[i])))
        errors[i, bad] = np.nan
        if np.any(bad):
            skipped.append(int(n))
    return PhaseErrorTrace(modes, times, errors, ch, skipped)


# ----------------------------------------------------------------------
def stability_constant(T):
    return 4.0 / np.pi * float(T) ** 2


def stability_bound_check(solution, f, T=None, n_quad=None):
    """``||u_h||_{L2(Q)} / ((4/pi) T^2 ||f||_{L2(Q)})``.

    Raises
    ------
    UndefinedRatioError
        If ``||f|| = 0``.
    """
    T = solution.space.T if T is None else float(T)
    grid = _Grid.for_function(solution, n_quad)
    smp = _Sampler(solution, grid)
    nu = nf = 0.0
    n = grid.X.shape[0]
    for s in grid.chunks(grid.t):
        t = grid.t[s]
        W = grid.w[:, None] * grid.wt[None, s]
        u = smp.values(t)
        fv = np.asarray(f(np.tile(grid.X, (t.size, 1)), np.repeat(t, n)), float).reshape(t.size, n).T
        nu += np.sum(W * u * u)
        nf += np.sum(W * fv * fv)
    if nf == 0.0:
        raise UndefinedRatioError("source has zero L2 norm; ratio 0/0")
    return float(np.sqrt(nu) / (stability_constant(T) * np.sqrt(nf)))


def relative_difference(coarse, fine, n_quad=None):
    """``||u_c - u_f||_{L2(Q)} / ||u_f||_{L2(Q)}`` on the fine mesh.

    The coarse mesh must be nested in the fine one so that the integrand is
    polynomial on every fine element; the default ``p + 1`` points per
    direction are then exact.
    """
    if n_quad is None:
        n_quad = max(fine.space.degree_space, fine.space.degree_time) + 1
    grid = _Grid.for_function(fine, n_quad)
    sf = _Sampler(fine, grid)
    sc = _Sampler(coarse, grid)
    num = den = 0.0
    for s in grid.chunks(grid.t):
        t = grid.t[s]
        W = grid.w[:, None] * grid.wt[None, s]
        uf = sf.values(t)
        d = sc.values(t) - uf
        num += np.sum(W * d * d)
        den += np.sum(W * uf * uf)
    if den == 0.0:
        raise UndefinedRatioError("reference solution vanishes")
    return float(np.sqrt(num / den))
