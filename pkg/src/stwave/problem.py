"""Wave problem description and the benchmark problem catalogue."""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import exact as ex
from .geometry import half_annulus, unit_box

__all__ = ["WaveProblem", "make_problem", "PROBLEMS"]


@dataclass(frozen=True, eq=False)
class WaveProblem:
    """Data of ``u_tt - div(c^2 grad u) = f`` on ``Omega x (0, T)``.

    Parameters
    ----------
    geometry : GeometryMap
        Spatial map, final time and boundary tags.
    velocity : float or callable
        Wave speed ``c(x, t)``.  Callables take ``x`` of shape ``(n, d)``
        and ``t`` of shape ``(n,)``.
    steady_velocity : bool
        True when ``c`` does not depend on time; enables the Kronecker
        assembly path for variable ``c``.
    piecewise_velocity : bool
        Evaluate ``c`` once per spatial element at its midpoint (for
        velocities with jumps aligned to mesh lines).
    impedance : float
        Robin coefficient ``theta`` in ``theta c u_t + c^2 du/dn = g_R``.
    source, u0, u1, g_neumann, g_robin : callable or None
        ``source(x, t)``, ``u0(x)``, ``u1(x)``, ``g(x, t, normal)``.
        ``None`` means zero.  Dirichlet data are carried by the lifting of
        ``u0`` and must therefore be constant in time.
    periodic : bool
        Periodic in every space direction (boundary tags are ignored).
    exact : ExactSolution, optional
    """

    geometry: object
    velocity: object = 1.0
    steady_velocity: bool = True
    piecewise_velocity: bool = False
    impedance: float = 1.0
    source: Optional[Callable] = None
    u0: Optional[Callable] = None
    u1: Optional[Callable] = None
    g_neumann: Optional[Callable] = None
    g_robin: Optional[Callable] = None
    periodic: bool = False
    exact: object = None
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.geometry.T

    @property
    def dim(self):
        return self.geometry.dim

    @property
    def constant_velocity(self):
        return not callable(self.velocity)

    def velocity_at(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if self.constant_velocity:
            return np.full(n, float(self.velocity))
        t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
        return np.asarray(self.velocity(x, t), dtype=float).reshape(n)

    def dirichlet_faces(self):
        return frozenset() if self.periodic else frozenset(self.geometry.faces("dirichlet"))

    def with_exact_data(self, sol):
        return replace(self, source=sol.source, u0=sol.u0, u1=sol.u1, exact=sol)


def _standing(T=10.0):
    sol = ex.standing_wave(T)
    return WaveProblem(unit_box(1, T=T), source=sol.source, exact=sol, name="standing_wave")


def _high_frequency(k=4, T=2.0):
    sol = ex.high_frequency_wave(int(k), T)
    return WaveProblem(unit_box(1, T=T), u1=sol.u1, exact=sol, name=sol.name)


def _energy(T=10.0):
    sol = ex.energy_wave(T)
    return WaveProblem(unit_box(1, T=T), u0=sol.u0, u1=sol.u1, exact=sol, name="energy_wave")


def _linear(dim=1, T=1.0):
    sol = ex.linear_in_time(int(dim), T)
    geo = unit_box(int(dim), T=T).with_boundary(all="neumann")
    return WaveProblem(geo, u1=sol.u1, exact=sol, name="linear_in_time")


def _wavefront(T=0.375):
    sol = ex.wavefront_2d(T)
    geo = unit_box(2, T=T).with_boundary(all="neumann")
    return WaveProblem(geo, velocity=sol.velocity, source=sol.source, u0=sol.u0, u1=sol.u1,
                       g_neumann=sol.g_neumann, exact=sol, name="wavefront_2d")


def _disc_velocity(T=1.0):
    sol = ex.discontinuous_velocity_wave(T)
    geo = unit_box(1, T=T).with_boundary(all="neumann")
    return WaveProblem(geo, velocity=sol.velocity, piecewise_velocity=True, u0=sol.u0, u1=sol.u1,
                       exact=sol, name="discontinuous_velocity")


def _periodic(profile="tent", T=2.0):
    sol = ex.periodic_travelling_wave(profile, T)
    geo = unit_box(1, T=T).with_boundary(all="neumann")
    return WaveProblem(geo, u0=sol.u0, u1=sol.u1, periodic=True, exact=sol, name=sol.name)


def _scattering(T=6.0, r_in=1.0, r_out=3.0):
    geo = half_annulus(r_in, r_out, T)
    return WaveProblem(geo, source=ex.scattering_source(), impedance=1.0, name="scattering")


PROBLEMS = {
    "standing_wave": _standing,
    "high_frequency": _high_frequency,
    "energy_wave": _energy,
    "linear_in_time": _linear,
    "wavefront_2d": _wavefront,
    "discontinuous_velocity": _disc_velocity,
    "periodic_tent": lambda T=2.0: _periodic("tent", T),
    "periodic_bump": lambda T=2.0: _periodic("bump", T),
    "scattering": _scattering,
}


def make_problem(name, **kwargs):
    """Build a catalogued benchmark problem by name."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**kwargs)
