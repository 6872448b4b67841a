"""
Closed-form solutions and data for the benchmark wave problems.

Every solution exposes its value, time derivative and spatial gradient as
vectorized callables ``f(x, t)`` with ``x`` of shape ``(n, d)``.  Smooth
solutions are written symbolically and the source ``f = u_tt - div(c^2
grad u)`` is derived with sympy; bump-based solutions are coded by hand.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sym

__all__ = [
    "ExactSolution",
    "bump",
    "bump_derivative",
    "standing_wave",
    "high_frequency_wave",
    "wavefront_2d",
    "energy_wave",
    "linear_in_time",
    "discontinuous_velocity_wave",
    "periodic_travelling_wave",
    "tent_profile",
    "bump_profile",
    "scattering_source",
]


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Analytic solution with the data needed to pose its wave problem."""

    name: str
    dim: int
    T: float
    u: Callable
    u_t: Callable
    grad: Callable
    velocity: object = 1.0
    source: Optional[Callable] = None
    u0: Optional[Callable] = None
    u1: Optional[Callable] = None
    g_neumann: Optional[Callable] = None
    fourier: Optional[Callable] = None
    meta: dict = field(default_factory=dict)


def _cols(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return [x[:, i] for i in range(x.shape[1])]


def _vectorize(fn, dim, with_t=True):
    def wrapped(x, t=0.0):
        cols = _cols(x)
        n = cols[0].shape[0]
        tt = np.broadcast_to(np.asarray(t, dtype=float), (n,))
        out = fn(*cols, tt) if with_t else fn(*cols)
        return np.broadcast_to(np.asarray(out, dtype=float), (n,)).copy()
    return wrapped


def _symbolic(name, u_expr, c_expr, dim, T, **meta):
    xs = sym.symbols("x y")[:dim]
    t = sym.Symbol("t")
    args = (*xs, t)
    grads = [sym.diff(u_expr, v) for v in xs]
    u_t = sym.diff(u_expr, t)
    f = sym.diff(u_expr, t, 2) - sum(sym.diff(c_expr ** 2 * g, v) for g, v in zip(grads, xs))
    f = sym.simplify(f)
    lam = lambda e: sym.lambdify(args, e, modules="numpy")  # noqa: E731

    u_fn = _vectorize(lam(u_expr), dim)
    ut_fn = _vectorize(lam(u_t), dim)
    grad_fns = [_vectorize(lam(g), dim) for g in grads]
    f_fn = _vectorize(lam(f), dim) if f != 0 else None
    c_fn = float(c_expr) if c_expr.is_number else _vectorize(lam(c_expr), dim)
    c2_grad = [_vectorize(lam(c_expr ** 2 * g), dim) for g in grads]

    def grad(x, t):
        return np.stack([g(x, t) for g in grad_fns], axis=1)

    def g_neumann(x, t, normal):
        return sum(g(x, t) * normal[:, i] for i, g in enumerate(c2_grad))

    return ExactSolution(
        name=name, dim=dim, T=T, u=u_fn, u_t=ut_fn, grad=grad, velocity=c_fn, source=f_fn,
        u0=lambda x: u_fn(x, 0.0), u1=lambda x: ut_fn(x, 0.0), g_neumann=g_neumann,
        meta={"expr": u_expr, "source_expr": f, **meta},
    )


def standing_wave(T=10.0):
    """``sin(pi x) sin^2(5/4 pi t)`` on (0,1) x (0,T), homogeneous data."""
    x, t = sym.symbols("x t")
    u = sym.sin(sym.pi * x) * sym.sin(sym.Rational(5, 4) * sym.pi * t) ** 2
    return _symbolic("standing_wave", u, sym.Integer(1), 1, T)


def high_frequency_wave(k, T=2.0):
    """``sin(k pi x) sin(k pi t)``; zero source, ``u1 = k pi sin(k pi x)``."""
    x, t = sym.symbols("x t")
    u = sym.sin(k * sym.pi * x) * sym.sin(k * sym.pi * t)
    return _symbolic(f"high_frequency_k{k}", u, sym.Integer(1), 1, T, k=k)


def energy_wave(T=10.0):
    """``(cos(pi t) + sin(pi t)) sin(pi x)``; energy ``pi^2 / 2``."""
    x, t = sym.symbols("x t")
    u = (sym.cos(sym.pi * t) + sym.sin(sym.pi * t)) * sym.sin(sym.pi * x)
    return _symbolic("energy_wave", u, sym.Integer(1), 1, T, energy=float(np.pi ** 2 / 2))


def wavefront_2d(T=0.375):
    """``exp(-64 (x - (1+y) t)^2)`` with velocity ``c = 1 + y`` on (0,1)^2."""
    x, y, t = sym.symbols("x y t")
    u = sym.exp(-64 * (x - (1 + y) * t) ** 2)
    return _symbolic("wavefront_2d", u, 1 + y, 2, T)


def linear_in_time(dim=1, T=1.0):
    """``u = t``: lies in every trial space with p_t >= 1."""
    return _symbolic("linear_in_time", sym.Symbol("t"), sym.Integer(1), dim, T)


# ----------------------------------------------------------------------
def bump(s):
    """Smooth bump ``exp(1 + 1/(s^2 - 1))`` on (-1, 1), zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 + 1.0 / (si * si - 1.0))
    return out


def bump_derivative(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    d = si * si - 1.0
    out[inside] = np.exp(1.0 + 1.0 / d) * (-2.0 * si / (d * d))
    return out


_LEFT = [  # (coefficient, sign of t, shift) for Psi(5 (x +- t) + shift)
    (1.0, -1.0, -1.0),
    (-1.0 / 3.0, +1.0, -4.0),
    (-1.0 / 3.0, -1.0, 4.0),
    (8.0 / 9.0, +1.0, -6.5),  # transmitted back through the jump: (2/3)(4/3)
]
_RIGHT = [  # Psi(5/2 (x +- 2t) + shift)
    (2.0 / 3.0, -1.0, 0.25),
    (2.0 / 3.0, +1.0, -21.0 / 4.0),
    (2.0 / 9.0, -1.0, 11.0 / 4.0),
    (2.0 / 9.0, +1.0, -31.0 / 4.0),
]


def discontinuous_velocity_wave(T=1.0):
    """Bump crossing a velocity jump (c = 1 for x < 1/2, c = 2 beyond).

    Homogeneous Neumann data on both ends, zero source.
    """

    def _parts(x, t):
        x = _cols(x)[0]
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape)
        left = x < 0.5
        u = np.zeros_like(x)
        ux = np.zeros_like(x)
        ut = np.zeros_like(x)
        for coef, sgn, shift in _LEFT:
            a = 5.0 * (x + sgn * t) + shift
            u += np.where(left, coef * bump(a), 0.0)
            d = coef * bump_derivative(a)
            ux += np.where(left, 5.0 * d, 0.0)
            ut += np.where(left, 5.0 * sgn * d, 0.0)
        for coef, sgn, shift in _RIGHT:
            b = 2.5 * (x + sgn * 2.0 * t) + shift
            u += np.where(left, 0.0, coef * bump(b))
            d = coef * bump_derivative(b)
            ux += np.where(left, 0.0, 2.5 * d)
            ut += np.where(left, 0.0, 5.0 * sgn * d)
        return u, ut, ux

    def velocity(x, t=0.0):
        x = _cols(x)[0]
        return np.where(x < 0.5, 1.0, 2.0)

    return ExactSolution(
        name="discontinuous_velocity", dim=1, T=T,
        u=lambda x, t: _parts(x, t)[0],
        u_t=lambda x, t: _parts(x, t)[1],
        grad=lambda x, t: _parts(x, t)[2][:, None],
        velocity=velocity,
        u0=lambda x: bump(5.0 * _cols(x)[0] - 1.0),
        u1=lambda x: -5.0 * bump_derivative(5.0 * _cols(x)[0] - 1.0),
        meta={"interface": 0.5},
    )


# ----------------------------------------------------------------------
def tent_profile(x):
    """Initial displacement ``(1 - |4x - 1|)`` on [0, 1/2] and its slope."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.0) & (x <= 0.5)
    value = np.where(inside, 1.0 - np.abs(4.0 * x - 1.0), 0.0)
    slope = np.where(inside & (x < 0.25), 4.0, np.where(inside, -4.0, 0.0))
    return value, slope


def bump_profile(x):
    """Initial displacement ``Psi(4x - 1)`` on [0, 1/2] and its slope."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.0) & (x <= 0.5)
    value = np.where(inside, bump(4.0 * x - 1.0), 0.0)
    slope = np.where(inside, 4.0 * bump_derivative(4.0 * x - 1.0), 0.0)
    return value, slope


_PROFILE_BREAKS = {"tent": (0.0, 0.25, 0.5, 1.0), "bump": (0.0, 0.5, 1.0)}


def periodic_travelling_wave(profile="tent", T=2.0):
    """Rightward profile ``u(x,t) = u0((x - t) mod 1)`` on the unit circle.

    ``fourier(n, t)`` returns the n-th complex Fourier coefficient
    ``int_0^1 u(x,t) exp(-2 pi i n x) dx``.
    """
    shape = {"tent": tent_profile, "bump": bump_profile}[profile]
    breaks = _PROFILE_BREAKS[profile]

    def phase(x, t):
        return np.mod(_cols(x)[0] - np.asarray(t, dtype=float), 1.0)

    # coefficients at t=0 by composite 40-point Gauss on the profile's pieces
    gx, gw = np.polynomial.legendre.leggauss(40)
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        pts.append(a + 0.5 * (b - a) * (gx + 1))
        wts.append(0.5 * (b - a) * gw)
    pts, wts = np.concatenate(pts), np.concatenate(wts)
    vals = shape(pts)[0]

    def fourier(n, t):
        c0 = np.sum(wts * vals * np.exp(-2j * np.pi * n * pts))
        return c0 * np.exp(-2j * np.pi * n * np.asarray(t, dtype=float))

    return ExactSolution(
        name=f"periodic_{profile}", dim=1, T=T,
        u=lambda x, t: shape(phase(x, t))[0],
        u_t=lambda x, t: -shape(phase(x, t))[1],
        grad=lambda x, t: shape(phase(x, t))[1][:, None],
        u0=lambda x: shape(_cols(x)[0])[0],
        u1=lambda x: -shape(_cols(x)[0])[1],
        fourier=fourier,
        meta={"profile": profile},
    )


def scattering_source(center=(2.0, 0.0), radius=0.4):
    """Pulse ``cos(2 pi t) Psi(t) Psi(|x - center| / radius)``."""
    cx, cy = center

    def f(x, t):
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        r = np.hypot(x[:, 0] - cx, x[:, 1] - cy)
        return np.cos(2 * np.pi * t) * bump(t) * bump(r / radius)

    return f
