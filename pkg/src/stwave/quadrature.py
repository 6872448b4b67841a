"""Gauss--Legendre quadrature on elements and tensor-product grids."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_count
from .exceptions import DomainError

__all__ = ["QuadRule", "gauss_legendre", "map_to_element", "mesh_quadrature", "tensor_grid"]

MAX_NODES = 32


@dataclass(frozen=True, eq=False)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.nodes.size


def _legendre(n, x):
    p0, p1 = np.ones_like(x), x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    return p1, p0


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    # Newton on P_n from Chebyshev-like initial guesses.
    x = np.cos(np.pi * (np.arange(1, n + 1) - 0.25) / (n + 0.5))
    for _ in range(100):
        pn, pm = _legendre(n, x)
        dx = pn / (n * (x * pn - pm) / (x * x - 1.0))
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    pn, pm = _legendre(n, x)
    dp = n * (x * pn - pm) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    nodes = 0.5 * (x - x[::-1])
    weights = 0.5 * (w + w[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n):
    """n-point Gauss--Legendre rule on [-1, 1], exact up to degree 2n-1."""
    n = check_count(n, "n", minimum=1, maximum=MAX_NODES)
    if n == 1:
        return QuadRule(np.zeros(1), np.full(1, 2.0))
    nodes, weights = _gauss_legendre(n)
    return QuadRule(nodes, weights)


def map_to_element(rule, element):
    """Affine image of ``rule`` on ``element = (a, b)``."""
    a, b = float(element[0]), float(element[1])
    if not b > a:
        raise DomainError(f"degenerate element ({a}, {b})")
    half = 0.5 * (b - a)
    return a + half * (rule.nodes + 1.0), half * rule.weights


def mesh_quadrature(breakpoints, n):
    """Concatenated n-point rule over every element of a 1D mesh.

    Returns
    -------
    points, weights : ndarray, shape (n_elements * n,)
        Ordered element by element.
    """
    rule = gauss_legendre(n)
    bp = np.asarray(breakpoints, dtype=float)
    a, b = bp[:-1, None], bp[1:, None]
    if np.any(b <= a):
        raise DomainError("mesh has a degenerate element")
    half = 0.5 * (b - a)
    pts = a + half * (rule.nodes[None, :] + 1.0)
    wts = half * rule.weights[None, :]
    return pts.ravel(), wts.ravel()


def tensor_grid(points_1d, weights_1d):
    """Tensor-product points (first direction fastest) and weights."""
    mesh = np.meshgrid(*points_1d, indexing="ij")
    pts = np.stack([m.ravel(order="F") for m in mesh], axis=1)
    w = weights_1d[0]
    for wd in weights_1d[1:]:
        w = np.kron(wd, w)
    return pts, w
