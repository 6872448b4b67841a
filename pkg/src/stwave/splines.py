"""
Univariate B-spline spaces.

Knot vectors are either *open* (boundary knots repeated ``p+1`` times) or
*periodic* (uniform, basis functions wrap around the period).  Basis
functions and their derivatives are evaluated with the Cox--De Boor
triangular scheme, vectorized over evaluation points.

References
----------
.. [1] L. Piegl and W. Tiller, *The NURBS Book*, 2nd ed., Springer, 1997.
       Algorithms A2.1 (span search) and A2.3 (basis derivatives).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._validation import check_count, check_interval
from .exceptions import DomainError, InvalidRegularityError, InvalidSizeError, UnsupportedError

__all__ = [
    "KnotVector",
    "BasisTable",
    "make_open_knot_vector",
    "make_periodic_space",
    "eval_basis",
    "greville_abscissae",
    "interpolation_points",
]

_BREAK_TOL = 1e-12


@dataclass(frozen=True)
class BasisTable:
    """Nonzero basis functions (and derivatives) at a single point.

    Attributes
    ----------
    span : int
        Global index of the first nonzero basis function.  For periodic
        spaces the indices ``span, span+1, ...`` are taken modulo the
        dimension (see :attr:`indices`).
    values : ndarray, shape (max_deriv + 1, p + 1)
        ``values[k, j]`` is the k-th derivative of basis ``indices[j]``.
    indices : ndarray of int
    """

    span: int
    values: np.ndarray
    indices: np.ndarray


@dataclass(frozen=True, eq=False)
class KnotVector:
    """B-spline knot vector of degree ``degree``.

    Use :func:`make_open_knot_vector` or :func:`make_periodic_space` rather
    than calling the constructor directly.

    For periodic spaces ``knots`` holds the uniform *extended* knot
    sequence of length ``n_elements + 2p + 1`` whose basis functions are
    folded modulo ``n_elements``.
    """

    degree: int
    knots: np.ndarray
    periodic: bool = False
    domain: tuple = field(default=None)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if p < 0:
            raise InvalidSizeError(f"degree must be nonnegative, got {p}")
        if np.any(np.diff(knots) < 0):
            raise DomainError("knots must be nondecreasing")
        if self.domain is None:
            dom = (knots[p], knots[-p - 1])
            object.__setattr__(self, "domain", (float(dom[0]), float(dom[1])))
        if not self.periodic:
            if knots.size < 2 * (p + 1):
                raise InvalidSizeError("open knot vector needs at least 2(p+1) knots")
            if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1 :] != knots[-1]):
                raise DomainError("open knot vector requires boundary multiplicity p+1")
            _, counts = np.unique(knots, return_counts=True)
            if np.any(counts[1:-1] > p + 1):
                raise InvalidRegularityError("interior multiplicity exceeds p+1")

    # ------------------------------------------------------------------
    @property
    def breakpoints(self):
        a, b = self.domain
        k = self.knots
        return np.unique(k[(k >= a) & (k <= b)])

    @property
    def multiplicities(self):
        if self.periodic:
            return np.ones(self.breakpoints.size, dtype=int)
        _, counts = np.unique(self.knots, return_counts=True)
        return counts

    @property
    def n_elements(self):
        return self.breakpoints.size - 1

    @property
    def dim(self):
        """Number of basis functions."""
        if self.periodic:
            return self.n_elements
        return self.knots.size - self.degree - 1

    @property
    def element_sizes(self):
        return np.diff(self.breakpoints)

    @property
    def mesh_size(self):
        return float(self.element_sizes.max())

    def __repr__(self):
        kind = "periodic" if self.periodic else "open"
        return (f"KnotVector(degree={self.degree}, {kind}, dim={self.dim}, "
                f"n_elements={self.n_elements}, domain={self.domain})")

    # ------------------------------------------------------------------
    def find_span(self, x):
        """Knot span index for each point (x = b maps to the last span)."""
        x = self._check_points(x)
        p, k = self.degree, self.knots
        if self.periodic:
            lo, hi = p, k.size - p - 2
        else:
            lo, hi = p, self.dim - 1
        span = np.searchsorted(k, x, side="right") - 1
        return np.clip(span, lo, hi)

    def _check_points(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.domain
        tol = 1e-12 * max(1.0, b - a)
        if np.any(x < a - tol) or np.any(x > b + tol) or np.any(~np.isfinite(x)):
            raise DomainError(f"evaluation point outside [{a}, {b}]")
        return np.clip(x, a, b)

    def basis_derivatives(self, x, max_deriv=0):
        """Vectorized evaluation of all nonzero basis functions.

        Parameters
        ----------
        x : array_like, shape (n,)
        max_deriv : int

        Returns
        -------
        first : ndarray of int, shape (n,)
            Index of the first nonzero basis function at each point (before
            periodic folding).
        values : ndarray, shape (n, max_deriv + 1, p + 1)
        """
        x = np.atleast_1d(self._check_points(x))
        p = self.degree
        if max_deriv < 0:
            raise InvalidSizeError("max_deriv must be nonnegative")
        span = self.find_span(x)
        values = _ders_basis_funs(self.knots, p, span, x, min(max_deriv, p))
        if max_deriv > p:
            pad = np.zeros((x.size, max_deriv - p, p + 1))
            values = np.concatenate([values, pad], axis=1)
        return span - p, values

    def fold(self, index):
        """Map raw basis indices to global indices (periodic wrap)."""
        index = np.asarray(index)
        return index % self.dim if self.periodic else index

    def collocation(self, x, deriv=0):
        """Sparse matrix ``C[q, i] = D^deriv b_i(x_q)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        first, values = self.basis_derivatives(x, deriv)
        p = self.degree
        rows = np.repeat(np.arange(x.size), p + 1)
        cols = self.fold(first[:, None] + np.arange(p + 1)[None, :]).ravel()
        data = values[:, deriv, :].ravel()
        return sp.csr_matrix((data, (rows, cols)), shape=(x.size, self.dim))

    def element_index(self, x):
        """Index of the mesh element containing each point."""
        bp = self.breakpoints
        idx = np.searchsorted(bp, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, bp.size - 2)


def _ders_basis_funs(knots, p, span, x, n):
    """Algorithm A2.3 of [1], vectorized over points.

    Every knot difference used below straddles a nonempty span, so the
    divisions are safe; the 0/0 = 0 convention is applied defensively.
    """
    npts = x.size
    ndu = np.zeros((p + 1, p + 1, npts))
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = _safe_div(ndu[r, j - 1], ndu[j, r])
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((npts, n + 1, p + 1))
    ders[:, 0, :] = ndu[:, p, :].T
    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = _safe_div(a[s1, 0], ndu[pk + 1, rk])
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = _safe_div(a[s1, j] - a[s1, j - 1], ndu[pk + 1, rk + j])
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = _safe_div(-a[s1, k - 1], ndu[pk + 1, r])
                d = d + a[s2, k] * ndu[r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    factor = float(p)
    for k in range(1, n + 1):
        ders[:, k, :] *= factor
        factor *= p - k
    return ders


def _safe_div(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


# ----------------------------------------------------------------------
def make_open_knot_vector(domain, n_elements, degree, regularity=None, extra_c0_breakpoints=()):
    """Uniform open knot vector with prescribed interior regularity.

    Parameters
    ----------
    domain : (float, float)
    n_elements : int
        Number of uniform elements before inserting extra breakpoints.
    degree : int
    regularity : int, optional
        Continuity ``q`` across interior breakpoints, ``-1 <= q <= p-1``.
        Defaults to maximal regularity ``p-1``.
    extra_c0_breakpoints : sequence of float
        Interior points where continuity is reduced to C^0 (multiplicity
        ``p``).  Points not on the uniform mesh are inserted as new
        breakpoints.

    Returns
    -------
    KnotVector
    """
    a, b = check_interval(domain)
    n_elements = check_count(n_elements, "n_elements")
    p = check_count(degree, "degree", minimum=0)
    q = p - 1 if regularity is None else int(regularity)
    if q > p - 1 or q < -1:
        raise InvalidRegularityError(f"regularity must lie in [-1, {p - 1}], got {q}")

    bps = list(np.linspace(a, b, n_elements + 1))
    mult = [p + 1] + [p - q] * (n_elements - 1) + [p + 1]
    for x in extra_c0_breakpoints:
        x = float(x)
        if not (a < x < b):
            raise DomainError(f"C0 breakpoint {x} not strictly inside ({a}, {b})")
        hit = np.flatnonzero(np.isclose(bps, x, rtol=0, atol=_BREAK_TOL * (b - a)))
        if hit.size:
            i = int(hit[0])
            mult[i] = max(mult[i], p)
        else:
            i = int(np.searchsorted(bps, x))
            bps.insert(i, x)
            mult.insert(i, p)
    knots = np.repeat(np.asarray(bps), mult)
    return KnotVector(p, knots, periodic=False, domain=(a, b))


def make_periodic_space(domain, n_elements, degree):
    """Uniform periodic spline space of maximal regularity C^{p-1}.

    The dimension equals ``n_elements``; basis function ``j`` is supported
    on ``[a + (j-p) h, a + (j+1) h]`` modulo the period.
    """
    a, b = check_interval(domain)
    p = check_count(degree, "degree", minimum=0)
    n = check_count(n_elements, "n_elements")
    if n <= p:
        raise InvalidSizeError(f"periodic space needs n_elements > degree ({n} <= {p})")
    h = (b - a) / n
    knots = a + h * np.arange(-p, n + p + 1)
    knots[p] = a
    knots[n + p] = b
    return KnotVector(p, knots, periodic=True, domain=(a, b))


def eval_basis(kv, x, max_deriv=0):
    """Nonzero basis functions and derivatives of ``kv`` at the point ``x``."""
    if max_deriv > kv.degree:
        raise InvalidSizeError(f"max_deriv must be <= degree ({kv.degree})")
    first, values = kv.basis_derivatives(np.array([float(x)]), max_deriv)
    idx = kv.fold(first[0] + np.arange(kv.degree + 1))
    return BasisTable(int(first[0]), values[0], idx)


def greville_abscissae(kv):
    """Knot averages ``mean(knots[i+1 : i+p+1])`` for each basis function."""
    if kv.periodic:
        raise UnsupportedError("Greville abscissae are defined for open knot vectors only")
    p, k = kv.degree, kv.knots
    if p == 0:
        return 0.5 * (k[:-1] + k[1:])
    csum = np.concatenate([[0.0], np.cumsum(k)])
    idx = np.arange(kv.dim)
    g = (csum[idx + p + 1] - csum[idx + 1]) / p
    g[0], g[-1] = kv.domain
    return g


def interpolation_points(kv):
    """Unisolvent interpolation points: Greville (open) or support centers (periodic)."""
    if not kv.periodic:
        return greville_abscissae(kv)
    a, b = kv.domain
    h = (b - a) / kv.n_elements
    p = kv.degree
    centers = a + h * (np.arange(kv.dim) - p + 0.5 * (p + 1))
    return a + np.mod(centers - a, b - a)
