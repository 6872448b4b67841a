"""
Space-time tensor-product spline spaces and discrete functions.

DOFs are numbered lexicographically with the time index slowest,
``dof = k * N_s + i`` for temporal index ``k`` and spatial index ``i``.
Spatial indices are themselves lexicographic with the first direction
fastest.  Constrained basis functions (Dirichlet faces, the initial or final
temporal function) are simply absent from the numbering.
"""
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import as_points
from .exceptions import DomainError, InvalidSizeError, NumericalError, UnsupportedError
from .splines import interpolation_points

__all__ = [
    "SpaceTimeSpace",
    "DiscreteFunction",
    "build_spaces",
    "full_space",
    "interpolate_lifting",
    "spatial_collocation",
]

ROLES = ("trial", "test", "full")


@dataclass(frozen=True, eq=False)
class SpaceTimeSpace:
    """Tensor product of constrained spatial and temporal spline spaces.

    Attributes
    ----------
    spatial : tuple of KnotVector
        One knot vector per space direction (parametric coordinates).
    temporal : KnotVector
        Knot vector on the physical time interval ``[0, T]``.
    dirichlet_faces : frozenset of (direction, side)
    role : {"trial", "test", "full"}
        Trial spaces drop the first temporal function (zero at t=0), test
        spaces drop the last (zero at t=T), ``full`` keeps everything.
    """

    spatial: tuple
    temporal: object
    dirichlet_faces: frozenset = frozenset()
    role: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "spatial", tuple(self.spatial))
        object.__setattr__(self, "dirichlet_faces", frozenset(self.dirichlet_faces))
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        if self.temporal.periodic:
            raise UnsupportedError("periodic temporal spaces are not supported")
        for d, side in self.dirichlet_faces:
            if d >= self.dim:
                raise DomainError(f"Dirichlet face {(d, side)} does not exist in dimension {self.dim}")
            if self.spatial[d].periodic:
                raise DomainError("a periodic direction has no boundary faces")

    @property
    def dim(self):
        return len(self.spatial)

    @property
    def degree_space(self):
        return max(kv.degree for kv in self.spatial)

    @property
    def degree_time(self):
        return self.temporal.degree

    @property
    def T(self):
        return self.temporal.domain[1]

    @cached_property
    def space_indices_1d(self):
        """Kept basis indices of each spatial direction."""
        out = []
        for d, kv in enumerate(self.spatial):
            keep = np.ones(kv.dim, dtype=bool)
            if (d, 0) in self.dirichlet_faces:
                keep[0] = False
            if (d, 1) in self.dirichlet_faces:
                keep[-1] = False
            out.append(np.flatnonzero(keep))
        return out

    @cached_property
    def space_indices(self):
        """Kept spatial indices in the unconstrained lexicographic numbering."""
        dims = [kv.dim for kv in self.spatial]
        idx = self.space_indices_1d[0]
        stride = dims[0]
        for d in range(1, self.dim):
            idx = (self.space_indices_1d[d][:, None] * stride + idx[None, :]).ravel()
            stride *= dims[d]
        return idx

    @cached_property
    def time_indices(self):
        m = self.temporal.dim
        if self.role == "trial":
            return np.arange(1, m)
        if self.role == "test":
            return np.arange(0, m - 1)
        return np.arange(m)

    @property
    def n_space_full(self):
        return int(np.prod([kv.dim for kv in self.spatial]))

    @property
    def n_space(self):
        return self.space_indices.size

    @property
    def n_time(self):
        return self.time_indices.size

    @property
    def n_dof(self):
        return self.n_space * self.n_time

    @property
    def h_s(self):
        return max(kv.mesh_size for kv in self.spatial)

    @property
    def h_t(self):
        return self.temporal.mesh_size

    def flatten(self, i_space, i_time):
        return np.asarray(i_time) * self.n_space + np.asarray(i_space)

    def unflatten(self, dof):
        dof = np.asarray(dof)
        if np.any(dof < 0) or np.any(dof >= self.n_dof):
            raise IndexError("dof out of range")
        return dof % self.n_space, dof // self.n_space

    @cached_property
    def full_indices(self):
        """Position of each DOF inside the unconstrained tensor numbering."""
        return (self.time_indices[:, None] * self.n_space_full + self.space_indices[None, :]).ravel()

    def as_role(self, role):
        return SpaceTimeSpace(self.spatial, self.temporal, self.dirichlet_faces, role)


def build_spaces(spatial_kvs, temporal_kv, dirichlet_faces=()):
    """Trial and test spaces sharing the same knot vectors."""
    if temporal_kv.periodic:
        raise UnsupportedError("temporal knot vector must be open")
    if temporal_kv.degree < 1 or any(kv.degree < 1 for kv in spatial_kvs):
        raise InvalidSizeError("trial/test degrees must be >= 1")
    trial = SpaceTimeSpace(tuple(spatial_kvs), temporal_kv, frozenset(dirichlet_faces), "trial")
    return trial, trial.as_role("test")


def full_space(space):
    """Unconstrained tensor space (no Dirichlet, no temporal constraint)."""
    return SpaceTimeSpace(space.spatial, space.temporal, frozenset(), "full")


# ----------------------------------------------------------------------
def spatial_collocation(spatial_kvs, points_1d, derivs):
    """Collocation of the tensor spatial basis on a tensor grid.

    ``derivs[d]`` is the derivative order in direction ``d``.  Rows follow
    the tensor point order of :func:`stwave.quadrature.tensor_grid`,
    columns the unconstrained lexicographic basis numbering.
    """
    mats = [kv.collocation(pts, k) for kv, pts, k in zip(spatial_kvs, points_1d, derivs)]
    return reduce(lambda acc, m: sp.kron(m, acc, format="csr"), mats[1:], mats[0]).tocsr()


def _pointwise_spatial(spatial_kvs, eta, deriv_dir=None):
    """Spatial basis (or one parametric derivative) at scattered points.

    Returns a sparse (n_points, n_space_full) matrix.
    """
    n = eta.shape[0]
    dims = [kv.dim for kv in spatial_kvs]
    rows = np.arange(n)
    cols = np.zeros((n, 1), dtype=np.int64)
    vals = np.ones((n, 1))
    stride = 1
    for d, kv in enumerate(spatial_kvs):
        k = 1 if deriv_dir == d else 0
        first, v = kv.basis_derivatives(eta[:, d], k)
        idx = kv.fold(first[:, None] + np.arange(kv.degree + 1)[None, :])
        cols = (cols[:, :, None] + stride * idx[:, None, :]).reshape(n, -1)
        vals = (vals[:, :, None] * v[:, k, None, :]).reshape(n, -1)
        stride *= dims[d]
    r = np.repeat(rows, cols.shape[1])
    return sp.csr_matrix((vals.ravel(), (r, cols.ravel())), shape=(n, stride))


class DiscreteFunction:
    """Spline function ``sum_dof coefficients[dof] * basis_dof`` on a space.

    Parameters
    ----------
    space : SpaceTimeSpace
    coefficients : array_like, shape (space.n_dof,)
    geometry : GeometryMap
    """

    def __init__(self, space, coefficients, geometry):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (space.n_dof,):
            raise InvalidSizeError(f"expected {space.n_dof} coefficients, got {coefficients.shape}")
        if geometry.dim != space.dim:
            raise DomainError("geometry and space dimensions differ")
        self.space = space
        self.coefficients = coefficients
        self.geometry = geometry

    def __repr__(self):
        return f"DiscreteFunction(role={self.space.role}, n_dof={self.space.n_dof})"

    def __add__(self, other):
        if other.space.spatial != self.space.spatial or other.space.temporal is not self.space.temporal:
            raise DomainError("cannot add functions on different meshes")
        full = full_space(self.space)
        return DiscreteFunction(full, self.full_coefficients() + other.full_coefficients(), self.geometry)

    def full_coefficients(self):
        """Coefficients in the unconstrained tensor numbering."""
        sp_ = self.space
        out = np.zeros(sp_.n_space_full * sp_.temporal.dim)
        out[sp_.full_indices] = self.coefficients
        return out

    def coefficient_matrix(self):
        """Full coefficients reshaped to ``(n_space_full, n_time_full)``."""
        sp_ = self.space
        return self.full_coefficients().reshape(sp_.temporal.dim, sp_.n_space_full).T

    def evaluate(self, x, t, space_deriv=0, time_deriv=0):
        """Evaluate at physical points.

        Parameters
        ----------
        x : array_like, shape (n, d) (or (n,) in 1D)
        t : array_like, shape (n,) or scalar
        space_deriv : {0, 1}
            1 returns the physical spatial gradient, shape (n, d).
        time_deriv : int
            Order of the time derivative (at most the temporal degree).

        Returns
        -------
        ndarray, shape (n,) or (n, d)
        """
        sp_ = self.space
        x = as_points(x, sp_.dim)
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        if space_deriv not in (0, 1):
            raise InvalidSizeError("space_deriv must be 0 or 1")
        if time_deriv > sp_.degree_time or time_deriv < 0:
            raise InvalidSizeError(f"time_deriv must be in [0, {sp_.degree_time}]")
        eta = self.geometry.inverse(x)
        tmat = sp_.temporal.collocation(t, time_deriv)
        C = self.coefficient_matrix()
        # per-point contraction: (B_s C B_t^T) diagonal
        temporal_part = (tmat @ C.T)  # (n, n_space_full)
        if space_deriv == 0:
            B = _pointwise_spatial(sp_.spatial, eta)
            return np.asarray(B.multiply(temporal_part).sum(axis=1)).ravel()
        grads_hat = []
        for d in range(sp_.dim):
            B = _pointwise_spatial(sp_.spatial, eta, deriv_dir=d)
            grads_hat.append(np.asarray(B.multiply(temporal_part).sum(axis=1)).ravel())
        from .geometry import pullback_gradient

        return pullback_gradient(self.geometry, eta, np.stack(grads_hat, axis=1))

    def __call__(self, x, t):
        return self.evaluate(x, t)


def interpolate_lifting(u0, space, geometry):
    """Constant-in-time extension of the spatial spline interpolant of ``u0``.

    ``u0`` is interpolated at the (tensor) Greville points of the
    unconstrained spatial space.  Since the temporal B-splines form a
    partition of unity, repeating the spatial coefficients over every
    temporal function yields a function constant in time.

    Returns
    -------
    DiscreteFunction on the unconstrained (``full``) space.
    """
    full = full_space(space)
    pts_1d = [interpolation_points(kv) for kv in space.spatial]
    from .quadrature import tensor_grid

    eta, _ = tensor_grid(pts_1d, [np.ones(p.size) for p in pts_1d])
    values = np.asarray(u0(geometry.map(eta)), dtype=float).reshape(-1)
    if not np.any(values):
        coef = np.zeros(full.n_space_full)
    else:
        mats = [kv.collocation(p) for kv, p in zip(space.spatial, pts_1d)]
        coef = values.reshape([p.size for p in pts_1d][::-1])
        # tensor solve, one direction at a time (last axis = first direction)
        for d, M in enumerate(mats):
            axis = coef.ndim - 1 - d
            moved = np.moveaxis(coef, axis, 0)
            shape = moved.shape
            lu = spla.splu(M.tocsc())
            sol = lu.solve(moved.reshape(shape[0], -1))
            if not np.all(np.isfinite(sol)):
                raise NumericalError("singular interpolation matrix")
            coef = np.moveaxis(sol.reshape(shape), 0, axis)
        coef = coef.reshape(-1)
    coefficients = np.tile(coef, full.temporal.dim)
    return DiscreteFunction(full, coefficients, geometry)
