"""
Parametric maps from the unit box to the physical spatial domain.

The space-time map is ``G(eta, tau) = (F(eta), T tau)``; only the spatial
part ``F`` is represented explicitly, the time axis being handled by
temporal knot vectors defined directly on ``[0, T]``.

Faces of the parametric box are labelled ``(direction, side)`` with
``side`` 0 at ``eta_direction = 0`` and 1 at ``eta_direction = 1``.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import as_points, check_positive
from .exceptions import DomainError, GeometryError

__all__ = [
    "GeometryMap",
    "BoxMap",
    "HalfAnnulusMap",
    "unit_box",
    "half_annulus",
    "pullback_gradient",
    "BOUNDARY_KINDS",
]

BOUNDARY_KINDS = ("dirichlet", "neumann", "robin")


def _all_faces(dim):
    return [(d, s) for d in range(dim) for s in (0, 1)]


@dataclass(frozen=True)
class GeometryMap:
    """Base class; subclasses implement :meth:`map`, :meth:`jacobian`, :meth:`inverse`."""

    dim: int
    T: float
    boundary: dict = field(default_factory=dict)

    def __post_init__(self):
        check_positive(self.T, "T")
        tags = {}
        for face in _all_faces(self.dim):
            kind = self.boundary.get(face, "dirichlet")
            if kind not in BOUNDARY_KINDS:
                raise DomainError(f"unknown boundary kind {kind!r} on face {face}")
            tags[face] = kind
        extra = set(self.boundary) - set(tags)
        if extra:
            raise DomainError(f"faces {sorted(extra)} do not exist in dimension {self.dim}")
        object.__setattr__(self, "boundary", tags)

    is_affine = False

    def with_boundary(self, **kinds):
        """Copy with faces relabelled, e.g. ``with_boundary(all="neumann")``."""
        tags = dict(self.boundary)
        if "all" in kinds:
            kind_all = kinds.pop("all")
            tags = {f: kind_all for f in tags}
        for key, kind in kinds.items():
            tags[_parse_face(key)] = kind
        return replace(self, boundary=tags)

    def faces(self, kind):
        return [f for f, k in self.boundary.items() if k == kind]

    def det(self, eta):
        return np.linalg.det(self.jacobian(eta))

    def face_measure(self, face, eta):
        """Surface measure ``|DF tangent|`` on a parametric face (1 in 1D)."""
        eta = as_points(eta, self.dim)
        if self.dim == 1:
            return np.ones(eta.shape[0])
        other = 1 - face[0]
        return np.linalg.norm(self.jacobian(eta)[:, :, other], axis=1)

    def outward_normal(self, face, eta):
        eta = as_points(eta, self.dim)
        d, side = face
        sign = 1.0 if side == 1 else -1.0
        if self.dim == 1:
            return np.full((eta.shape[0], 1), sign)
        J = self.jacobian(eta)
        tangent = J[:, :, 1 - d]
        n = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        flip = np.sign(np.einsum("ij,ij->i", n, J[:, :, d])) * sign
        return n * flip[:, None]

    def product_weights(self):
        """Weights of a metric that separates as ``f(eta_0) g(eta_1)`` in 2D.

        Returns ``None`` unless the map is such that, up to constants
        absorbed into the ``eta_0`` factors,
        ``det DF = w_mass(eta_0)``,
        ``det DF |DF^-T e_0|^2 = w_grad0(eta_0)``,
        ``det DF |DF^-T e_1|^2 = w_grad1(eta_0)``, the mixed metric term
        vanishes, and the measure of the ``eta_0 = side`` faces is
        ``w_face(side)``.  Such maps allow the angular (``eta_1``) factor of
        every spatial matrix to be one of the two 1D matrices of that
        direction.
        """
        return None

    def measure(self):
        """Volume of the physical domain (by Gauss quadrature)."""
        from .quadrature import mesh_quadrature, tensor_grid

        pts, wts = mesh_quadrature(np.linspace(0, 1, 17), 8)
        eta, w = tensor_grid([pts] * self.dim, [wts] * self.dim)
        return float(np.sum(w * np.abs(self.det(eta))))


def _parse_face(key):
    if isinstance(key, tuple):
        return key
    names = {"left": (0, 0), "right": (0, 1), "x0": (0, 0), "x1": (0, 1), "y0": (1, 0), "y1": (1, 1)}
    if key not in names:
        raise DomainError(f"unknown face name {key!r}")
    return names[key]


@dataclass(frozen=True)
class BoxMap(GeometryMap):
    """Axis-aligned box ``prod_d (0, lengths[d])``."""

    lengths: tuple = (1.0,)

    is_affine = True

    def map(self, eta):
        return as_points(eta, self.dim) * np.asarray(self.lengths)

    def inverse(self, x):
        x = as_points(x, self.dim)
        eta = x / np.asarray(self.lengths)
        _check_unit(eta)
        return np.clip(eta, 0.0, 1.0)

    def jacobian(self, eta):
        n = as_points(eta, self.dim).shape[0]
        return np.broadcast_to(np.diag(self.lengths), (n, self.dim, self.dim)).copy()

    def product_weights(self):
        if self.dim != 2:
            return None
        L0, L1 = self.lengths

        def const(v):
            return lambda x: np.full(np.shape(x), v)

        return {"mass": const(L0 * L1), "grad0": const(L1 / L0), "grad1": const(L0 / L1),
                "face": lambda side: L1}


@dataclass(frozen=True)
class HalfAnnulusMap(GeometryMap):
    """Upper half annulus via the polar map.

    ``eta_0`` is radial, ``eta_1`` angular:
    ``F(eta) = r(eta_0) (cos(pi eta_1), sin(pi eta_1))`` with
    ``r = r_in + (r_out - r_in) eta_0``.
    """

    r_in: float = 1.0
    r_out: float = 3.0

    def map(self, eta):
        eta = as_points(eta, 2)
        r = self.r_in + (self.r_out - self.r_in) * eta[:, 0]
        th = np.pi * eta[:, 1]
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)

    def inverse(self, x):
        x = as_points(x, 2)
        r = np.hypot(x[:, 0], x[:, 1])
        th = np.arctan2(x[:, 1], x[:, 0])
        # points on the negative x axis may come back as -pi
        th = np.where(th < -0.5 * np.pi, th + 2 * np.pi, th)
        eta = np.stack([(r - self.r_in) / (self.r_out - self.r_in), th / np.pi], axis=1)
        _check_unit(eta)
        return np.clip(eta, 0.0, 1.0)

    def jacobian(self, eta):
        eta = as_points(eta, 2)
        dr = self.r_out - self.r_in
        r = self.r_in + dr * eta[:, 0]
        th = np.pi * eta[:, 1]
        c, s = np.cos(th), np.sin(th)
        J = np.empty((eta.shape[0], 2, 2))
        J[:, 0, 0] = dr * c
        J[:, 1, 0] = dr * s
        J[:, 0, 1] = -np.pi * r * s
        J[:, 1, 1] = np.pi * r * c
        return J

    def det(self, eta):
        eta = as_points(eta, 2)
        dr = self.r_out - self.r_in
        return np.pi * dr * (self.r_in + dr * eta[:, 0])

    def product_weights(self):
        dr = self.r_out - self.r_in

        def r(x):
            return self.r_in + dr * np.asarray(x, dtype=float)

        return {"mass": lambda x: np.pi * dr * r(x), "grad0": lambda x: np.pi * r(x) / dr,
                "grad1": lambda x: dr / (np.pi * r(x)), "face": lambda side: np.pi * float(r(side))}


def _check_unit(eta, tol=1e-10):
    if np.any(eta < -tol) or np.any(eta > 1 + tol) or np.any(~np.isfinite(eta)):
        raise DomainError("point lies outside the physical domain")


def unit_box(d, lengths=None, T=1.0, boundary=None):
    """Box geometry ``prod (0, L_i)`` of dimension ``d`` (1 or 2)."""
    if d not in (1, 2):
        raise DomainError(f"only d = 1 or 2 is supported, got {d}")
    if lengths is None:
        lengths = (1.0,) * d
    lengths = tuple(float(v) for v in np.atleast_1d(lengths))
    if len(lengths) != d:
        raise DomainError(f"expected {d} lengths, got {len(lengths)}")
    for L in lengths:
        if not L > 0:
            raise DomainError(f"box lengths must be positive, got {lengths}")
    tags = {} if boundary is None else {_parse_face(k): v for k, v in boundary.items()}
    return BoxMap(dim=d, T=float(T), boundary=tags, lengths=lengths)


def half_annulus(r_in=1.0, r_out=3.0, T=6.0):
    """Half annulus with the scattering boundary tags.

    Inner circle Dirichlet, outer circle Robin, flat segments Neumann.
    """
    if not 0 < r_in < r_out:
        raise DomainError(f"need 0 < r_in < r_out, got ({r_in}, {r_out})")
    tags = {(0, 0): "dirichlet", (0, 1): "robin", (1, 0): "neumann", (1, 1): "neumann"}
    return HalfAnnulusMap(dim=2, T=float(T), boundary=tags, r_in=float(r_in), r_out=float(r_out))


def pullback_gradient(gmap, eta, parametric_gradient):
    """Physical gradient ``DF(eta)^{-T} grad_eta``.

    Parameters
    ----------
    gmap : GeometryMap
    eta : array_like, shape (n, d)
    parametric_gradient : array_like, shape (n, d) or (n, k, d)
        Gradients with respect to ``eta``; a middle axis of ``k`` basis
        functions is allowed.
    """
    eta = as_points(eta, gmap.dim)
    J = gmap.jacobian(eta)
    det = np.linalg.det(J)
    scale = np.max(np.abs(J), axis=(1, 2))
    if np.any(np.abs(det) <= 1e-14 * np.maximum(scale, 1e-300) ** gmap.dim):
        raise GeometryError("singular Jacobian")
    g = np.asarray(parametric_gradient, dtype=float)
    squeeze = g.ndim == 2
    if squeeze:
        g = g[:, None, :]
    out = np.linalg.solve(np.transpose(J, (0, 2, 1))[:, None, :, :], g[..., None])[..., 0]
    return out[:, 0, :] if squeeze else out
