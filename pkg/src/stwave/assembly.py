"""
Petrov--Galerkin assembly of the space-time wave operator.

Bilinear forms (rows = test functions, columns = trial functions)::

    a(w, v)      = int_Q c^2 grad w . grad v - w_t v_t  + int_{Sigma_R} theta c w_t v
    a_IGA(w, v)  = a(w, v) - delta sum_k h_k^{2p_t} int_{slab_k} c^2 D_t^{p_t} grad w . D_t^{p_t} grad v
    a_FEM(w, v)  = a(w, v) with grad v replaced by its per-time-element L2
                   projection onto polynomials of degree p_t - 1

Two independent routes produce the operator:

* ``"kron"``: for velocities that do not depend on time, the operator is a
  sum of Kronecker products of temporal and spatial factor matrices.  On an
  affine box with constant ``c`` the spatial factors are themselves
  Kronecker products of 1D matrices.
* ``"element"``: a loop over space-time elements with tensor Gauss
  quadrature; required when ``c`` depends on time.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .discretization import DiscreteFunction, _pointwise_spatial, full_space, interpolate_lifting
from .exceptions import InvalidParameterError, InvalidSizeError
from .quadrature import mesh_quadrature, tensor_grid

__all__ = [
    "METHODS",
    "LinearSystem",
    "SpatialFactors",
    "TemporalFactors",
    "assemble_1d",
    "spatial_factors",
    "temporal_factors",
    "assemble_operator",
    "assemble_plain",
    "assemble_iga_stab",
    "assemble_fem_stab",
    "assemble_rhs",
    "apply_lifting",
    "assemble_system",
    "default_delta",
    "separable_factors",
    "TensorOperator",
    "tensor_factors",
]

METHODS = ("plain", "iga-stab", "fem-stab")


def default_delta(degree):
    return 10.0 ** (-int(degree))


def _check_method(method, delta, degree_time):
    method = method.replace("_", "-")
    if method not in METHODS:
        raise InvalidParameterError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "iga-stab":
        delta = default_delta(degree_time) if delta is None else float(delta)
        if not delta > 0:
            raise InvalidParameterError(f"delta must be positive, got {delta}")
    else:
        delta = None
    return method, delta


# ----------------------------------------------------------------------
# 1D building block
def assemble_1d(trial_kv, test_kv, trial_deriv=0, test_deriv=0, weight=None, element_scale=None,
                n_quad=None):
    """Sparse matrix ``M[i, j] = sum_l s_l int_l w D^a b_j D^b b_i``.

    Parameters
    ----------
    trial_kv, test_kv : KnotVector
        Must share their domain; quadrature runs over the union of
        breakpoints.
    trial_deriv, test_deriv : int
        Derivative orders ``a`` (trial) and ``b`` (test).
    weight : callable, optional
        ``weight(x)`` evaluated at quadrature points.
    element_scale : callable, optional
        ``element_scale(a, b)`` with arrays of element endpoints, returning
        one factor per element.
    n_quad : int, optional
        Points per element; default ``max(p) + 1``.

    Returns
    -------
    scipy.sparse.csr_matrix, shape (test_kv.dim, trial_kv.dim)
    """
    if trial_deriv > trial_kv.degree or test_deriv > test_kv.degree:
        raise InvalidSizeError("derivative order exceeds the degree")
    bps = np.union1d(trial_kv.breakpoints, test_kv.breakpoints)
    nq = n_quad or max(trial_kv.degree, test_kv.degree) + 1
    pts, wts = mesh_quadrature(bps, nq)
    w = wts.copy()
    if weight is not None:
        w *= np.asarray(weight(pts), dtype=float)
    if element_scale is not None:
        scale = np.asarray(element_scale(bps[:-1], bps[1:]), dtype=float)
        w *= np.repeat(scale, nq)
    Ba = trial_kv.collocation(pts, trial_deriv)
    Bb = test_kv.collocation(pts, test_deriv)
    return (Bb.T @ sp.diags(w) @ Ba).tocsr()


def _legendre_orthonormal(degree, xi, h):
    """Orthonormal Legendre polynomials on an element of length ``h``."""
    V = np.polynomial.legendre.legvander(xi, degree)
    h = np.asarray(h, dtype=float).reshape(-1, 1) if np.ndim(h) else h
    return V * np.sqrt((2 * np.arange(degree + 1) + 1)[None, :] / h)


def projected_mass_1d(kv, n_quad=None):
    """``P[k, j] = int w_j (Q v_k)`` with Q the elementwise L2 projection on P_{p-1}."""
    p = kv.degree
    bps = kv.breakpoints
    nq = n_quad or p + 1
    pts, wts = mesh_quadrature(bps, nq)
    n_el = bps.size - 1
    elem = np.repeat(np.arange(n_el), nq)
    h = np.diff(bps)[elem]
    xi = 2.0 * (pts - bps[:-1][elem]) / h - 1.0
    L = _legendre_orthonormal(p - 1, xi, h)
    rows = np.repeat(np.arange(pts.size), p)
    cols = (elem[:, None] * p + np.arange(p)[None, :]).ravel()
    Lmat = sp.csr_matrix((L.ravel(), (rows, cols)), shape=(pts.size, n_el * p))
    C = Lmat.T @ sp.diags(wts) @ kv.collocation(pts)
    return (C.T @ C).tocsr()


@dataclass(frozen=True)
class TemporalFactors:
    """Temporal matrices on the unconstrained temporal space.

    ``mass = int w v``, ``stiffness = int w' v'``, ``cross = int w' v``,
    ``penalty = sum_k h_k^{2p} int_k w^(p) v^(p)``,
    ``projected = int w Q v`` (all indexed ``[test, trial]``).
    """

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    cross: sp.csr_matrix
    penalty: sp.csr_matrix
    projected: sp.csr_matrix


def temporal_factors(kv, n_quad=None):
    p = kv.degree
    nq = n_quad or p + 1
    scale = lambda a, b: (b - a) ** (2 * p)  # noqa: E731
    return TemporalFactors(
        mass=assemble_1d(kv, kv, 0, 0, n_quad=nq),
        stiffness=assemble_1d(kv, kv, 1, 1, n_quad=nq),
        cross=assemble_1d(kv, kv, 1, 0, n_quad=nq),
        penalty=assemble_1d(kv, kv, p, p, element_scale=scale, n_quad=nq),
        projected=projected_mass_1d(kv, nq),
    )


# ----------------------------------------------------------------------
# spatial factors
@dataclass(frozen=True)
class SpatialFactors:
    """Spatial matrices on the unconstrained spatial space.

    ``mass = int phi_j phi_i``, ``stiffness = int c^2 grad phi_j . grad phi_i``,
    ``robin = int_{Gamma_R} theta c phi_j phi_i``.
    """

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    robin: sp.csr_matrix
    route: str = "collocation"


def velocity_at_eta(problem, spatial_kvs, eta, t=0.0):
    """Wave speed at parametric points, honouring the element-midpoint rule."""
    if problem.constant_velocity:
        return np.full(eta.shape[0], float(problem.velocity))
    if problem.piecewise_velocity:
        mids = []
        for d, kv in enumerate(spatial_kvs):
            bp = kv.breakpoints
            e = kv.element_index(eta[:, d])
            mids.append(0.5 * (bp[e] + bp[e + 1]))
        eta = np.stack(mids, axis=1)
    return problem.velocity_at(problem.geometry.map(eta), t)


def _kron_all(mats):
    """``mats[-1] x ... x mats[0]`` (first direction fastest)."""
    return reduce(lambda acc, m: sp.kron(m, acc, format="csr"), mats[1:], mats[0]).tocsr()


def _spatial_quadrature(spatial_kvs, n_quad):
    pts_1d, wts_1d = zip(*(mesh_quadrature(kv.breakpoints, n_quad) for kv in spatial_kvs))
    eta, w = tensor_grid(list(pts_1d), list(wts_1d))
    return list(pts_1d), eta, w


def _spatial_collocations(spatial_kvs, pts_1d):
    from .discretization import spatial_collocation

    dim = len(spatial_kvs)
    B0 = spatial_collocation(spatial_kvs, pts_1d, [0] * dim)
    dB = [spatial_collocation(spatial_kvs, pts_1d, [int(k == d) for k in range(dim)])
          for d in range(dim)]
    return B0, dB


def _robin_matrix(problem, spatial_kvs, n_quad):
    geo = problem.geometry
    n = int(np.prod([kv.dim for kv in spatial_kvs]))
    R = sp.csr_matrix((n, n))
    if problem.periodic:
        return R
    for face in geo.faces("robin"):
        eta, w = _face_quadrature(spatial_kvs, face, n_quad)
        c = velocity_at_eta(problem, spatial_kvs, eta)
        w = w * geo.face_measure(face, eta) * problem.impedance * c
        B = _pointwise_spatial(spatial_kvs, eta)
        R = R + B.T @ sp.diags(w) @ B
    return R.tocsr()


def _face_quadrature(spatial_kvs, face, n_quad):
    d, side = face
    dim = len(spatial_kvs)
    if dim == 1:
        return np.array([[float(side)]]), np.ones(1)
    other = 1 - d
    pts, wts = mesh_quadrature(spatial_kvs[other].breakpoints, n_quad)
    eta = np.empty((pts.size, 2))
    eta[:, d] = float(side)
    eta[:, other] = pts
    return eta, wts


def spatial_factors(problem, spatial_kvs, n_quad=None, route="auto"):
    """Spatial mass, weighted stiffness and Robin matrices.

    ``route="box"`` forms the matrices from 1D factors (affine box, constant
    velocity only); ``route="collocation"`` integrates on the tensor
    quadrature grid with the geometry Jacobian.  ``"auto"`` picks the
    former when it applies.
    """
    geo = problem.geometry
    if problem.steady_velocity is False and not problem.constant_velocity:
        raise InvalidParameterError("spatial factors need a time-independent velocity")
    p = max(kv.degree for kv in spatial_kvs)
    box_ok = geo.is_affine and problem.constant_velocity
    if route == "auto":
        route = "box" if box_ok else "collocation"
    if route == "box" and not box_ok:
        raise InvalidParameterError("box route needs an affine box and constant velocity")
    nq = n_quad or (p + 1 if box_ok else p + 2)

    if route == "box":
        c2 = float(problem.velocity) ** 2
        M1 = [assemble_1d(kv, kv, 0, 0, n_quad=nq) * L for kv, L in zip(spatial_kvs, geo.lengths)]
        A1 = [assemble_1d(kv, kv, 1, 1, n_quad=nq) / L for kv, L in zip(spatial_kvs, geo.lengths)]
        M = _kron_all(M1)
        A = None
        for d in range(len(spatial_kvs)):
            term = _kron_all([A1[k] if k == d else M1[k] for k in range(len(spatial_kvs))])
            A = term if A is None else A + term
        A = (c2 * A).tocsr()
    else:
        pts_1d, eta, w = _spatial_quadrature(spatial_kvs, nq)
        J = geo.jacobian(eta)
        det = np.abs(np.linalg.det(J))
        invJT = np.linalg.inv(np.transpose(J, (0, 2, 1)))
        B0, dB = _spatial_collocations(spatial_kvs, pts_1d)
        wdet = w * det
        M = (B0.T @ sp.diags(wdet) @ B0).tocsr()
        c = velocity_at_eta(problem, spatial_kvs, eta)
        wc2 = sp.diags(wdet * c * c)
        A = None
        for k in range(geo.dim):
            G = reduce(lambda acc, d: acc + sp.diags(invJT[:, k, d]) @ dB[d],
                       range(1, geo.dim), sp.diags(invJT[:, k, 0]) @ dB[0])
            term = G.T @ wc2 @ G
            A = term if A is None else A + term
        A = A.tocsr()
    R = _robin_matrix(problem, spatial_kvs, nq)
    return SpatialFactors(M, A, R, route)


# ----------------------------------------------------------------------
def _sub(mat, rows, cols):
    return mat[rows][:, cols]


def _combine(method, delta, tf, sf, test, cols_time, cols_space):
    rt, rs = test.time_indices, test.space_indices
    ct, cs = cols_time, cols_space

    def kron(tm, sm):
        return sp.kron(_sub(tm, rt, ct), _sub(sm, rs, cs), format="csr")

    K = kron(tf.mass if method != "fem-stab" else tf.projected, sf.stiffness)
    K = K - kron(tf.stiffness, sf.mass)
    if sf.robin.nnz:
        K = K + kron(tf.cross, sf.robin)
    if method == "iga-stab":
        K = K - delta * kron(tf.penalty, sf.stiffness)
    K = K.tocsr()
    K.sum_duplicates()
    return K


# ----------------------------------------------------------------------
# element loop
def _local_spatial(spatial_kvs, geometry, nq):
    """Per spatial element: quadrature weights, basis values, physical gradients."""
    dim = len(spatial_kvs)
    per_dir = []
    for kv in spatial_kvs:
        bp = kv.breakpoints
        pts, wts = mesh_quadrature(bp, nq)
        n_el = bp.size - 1
        pts = pts.reshape(n_el, nq)
        wts = wts.reshape(n_el, nq)
        mids = 0.5 * (bp[:-1] + bp[1:])
        first = kv.find_span(mids) - kv.degree
        _, vals = kv.basis_derivatives(pts.ravel(), 1)
        vals = vals.reshape(n_el, nq, 2, kv.degree + 1)
        idx = kv.fold(first[:, None] + np.arange(kv.degree + 1)[None, :])
        per_dir.append((pts, wts, vals, idx, kv.dim))

    # tensor combination over directions (first direction fastest everywhere)
    pts0, w0, v0, i0, n0 = per_dir[0]
    eta = pts0[:, :, None]
    w = w0
    val = v0[:, :, 0, :]
    dval = [v0[:, :, 1, :]]
    gidx = i0
    stride = n0
    for d in range(1, dim):
        ptsd, wd, vd, idd, nd = per_dir[d]
        E0, Q0 = w.shape
        Ed, Qd = wd.shape
        L0 = val.shape[2]
        Ld = vd.shape[3]
        # element index e = ed * E0 + e0, point q = qd * Q0 + q0, local l = ld * L0 + l0
        w = (wd[:, None, :, None] * w[None, :, None, :]).reshape(Ed * E0, Qd * Q0)
        eta_new = np.empty((Ed, E0, Qd, Q0, d + 1))
        eta_new[..., :d] = eta[None, :, None, :, :]
        eta_new[..., d] = ptsd[:, None, :, None]
        eta = eta_new.reshape(Ed * E0, Qd * Q0, d + 1)

        def tens(a, b):
            return (b[:, None, :, None, :, None] * a[None, :, None, :, None, :]).reshape(
                Ed * E0, Qd * Q0, Ld * L0)

        new_d = [tens(dv, vd[:, :, 0, :]) for dv in dval]
        new_d.append(tens(val, vd[:, :, 1, :]))
        val = tens(val, vd[:, :, 0, :])
        dval = new_d
        gidx = (idd[:, None, :, None] * stride + gidx[None, :, None, :]).reshape(Ed * E0, Ld * L0)
        stride *= nd

    n_el, n_q, n_loc = val.shape
    flat_eta = eta.reshape(-1, dim)
    J = geometry.jacobian(flat_eta)
    det = np.abs(np.linalg.det(J)).reshape(n_el, n_q)
    invJT = np.linalg.inv(np.transpose(J, (0, 2, 1))).reshape(n_el, n_q, dim, dim)
    dhat = np.stack(dval, axis=-1)  # (e, q, l, d)
    grad = np.einsum("eqkd,eqld->eqlk", invJT, dhat)
    return {
        "eta": eta, "w": w * det, "val": val, "grad": grad, "idx": gidx,
    }


def _local_temporal(kv, e, nq, projected):
    bp = kv.breakpoints
    a, b = bp[e], bp[e + 1]
    pts, wts = mesh_quadrature(np.array([a, b]), nq)
    p = kv.degree
    first = int(kv.find_span(np.array([0.5 * (a + b)]))[0]) - p
    _, vals = kv.basis_derivatives(pts, p)
    out = {"t": pts, "w": wts, "v": vals[:, 0, :], "dv": vals[:, 1, :], "dpv": vals[:, p, :],
           "idx": first + np.arange(p + 1), "h": b - a}
    if projected:
        xi = 2.0 * (pts - a) / (b - a) - 1.0
        L = _legendre_orthonormal(p - 1, xi, b - a)  # (q, m)
        coef = np.einsum("q,qm,ql->ml", wts, L, out["v"])
        out["qv"] = L @ coef
    return out


def _element_operator(problem, space, method, delta, n_quad=None, threads=1):
    """Operator on the full (unconstrained) space by space-time element loop."""
    kvs = space.spatial
    tkv = space.temporal
    p_s = max(kv.degree for kv in kvs)
    p_t = tkv.degree
    nq_s = n_quad or p_s + 2
    nq_t = n_quad or p_t + 2
    loc = _local_spatial(kvs, problem.geometry, nq_s)
    n_el, n_q, n_loc = loc["val"].shape
    flat_eta = loc["eta"].reshape(-1, space.dim)
    X = problem.geometry.map(flat_eta)
    if problem.piecewise_velocity and not problem.constant_velocity:
        c_static = velocity_at_eta(problem, kvs, flat_eta)
    else:
        c_static = None
    Ns = space.n_space_full
    GG = np.einsum("eqid,eqjd->eqij", loc["grad"], loc["grad"])
    VV = np.einsum("eqi,eqj->eqij", loc["val"], loc["val"])
    projected = method == "fem-stab"

    def velocity2(t):
        if problem.constant_velocity:
            return np.full((n_el, n_q), float(problem.velocity) ** 2)
        if c_static is not None:
            c = c_static
        else:
            c = problem.velocity_at(X, t)
        return (c * c).reshape(n_el, n_q)

    def one_time_element(et):
        tl = _local_temporal(tkv, et, nq_t, projected)
        n_lt = tl["idx"].size
        K = np.zeros((n_el, n_lt, n_loc, n_lt, n_loc))
        grad_test = tl["qv"] if projected else tl["v"]
        for r in range(tl["t"].size):
            wr = tl["w"][r]
            c2 = velocity2(tl["t"][r])
            S = np.einsum("eq,eqij->eij", loc["w"] * c2, GG)
            Mq = np.einsum("eq,eqij->eij", loc["w"], VV)
            K += wr * np.einsum("eij,k,l->ekilj", S, grad_test[r], tl["v"][r])
            K -= wr * np.einsum("eij,k,l->ekilj", Mq, tl["dv"][r], tl["dv"][r])
            if method == "iga-stab":
                K -= delta * tl["h"] ** (2 * p_t) * wr * np.einsum(
                    "eij,k,l->ekilj", S, tl["dpv"][r], tl["dpv"][r])
        rows = (tl["idx"][None, :, None] * Ns + loc["idx"][:, None, :]).reshape(n_el, -1)
        R = np.broadcast_to(rows[:, :, None], (n_el, rows.shape[1], rows.shape[1]))
        C = np.broadcast_to(rows[:, None, :], (n_el, rows.shape[1], rows.shape[1]))
        return R.ravel(), C.ravel(), K.reshape(n_el, rows.shape[1], rows.shape[1]).ravel()

    n_te = tkv.n_elements
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one_time_element, range(n_te)))
    else:
        parts = [one_time_element(e) for e in range(n_te)]
    parts.extend(_element_robin(problem, space, nq_s, nq_t))
    rows = np.concatenate([q[0] for q in parts])
    cols = np.concatenate([q[1] for q in parts])
    data = np.concatenate([q[2] for q in parts])
    N = Ns * tkv.dim
    return sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()


def _element_robin(problem, space, nq_s, nq_t):
    """Robin contributions ``theta c w_t v`` face element by time element."""
    if problem.periodic:
        return []
    geo = problem.geometry
    kvs = space.spatial
    tkv = space.temporal
    Ns = space.n_space_full
    out = []
    for face in geo.faces("robin"):
        d, side = face
        if space.dim == 1:
            face_elems = [np.array([[float(side)]])]
            face_w = [np.ones(1)]
        else:
            other = 1 - d
            bp = kvs[other].breakpoints
            face_elems, face_w = [], []
            for e in range(bp.size - 1):
                pts, wts = mesh_quadrature(bp[e:e + 2], nq_s)
                eta = np.empty((pts.size, 2))
                eta[:, d] = float(side)
                eta[:, other] = pts
                face_elems.append(eta)
                face_w.append(wts)
        for eta, w in zip(face_elems, face_w):
            B = _pointwise_spatial(kvs, eta).tocsr()
            nz = np.unique(B.indices)
            Bl = B[:, nz].toarray()
            meas = geo.face_measure(face, eta) * w
            X = geo.map(eta)
            for et in range(tkv.n_elements):
                tl = _local_temporal(tkv, et, nq_t, False)
                K = np.zeros((tl["idx"].size, nz.size, tl["idx"].size, nz.size))
                for r in range(tl["t"].size):
                    if problem.piecewise_velocity or problem.constant_velocity:
                        c = velocity_at_eta(problem, kvs, eta)
                    else:
                        c = problem.velocity_at(X, tl["t"][r])
                    Sij = np.einsum("q,qi,qj->ij", meas * c * problem.impedance, Bl, Bl)
                    K += tl["w"][r] * np.einsum("ij,k,l->kilj", Sij, tl["v"][r], tl["dv"][r])
                g = (tl["idx"][:, None] * Ns + nz[None, :]).ravel()
                n = g.size
                out.append((np.repeat(g, n), np.tile(g, n), K.reshape(n, n).ravel()))
    return out


# ----------------------------------------------------------------------
@dataclass(eq=False)
class LinearSystem:
    """Assembled Petrov--Galerkin system.

    Attributes
    ----------
    operator : csr_matrix, shape (test.n_dof, trial.n_dof)
    rhs : ndarray, shape (test.n_dof,)
    lifting_operator : csr_matrix, shape (test.n_dof, full.n_dof)
        Same bilinear form acting on unconstrained functions; used to move
        a lifting to the right-hand side.
    lifting : DiscreteFunction or None
    """

    operator: sp.csr_matrix
    rhs: np.ndarray
    trial: object
    test: object
    geometry: object
    method: str
    delta: float = None
    path: str = "kron"
    lifting_operator: sp.csr_matrix = None
    lifting: object = None
    meta: dict = field(default_factory=dict)

    @property
    def n_dof(self):
        return self.operator.shape[0]

    @property
    def h_s(self):
        return self.trial.h_s

    @property
    def h_t(self):
        return self.trial.h_t

    @property
    def degree(self):
        return (self.trial.degree_space, self.trial.degree_time)

    def solution(self, coefficients):
        """Trial coefficients plus lifting as a function on the full space."""
        u = DiscreteFunction(self.trial, coefficients, self.geometry)
        if self.lifting is not None:
            u = u + self.lifting
        return u


def _choose_path(problem, path):
    if path == "auto":
        return "kron" if (problem.constant_velocity or problem.steady_velocity) else "element"
    if path not in ("kron", "element"):
        raise InvalidParameterError(f"unknown assembly path {path!r}")
    if path == "kron" and not (problem.constant_velocity or problem.steady_velocity):
        raise InvalidParameterError("Kronecker path requires a time-independent velocity")
    return path


def assemble_operator(problem, trial, test, method="iga-stab", delta=None, path="auto",
                      n_quad=None, threads=1, with_full=False, spatial_route="auto"):
    """Operator of ``method`` (and optionally its unconstrained-column version).

    Returns
    -------
    K : csr_matrix (test x trial)
    K_full : csr_matrix (test x full) or None
    """
    method, delta = _check_method(method, delta, trial.degree_time)
    path = _choose_path(problem, path)
    full = full_space(trial)
    if path == "kron":
        tf = temporal_factors(trial.temporal, n_quad)
        sf = spatial_factors(problem, trial.spatial, n_quad, route=spatial_route)
        K = _combine(method, delta, tf, sf, test, trial.time_indices, trial.space_indices)
        K_full = None
        if with_full:
            K_full = _combine(method, delta, tf, sf, test, full.time_indices, full.space_indices)
    else:
        big = _element_operator(problem, full, method, delta, n_quad, threads)
        big = big[test.full_indices]
        K = big[:, trial.full_indices].tocsr()
        K_full = big.tocsr() if with_full else None
    return K, K_full, path, delta


def assemble_rhs(problem, test, n_quad=None):
    """Load vector ``F(v)`` on the test space.

    ``int_Q f v + int_Omega u1 v(., 0) + int_{Sigma_N} g_N v + int_{Sigma_R} g_R v``.
    """
    geo = problem.geometry
    kvs = test.spatial
    tkv = test.temporal
    p = max(max(kv.degree for kv in kvs), tkv.degree)
    nq = n_quad or p + 2
    R = np.zeros((test.n_space_full, tkv.dim))
    t_pts, t_wts = mesh_quadrature(tkv.breakpoints, nq)
    Bt = tkv.collocation(t_pts)

    if problem.source is not None or problem.u1 is not None:
        pts_1d, eta, w = _spatial_quadrature(kvs, nq)
        X = geo.map(eta)
        ws = w * np.abs(geo.det(eta))
        Bs = _spatial_collocations(kvs, pts_1d)[0]
        if problem.source is not None:
            chunk = max(1, int(2e6 // max(X.shape[0], 1)))
            for s in range(0, t_pts.size, chunk):
                tt = t_pts[s:s + chunk]
                F = np.empty((X.shape[0], tt.size))
                for j, t in enumerate(tt):
                    F[:, j] = problem.source(X, np.full(X.shape[0], t))
                R += Bs.T @ ((ws[:, None] * F * t_wts[None, s:s + chunk]) @ Bt[s:s + chunk].toarray())
        if problem.u1 is not None:
            b = Bs.T @ (ws * np.asarray(problem.u1(X), dtype=float))
            psi0 = tkv.collocation(np.array([tkv.domain[0]])).toarray()[0]
            R += np.outer(b, psi0)

    if not problem.periodic:
        for kind, g in (("neumann", problem.g_neumann), ("robin", problem.g_robin)):
            if g is None:
                continue
            for face in geo.faces(kind):
                eta, w = _face_quadrature(kvs, face, nq)
                X = geo.map(eta)
                normal = geo.outward_normal(face, eta)
                w = w * geo.face_measure(face, eta)
                B = _pointwise_spatial(kvs, eta)
                G = np.stack([g(X, np.full(X.shape[0], t), normal) for t in t_pts], axis=1)
                R += B.T @ ((w[:, None] * G * t_wts[None, :]) @ Bt.toarray())

    return R[np.ix_(test.space_indices, test.time_indices)].T.ravel()


def apply_lifting(system, lifting):
    """Move ``a(lifting, v)`` to the right-hand side."""
    if lifting is None or not np.any(lifting.coefficients):
        return replace(system, lifting=lifting)
    if system.lifting_operator is None:
        raise InvalidParameterError("system was assembled without a lifting operator")
    rhs = system.rhs - system.lifting_operator @ lifting.coefficients
    return replace(system, rhs=rhs, lifting=lifting)


def _assemble(problem, trial, test, method, delta=None, path="auto", n_quad=None, threads=1,
              lifting=True, spatial_route="auto"):
    need_full = lifting and problem.u0 is not None
    K, K_full, path, delta = assemble_operator(problem, trial, test, method, delta, path, n_quad,
                                               threads, with_full=need_full,
                                               spatial_route=spatial_route)
    rhs = assemble_rhs(problem, test, n_quad)
    system = LinearSystem(K, rhs, trial, test, problem.geometry, method.replace("_", "-"), delta,
                          path, K_full)
    if need_full:
        system = apply_lifting(system, interpolate_lifting(problem.u0, trial, problem.geometry))
    return system


def assemble_plain(problem, trial, test, **kwargs):
    """Unstabilized Petrov--Galerkin system (CFL-limited)."""
    return _assemble(problem, trial, test, "plain", **kwargs)


def assemble_iga_stab(problem, trial, test, delta=None, **kwargs):
    """System of the high-order penalty stabilization (default ``delta = 10^-p_t``)."""
    if delta is not None and not float(delta) > 0:
        raise InvalidParameterError(f"delta must be positive, got {delta}")
    return _assemble(problem, trial, test, "iga-stab", delta=delta, **kwargs)


def assemble_fem_stab(problem, trial, test, **kwargs):
    """System with the projected test gradient (elementwise P_{p_t - 1} in time)."""
    return _assemble(problem, trial, test, "fem-stab", **kwargs)


def assemble_system(problem, trial, test, method="iga-stab", delta=None, **kwargs):
    method = method.replace("_", "-")
    if method == "iga-stab":
        return assemble_iga_stab(problem, trial, test, delta=delta, **kwargs)
    if method == "plain":
        return assemble_plain(problem, trial, test, **kwargs)
    if method == "fem-stab":
        return assemble_fem_stab(problem, trial, test, **kwargs)
    raise InvalidParameterError(f"unknown method {method!r}; choose from {METHODS}")


def separable_factors(problem, trial, test, method="iga-stab", delta=None, n_quad=None):
    """Factors of ``K = T_A kron A_s + T_M kron M_s`` (no Robin term).

    Returns
    -------
    T_A, T_M : csr_matrix (test time x trial time)
    A_s, M_s : csr_matrix (kept spatial indices, symmetric)

    Raises
    ------
    InvalidParameterError
        If the velocity depends on time or a Robin face is present.
    """
    method, delta = _check_method(method, delta, trial.degree_time)
    _choose_path(problem, "kron")
    if not problem.periodic and problem.geometry.faces("robin"):
        raise InvalidParameterError("Robin terms break the two-factor structure")
    tf = temporal_factors(trial.temporal, n_quad)
    sf = spatial_factors(problem, trial.spatial, n_quad)
    rt, ct, rs = test.time_indices, trial.time_indices, trial.space_indices
    TA = tf.projected if method == "fem-stab" else tf.mass
    if method == "iga-stab":
        TA = TA - delta * tf.penalty
    return (_sub(TA, rt, ct).tocsr(), (-_sub(tf.stiffness, rt, ct)).tocsr(),
            _sub(sf.stiffness, rs, rs).tocsr(), _sub(sf.mass, rs, rs).tocsr())


# ----------------------------------------------------------------------
# two-level Kronecker structure (time x second direction x first direction)
@dataclass(eq=False)
class TensorOperator:
    """Operator ``sum_k kron(T_k, Y_k, X_k)`` with ``Y_k`` one of two 1D matrices.

    ``Y_k`` is ``mass2`` for the entries of ``mass_terms`` and
    ``stiffness2`` for those of ``stiffness_terms``; each entry is a pair
    ``(T_k, X_k)`` of temporal and first-direction matrices.  The second
    direction therefore decouples in the eigenbasis of
    ``stiffness2 v = lam mass2 v`` (see :func:`~stwave.linsolve.solve_modes`).
    """

    mass_terms: tuple
    stiffness_terms: tuple
    mass2: sp.csr_matrix
    stiffness2: sp.csr_matrix

    @property
    def shape(self):
        T, X = self.mass_terms[0]
        n2 = self.mass2.shape
        return (T.shape[0] * n2[0] * X.shape[0], T.shape[1] * n2[1] * X.shape[1])

    def _blocks(self):
        for T, X in self.mass_terms:
            yield T, self.mass2, X
        for T, X in self.stiffness_terms:
            yield T, self.stiffness2, X

    def __matmul__(self, x):
        x = np.asarray(x, dtype=float)
        T0, X0 = self.mass_terms[0]
        Y = x.reshape(T0.shape[1], self.mass2.shape[1], X0.shape[1])
        out = np.zeros((T0.shape[0], self.mass2.shape[0], X0.shape[0]))
        for T, S2, S1 in self._blocks():
            Z = (Y.reshape(-1, Y.shape[2]) @ S1.T.toarray()).reshape(Y.shape[0], Y.shape[1], -1)
            Z = np.einsum("ij,tjk->tik", S2.toarray(), Z)
            out += (T @ Z.reshape(Z.shape[0], -1)).reshape(out.shape)
        return out.ravel()

    def norm_inf_bound(self):
        """Upper bound of ``||K||_inf`` (exact for a single term)."""
        return float(sum(_norm_inf(T) * _norm_inf(S2) * _norm_inf(S1) for T, S2, S1 in self._blocks()))

    def mode_operator(self, lam):
        """``sum kron(T, X) (mass terms) + lam sum kron(T, X) (stiffness terms)``."""
        K = None
        for scale, terms in ((1.0, self.mass_terms), (lam, self.stiffness_terms)):
            for T, X in terms:
                term = scale * sp.kron(T, X, format="csr")
                K = term if K is None else K + term
        return K.tocsr()

    def toarray(self):
        return sum(sp.kron(T, sp.kron(S2, S1)) for T, S2, S1 in self._blocks()).toarray()


def _norm_inf(A):
    return float(abs(A).sum(axis=1).max()) if A.nnz else 0.0


def tensor_factors(problem, trial, test, method="iga-stab", delta=None, n_quad=None, columns="trial"):
    """Operator of ``method`` as a :class:`TensorOperator`.

    Available for 2D problems with constant velocity on a geometry whose
    metric separates (:meth:`~stwave.geometry.GeometryMap.product_weights`)
    and with Robin faces, if any, at ``eta_0 = 0`` or ``1``.

    Parameters
    ----------
    columns : {"trial", "full"}
        Column space; ``"full"`` gives the operator acting on unconstrained
        coefficients (for moving a lifting to the right-hand side).
    """
    method, delta = _check_method(method, delta, trial.degree_time)
    geo = problem.geometry
    weights = geo.product_weights() if trial.dim == 2 else None
    if weights is None or problem.periodic:
        raise InvalidParameterError("tensor factors need a 2D geometry with a separable metric")
    if not problem.constant_velocity:
        raise InvalidParameterError("tensor factors need a constant velocity")
    robin = geo.faces("robin")
    if any(d != 0 for d, _ in robin):
        raise InvalidParameterError("Robin faces must be eta_0 faces for tensor factors")
    kv0, kv1 = trial.spatial
    p = max(kv0.degree, kv1.degree)
    nq = n_quad or (p + 1 if geo.is_affine else p + 2)
    c = float(problem.velocity)

    M0 = assemble_1d(kv0, kv0, 0, 0, weights["mass"], n_quad=nq)
    A0 = assemble_1d(kv0, kv0, 1, 1, weights["grad0"], n_quad=nq) * c * c
    B0 = assemble_1d(kv0, kv0, 0, 0, weights["grad1"], n_quad=nq) * c * c
    R0 = sp.csr_matrix((kv0.dim, kv0.dim))
    for _, side in robin:
        e = np.zeros(kv0.dim)
        e[-1 if side else 0] = 1.0
        R0 = R0 + problem.impedance * c * weights["face"](side) * sp.csr_matrix(np.outer(e, e))
    M1 = assemble_1d(kv1, kv1, 0, 0, n_quad=nq)
    A1 = assemble_1d(kv1, kv1, 1, 1, n_quad=nq)

    tf = temporal_factors(trial.temporal, n_quad)
    cols = trial if columns == "trial" else full_space(trial)
    rt, ct = test.time_indices, cols.time_indices
    (r0, r1), (c0, c1) = test.space_indices_1d, cols.space_indices_1d
    TA = tf.projected if method == "fem-stab" else tf.mass
    if method == "iga-stab":
        TA = TA - delta * tf.penalty
    TA, TS, TB = (_sub(m, rt, ct).tocsr() for m in (TA, tf.stiffness, tf.cross))
    mass_terms = [(TA, _sub(A0, r0, c0).tocsr()), (-TS, _sub(M0, r0, c0).tocsr())]
    if R0.nnz:
        mass_terms.append((TB, _sub(R0, r0, c0).tocsr()))
    return TensorOperator(tuple(mass_terms), ((TA, _sub(B0, r0, c0).tocsr()),),
                          _sub(M1, r1, c1).tocsr(), _sub(A1, r1, c1).tocsr())
