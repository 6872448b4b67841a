"""
Direct solution of the nonsymmetric space-time system.

The tensor DOF numbering (time slowest) gives the operator a band of width
about ``(p_t + 1) N_s``.  When the LAPACK band storage fits the memory
budget the system is factorized with ``dgbtrf``; otherwise a general sparse
LU (SuperLU, column-minimum-degree ordering) is used.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .exceptions import InvalidSizeError, SingularSystemError

__all__ = ["Factorization", "factorize", "solve", "solve_separable", "solve_modes", "residual_norm",
           "BAND_BUDGET_BYTES"]

BAND_BUDGET_BYTES = 512 * 2 ** 20
PIVOT_TOL = 1e-14


@dataclass(eq=False)
class Factorization:
    """LU factors of a square sparse operator.

    Attributes
    ----------
    kind : {"banded", "sparse"}
    operator : csr_matrix
        Kept for residual checks and iterative refinement.
    stats : dict
        ``kl``/``ku`` bandwidths or ``nnz_L``/``nnz_U`` fill counts, and the
        smallest pivot relative to ``max|A|``.
    """

    kind: str
    operator: sp.csr_matrix
    stats: dict = field(default_factory=dict)
    _lu: object = None

    @property
    def n(self):
        return self.operator.shape[0]

    def apply_inverse(self, b):
        b = np.asarray(b, dtype=float)
        if self.kind == "banded":
            ab, ipiv, kl, ku = self._lu
            x, info = lapack.dgbtrs(ab, kl, ku, b, ipiv)
            if info != 0:
                raise SingularSystemError(f"dgbtrs failed with info={info}", np.nan)
            return x
        return self._lu.solve(b)


def _bandwidths(A):
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0, 0
    d = coo.row - coo.col
    return int(max(d.max(), 0)), int(max(-d.min(), 0))


def _banded_storage(A, kl, ku):
    """LAPACK ``dgbtrf`` layout: ``ab[kl + ku + i - j, j] = A[i, j]``."""
    n = A.shape[0]
    coo = A.tocoo()
    ab = np.zeros((2 * kl + ku + 1, n), order="F")
    ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
    return ab


def factorize(system, method="auto", budget_bytes=BAND_BUDGET_BYTES):
    """LU factorization with partial pivoting.

    Parameters
    ----------
    system : LinearSystem or sparse matrix
    method : {"auto", "banded", "sparse"}
    budget_bytes : int
        Largest band storage tried by ``"auto"``.

    Raises
    ------
    SingularSystemError
        If a pivot is below ``1e-14 * max|A|``.
    """
    A = getattr(system, "operator", system)
    A = sp.csr_matrix(A, dtype=float)
    n, m = A.shape
    if n != m:
        raise InvalidSizeError(f"operator must be square, got {A.shape}")
    amax = float(abs(A).max()) if A.nnz else 0.0
    if amax == 0.0 or not np.isfinite(amax):
        raise SingularSystemError("operator is zero or not finite", 0.0)
    kl, ku = _bandwidths(A)
    band_bytes = 8 * (2 * kl + ku + 1) * n
    if method == "auto":
        method = "banded" if band_bytes <= budget_bytes else "sparse"

    if method == "banded":
        ab = _banded_storage(A, kl, ku)
        lu, ipiv, info = lapack.dgbtrf(ab, kl, ku, overwrite_ab=True)
        diag = lu[kl + ku]
        pivot = float(np.min(np.abs(diag))) / amax
        if info > 0 or pivot < PIVOT_TOL:
            raise SingularSystemError("operator is numerically singular", pivot)
        return Factorization("banded", A, {"kl": kl, "ku": ku, "band_bytes": band_bytes,
                                           "min_pivot_ratio": pivot}, (lu, ipiv, kl, ku))
    if method != "sparse":
        raise InvalidSizeError(f"unknown factorization method {method!r}")
    try:
        lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystemError(f"operator is singular: {exc}", 0.0) from None
    pivot = float(np.min(np.abs(lu.U.diagonal()))) / amax
    if pivot < PIVOT_TOL:
        raise SingularSystemError("operator is numerically singular", pivot)
    return Factorization("sparse", A, {"nnz_L": lu.L.nnz, "nnz_U": lu.U.nnz,
                                       "min_pivot_ratio": pivot}, lu)


def residual_norm(A, x, b):
    """``||b - A x||_inf`` and the acceptance scale ``||A||_inf ||x||_inf + ||b||_inf``."""
    r = b - A @ x
    scale = spla.norm(A, np.inf) * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
    return float(np.max(np.abs(r), initial=0.0)), float(scale)


def solve(factorization, rhs, refine=1, return_info=False):
    """Solve with ``refine`` rounds of iterative refinement.

    Parameters
    ----------
    factorization : Factorization
    rhs : array_like, shape (n,)
    refine : int
    return_info : bool
        Also return ``{"residual", "scale", "relative_residual", "ok"}``
        where ``ok`` means ``residual <= 1e-9 * scale``.
    """
    b = np.asarray(rhs, dtype=float)
    if b.shape != (factorization.n,):
        raise InvalidSizeError(f"rhs has shape {b.shape}, expected ({factorization.n},)")
    A = factorization.operator
    x = factorization.apply_inverse(b)
    for _ in range(int(refine)):
        x = x + factorization.apply_inverse(b - A @ x)
    if not return_info:
        return x
    res, scale = residual_norm(A, x, b)
    rel = res / scale if scale > 0 else 0.0
    return x, {"residual": res, "scale": scale, "relative_residual": rel,
               "ok": bool(res <= 1e-9 * scale) or scale == 0.0}


def _exact_banded_solve(rows, b):
    """Gaussian elimination in exact rational arithmetic.

    ``rows[i]`` maps column index to a nonzero :class:`~fractions.Fraction`.
    Pivoting only skips exact zeros, so fill stays inside the band.
    """
    n = len(b)
    rows = [dict(r) for r in rows]
    b = list(b)
    for k in range(n):
        piv = next((i for i in range(k, n) if rows[i].get(k)), None)
        if piv is None:
            raise SingularSystemError("modal system is exactly singular", 0.0)
        if piv != k:
            rows[k], rows[piv] = rows[piv], rows[k]
            b[k], b[piv] = b[piv], b[k]
        pk = rows[k][k]
        for i in range(k + 1, n):
            a = rows[i].get(k)
            if not a:
                continue
            f = a / pk
            for j, v in rows[k].items():
                rows[i][j] = rows[i].get(j, 0) - f * v
            del rows[i][k]
            b[i] -= f * b[k]
    x = [Fraction(0)] * n
    for k in range(n - 1, -1, -1):
        s = b[k] - sum(v * x[j] for j, v in rows[k].items() if j > k)
        x[k] = s / rows[k][k]
    return x


def _as_float(q):
    try:
        return float(q)
    except OverflowError:
        return np.inf if q > 0 else -np.inf


def solve_separable(temporal_stiffness, temporal_mass, spatial_stiffness, spatial_mass, rhs):
    """Exact solution of ``(T_A kron A + T_M kron M) x = rhs`` by spatial modes.

    With ``A v = lam M v`` (symmetric, ``M`` positive definite) the system
    splits into one temporal system ``(lam T_A + T_M) y = b_hat`` per
    spatial eigenpair.  Those small banded systems are solved in exact
    rational arithmetic from the double-precision data, so the result is
    free of the rounding amplification that makes the direct solver
    useless once the operator is numerically singular (e.g. plain
    Galerkin beyond the CFL limit).

    Parameters
    ----------
    temporal_stiffness, temporal_mass : sparse (n_t, n_t)
        Temporal factors multiplying ``A`` and ``M`` respectively.
    spatial_stiffness, spatial_mass : sparse (n_s, n_s), symmetric
    rhs : ndarray, shape (n_t * n_s,)
        Time index slowest.

    Returns
    -------
    ndarray
        Solution rounded to double (entries beyond the double range
        become ``inf``).
    """
    from scipy.linalg import eigh

    TA = sp.csr_matrix(temporal_stiffness)
    TM = sp.csr_matrix(temporal_mass)
    n_t = TA.shape[0]
    lam, V = eigh(spatial_stiffness.toarray(), spatial_mass.toarray())
    n_s = lam.size
    b = np.asarray(rhs, dtype=float).reshape(n_t, n_s) @ V  # V^T b per time row
    TA_rows = [dict(zip(TA.indices[TA.indptr[i]:TA.indptr[i + 1]], TA.data[TA.indptr[i]:TA.indptr[i + 1]]))
               for i in range(n_t)]
    TM_rows = [dict(zip(TM.indices[TM.indptr[i]:TM.indptr[i + 1]], TM.data[TM.indptr[i]:TM.indptr[i + 1]]))
               for i in range(n_t)]
    Y = np.empty((n_t, n_s))
    for m in range(n_s):
        lm = Fraction(float(lam[m]))
        rows = []
        for i in range(n_t):
            r = {}
            for j in set(TA_rows[i]) | set(TM_rows[i]):
                v = lm * Fraction(float(TA_rows[i].get(j, 0.0))) + Fraction(float(TM_rows[i].get(j, 0.0)))
                if v:
                    r[int(j)] = v
            rows.append(r)
        y = _exact_banded_solve(rows, [Fraction(float(v)) for v in b[:, m]])
        Y[:, m] = [_as_float(v) for v in y]
    with np.errstate(over="ignore", invalid="ignore"):
        return (Y @ V.T).ravel()


def solve_modes(operator, rhs, refine=1, return_info=False, budget_bytes=BAND_BUDGET_BYTES):
    """Solve a :class:`~stwave.assembly.TensorOperator` system mode by mode.

    With ``stiffness2 Q = mass2 Q diag(lam)`` and ``Q^T mass2 Q = I`` the
    substitution ``x = (I kron Q kron I) y`` and a left multiplication by
    ``I kron Q^T kron I`` split the system into one time by first-direction
    system per eigenvalue, each factorized by :func:`factorize`.  The cost
    is that of ``n_2`` problems of one spatial dimension less.

    Parameters
    ----------
    operator : TensorOperator
    rhs : array_like
    refine : int
        Iterative refinement rounds inside each mode.
    return_info : bool
        Also return the residual report of :func:`solve` (computed with the
        tensor matrix-vector product and a norm upper bound for the scale).

    Raises
    ------
    SingularSystemError
        If any modal system is numerically singular.
    """
    from scipy.linalg import eigh

    n, m = operator.shape
    if n != m:
        raise InvalidSizeError(f"operator must be square, got {operator.shape}")
    b = np.asarray(rhs, dtype=float)
    if b.shape != (n,):
        raise InvalidSizeError(f"rhs has shape {b.shape}, expected ({n},)")
    lam, Q = eigh(operator.stiffness2.toarray(), operator.mass2.toarray())
    T0, X0 = operator.mass_terms[0]
    n_t, n_1, n_2 = T0.shape[0], X0.shape[0], lam.size
    bh = np.einsum("tji,jm->tmi", b.reshape(n_t, n_2, n_1), Q)
    Y = np.empty_like(bh)
    worst = np.inf
    for k in range(n_2):
        fact = factorize(operator.mode_operator(float(lam[k])), budget_bytes=budget_bytes)
        worst = min(worst, fact.stats["min_pivot_ratio"])
        Y[:, k, :] = solve(fact, bh[:, k, :].ravel(), refine=refine).reshape(n_t, n_1)
    x = np.einsum("tmi,jm->tji", Y, Q).ravel()
    if not return_info:
        return x
    r = b - operator @ x
    res = float(np.max(np.abs(r), initial=0.0))
    scale = operator.norm_inf_bound() * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
    rel = res / scale if scale > 0 else 0.0
    return x, {"residual": res, "scale": float(scale), "relative_residual": rel,
               "ok": bool(res <= 1e-9 * scale) or scale == 0.0, "n_modes": n_2,
               "min_pivot_ratio": worst}
