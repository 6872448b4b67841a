import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stwave.assembly import assemble_system, separable_factors, tensor_factors
from stwave.discretization import build_spaces
from stwave.exceptions import InvalidSizeError, SingularSystemError
from stwave.linsolve import factorize, residual_norm, solve, solve_modes, solve_separable
from stwave.problem import make_problem
from stwave.splines import make_open_knot_vector


def small_system(p=1, n=4, method="iga-stab", name="standing_wave", T=1.0, dims=None):
    prob = make_problem(name, T=T)
    dims = dims or (n,) * prob.dim
    kvs = [make_open_knot_vector((0, 1), k, p) for k in dims]
    trial, test = build_spaces(kvs, make_open_knot_vector((0, T), n, p), prob.dirichlet_faces())
    return prob, trial, test, assemble_system(prob, trial, test, method)


def test_identity():
    fact = factorize(sp.identity(5, format="csr"))
    b = np.arange(5.0)
    np.testing.assert_array_equal(solve(fact, b), b)


@pytest.mark.parametrize("method", ["banded", "sparse"])
def test_matches_dense_oracle(method):
    _, _, _, system = small_system(p=1, n=4)
    x = solve(factorize(system, method=method), system.rhs)
    oracle = np.linalg.solve(system.operator.toarray(), system.rhs)
    np.testing.assert_allclose(x, oracle, rtol=1e-10, atol=1e-12 * np.abs(oracle).max())


def test_auto_switches_to_sparse_over_budget():
    _, _, _, system = small_system(p=2, n=6)
    assert factorize(system).kind == "banded"
    assert factorize(system, budget_bytes=1).kind == "sparse"


def test_singular_detected():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    for method in ("banded", "sparse"):
        with pytest.raises(SingularSystemError):
            factorize(A, method=method)
    with pytest.raises(SingularSystemError):
        factorize(sp.csr_matrix((3, 3)))


def test_nonsquare_and_mismatch():
    with pytest.raises(InvalidSizeError):
        factorize(sp.csr_matrix(np.ones((2, 3))))
    fact = factorize(sp.identity(3, format="csr"))
    with pytest.raises(InvalidSizeError):
        solve(fact, np.ones(4))


def test_zero_rhs_and_unit_vectors():
    _, _, _, system = small_system(p=2, n=5)
    fact = factorize(system)
    assert not np.any(solve(fact, np.zeros(system.n_dof)))
    for k in (0, 7, system.n_dof - 1):
        e = np.zeros(system.n_dof)
        e[k] = 1.0
        np.testing.assert_allclose(solve(fact, system.operator @ e), e, atol=1e-10)


def test_residual_report():
    _, _, _, system = small_system(p=2, n=6)
    x, info = solve(factorize(system), system.rhs, return_info=True)
    assert info["ok"]
    assert info["residual"] <= 1e-9 * info["scale"]


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 40), st.integers(0, 2**31 - 1))
def test_refinement_does_not_hurt(n, seed):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=0.3, random_state=rng) + sp.diags(rng.uniform(1, 2, n) * n)
    A = sp.csr_matrix(A)
    b = rng.standard_normal(n)
    fact = factorize(A, method="sparse")
    r0 = residual_norm(A, solve(fact, b, refine=0), b)[0]
    r1 = residual_norm(A, solve(fact, b, refine=1), b)[0]
    assert r1 <= max(r0, 1e-15 * np.abs(b).max())


def test_factors_reproduce_operator_on_probes():
    _, _, _, system = small_system(p=2, n=6)
    fact = factorize(system)
    rng = np.random.default_rng(0)
    for _ in range(3):
        v = rng.standard_normal(system.n_dof)
        w = fact.apply_inverse(system.operator @ v)
        assert np.linalg.norm(w - v) <= 1e-10 * np.linalg.norm(v)


@pytest.mark.parametrize("method", ["iga-stab", "fem-stab", "plain"])
def test_separable_matches_direct(method):
    prob, trial, test, system = small_system(p=2, n=6, method=method)
    x = solve(factorize(system), system.rhs)
    y = solve_separable(*separable_factors(prob, trial, test, method), system.rhs)
    np.testing.assert_allclose(y, x, rtol=1e-9, atol=1e-12 * np.abs(x).max())


@pytest.mark.parametrize("name,dims", [("scattering", (4, 6)), ("linear_in_time", (3, 5))])
@pytest.mark.parametrize("method", ["iga-stab", "fem-stab"])
def test_modes_match_direct(name, dims, method):
    T = 2.0
    prob = make_problem(name, T=T) if name == "scattering" else make_problem(name, dim=2, T=T)
    kvs = [make_open_knot_vector((0, 1), k, 2) for k in dims]
    trial, test = build_spaces(kvs, make_open_knot_vector((0, T), 5, 2), prob.dirichlet_faces())
    system = assemble_system(prob, trial, test, method)
    x = solve(factorize(system), system.rhs)
    y, info = solve_modes(tensor_factors(prob, trial, test, method), system.rhs, return_info=True)
    assert info["ok"]
    np.testing.assert_allclose(y, x, atol=1e-12 * max(np.abs(x).max(), 1.0))
