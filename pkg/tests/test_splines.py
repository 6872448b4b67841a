import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from stwave.exceptions import DomainError, InvalidRegularityError, InvalidSizeError, UnsupportedError
from stwave.splines import (eval_basis, greville_abscissae, make_open_knot_vector,
                            make_periodic_space)


def test_hat_space_knots():
    kv = make_open_knot_vector((0, 1), 2, 1, regularity=0)
    np.testing.assert_allclose(kv.knots, [0, 0, 0.5, 1, 1])
    assert kv.dim == 3


def test_maximal_regularity_dimension():
    kv = make_open_knot_vector((0, 1), 4, 3, regularity=2)
    assert kv.dim == 7
    np.testing.assert_array_equal(kv.multiplicities[1:-1], 1)


def test_extra_c0_breakpoint():
    kv = make_open_knot_vector((0, 1), 8, 2, regularity=1, extra_c0_breakpoints=[0.5])
    assert np.sum(np.isclose(kv.knots, 0.5)) == 2
    assert kv.dim == 11
    assert kv.dim == kv.knots.size - kv.degree - 1


def test_inserted_c0_breakpoint_off_mesh():
    kv = make_open_knot_vector((0, 1), 2, 2, extra_c0_breakpoints=[0.3])
    assert np.sum(np.isclose(kv.knots, 0.3)) == 2
    assert kv.n_elements == 3


def test_open_knot_vector_errors():
    with pytest.raises(InvalidRegularityError):
        make_open_knot_vector((0, 1), 4, 2, regularity=2)
    with pytest.raises(DomainError):
        make_open_knot_vector((0, 1), 4, 2, extra_c0_breakpoints=[1.0])
    with pytest.raises(DomainError):
        make_open_knot_vector((0, 1), 4, 2, extra_c0_breakpoints=[-0.5])


def test_eval_hats():
    kv = make_open_knot_vector((0, 1), 2, 1)
    tab = eval_basis(kv, 0.25)
    np.testing.assert_allclose(tab.values[0], [0.5, 0.5])
    np.testing.assert_array_equal(tab.indices, [0, 1])


def test_eval_outside_domain():
    kv = make_open_knot_vector((0, 1), 2, 1)
    with pytest.raises(DomainError):
        eval_basis(kv, 1.5)


def test_right_endpoint_is_last_span():
    kv = make_open_knot_vector((0, 1), 4, 2)
    tab = eval_basis(kv, 1.0)
    assert tab.indices[-1] == kv.dim - 1
    assert tab.values[0, -1] == pytest.approx(1.0)


def test_against_symbolic_cox_de_boor():
    kv = make_open_knot_vector((0, 1), 4, 2)
    x = sympy.Symbol("x")
    knots = [sympy.Rational(int(round(4 * k)), 4) for k in kv.knots]
    basis = sympy.bspline_basis_set(2, knots, x)
    xq = sympy.Rational(3, 10)
    tab = eval_basis(kv, 0.3, max_deriv=1)
    for j, i in enumerate(tab.indices):
        b = basis[i]
        assert float(b.subs(x, xq)) == pytest.approx(tab.values[0, j], abs=1e-14)
        db = sympy.diff(b, x)
        assert float(db.subs(x, xq)) == pytest.approx(tab.values[1, j], abs=1e-13)


def test_periodic_hats_wrap():
    kv = make_periodic_space((0, 1), 8, 1)
    assert kv.dim == 8
    tab = eval_basis(kv, 0.99)
    assert 0 in set(tab.indices.tolist())
    assert tab.values[0].sum() == pytest.approx(1.0)


def test_periodic_too_few_elements():
    with pytest.raises(InvalidSizeError):
        make_periodic_space((0, 1), 2, 2)


def test_periodic_translation_permutes():
    kv = make_periodic_space((0, 1), 12, 3)
    x = np.linspace(0.01, 0.9, 17)
    h = 1.0 / 12
    c0 = kv.collocation(x).toarray()
    c1 = kv.collocation(x + h).toarray()
    np.testing.assert_allclose(c1, np.roll(c0, 1, axis=1), atol=1e-13)


def test_greville():
    np.testing.assert_allclose(greville_abscissae(make_open_knot_vector((0, 1), 2, 1)), [0, 0.5, 1])
    np.testing.assert_allclose(greville_abscissae(make_open_knot_vector((0, 1), 2, 2)),
                               [0, 0.25, 0.75, 1])
    g = greville_abscissae(make_open_knot_vector((0, 1), 4, 3))
    assert g.size == 7 and np.all(np.diff(g) > 0)
    with pytest.raises(UnsupportedError):
        greville_abscissae(make_periodic_space((0, 1), 8, 2))


@st.composite
def knot_vectors(draw):
    p = draw(st.integers(1, 4))
    n = draw(st.integers(1, 7))
    q = draw(st.integers(-1, p - 1))
    if draw(st.booleans()) and n > p:
        return make_periodic_space((0.0, 1.0), n, p)
    return make_open_knot_vector((0.0, 1.0), n, p, regularity=q)


@settings(max_examples=60, deadline=None)
@given(knot_vectors(), st.floats(0.0, 1.0))
def test_partition_of_unity(kv, x):
    tab = eval_basis(kv, x, max_deriv=kv.degree)
    assert np.all(tab.values[0] >= -1e-15)
    assert tab.values[0].sum() == pytest.approx(1.0, abs=1e-13)
    scale = np.max(np.abs(tab.values[1:]), initial=1.0)
    np.testing.assert_allclose(tab.values[1:].sum(axis=1), 0.0, atol=1e-12 * scale * kv.degree)


@settings(max_examples=40, deadline=None)
@given(knot_vectors(), st.floats(0.0, 1.0))
def test_local_support(kv, x):
    if kv.periodic:
        return
    vals = kv.collocation([x]).toarray()[0]
    for i in np.nonzero(np.abs(vals) > 0)[0]:
        assert kv.knots[i] - 1e-12 <= x <= kv.knots[i + kv.degree + 1] + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 3), st.integers(0, 2**31 - 1))
def test_smoothness_at_breakpoint(p, q, seed):
    q = min(q, p - 1)
    kv = make_open_knot_vector((0.0, 1.0), 2, p, regularity=q)
    coef = np.random.default_rng(seed).standard_normal(kv.dim)
    eps = 1e-12
    left = kv.basis_derivatives([0.5 - eps], p)
    right = kv.basis_derivatives([0.5], p)

    def derivs(first, values):
        idx = first[0] + np.arange(p + 1)
        return values[0] @ coef[idx]

    dl, dr = derivs(*left), derivs(*right)
    scale = np.abs(dl) + np.abs(dr) + 1.0
    # continuous up to order q, jump at order q + 1
    np.testing.assert_allclose(dl[: q + 1], dr[: q + 1], atol=1e-8 * scale[: q + 1].max())
    assert abs(dl[q + 1] - dr[q + 1]) > 1e-6 * scale[q + 1]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 9), st.integers(-1, 3))
def test_dimension_formula(p, n, q):
    q = min(q, p - 1)
    kv = make_open_knot_vector((0.0, 2.0), n, p, regularity=q)
    assert kv.dim == int(kv.multiplicities.sum()) - p - 1
    assert kv.dim == p + 1 + (n - 1) * (p - q)
