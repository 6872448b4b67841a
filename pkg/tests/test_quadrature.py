import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stwave.exceptions import DomainError, InvalidSizeError
from stwave.quadrature import gauss_legendre, map_to_element, mesh_quadrature, tensor_grid


def test_one_point():
    r = gauss_legendre(1)
    np.testing.assert_allclose(r.nodes, [0.0], atol=1e-16)
    np.testing.assert_allclose(r.weights, [2.0])


def test_two_point():
    r = gauss_legendre(2)
    np.testing.assert_allclose(np.sort(r.nodes), [-1 / np.sqrt(3), 1 / np.sqrt(3)], rtol=1e-15)
    np.testing.assert_allclose(r.weights, [1.0, 1.0], rtol=1e-15)


def test_x8():
    r = gauss_legendre(5)
    assert np.sum(r.weights * r.nodes**8) == pytest.approx(2 / 9, abs=1e-14)


@pytest.mark.parametrize("n", [0, 33])
def test_range(n):
    with pytest.raises(InvalidSizeError):
        gauss_legendre(n)


@pytest.mark.parametrize("n", range(1, 33))
def test_matches_numpy_leggauss(n):
    r = gauss_legendre(n)
    x, w = np.polynomial.legendre.leggauss(n)
    order = np.argsort(r.nodes)
    np.testing.assert_allclose(r.nodes[order], x, atol=1e-14)
    np.testing.assert_allclose(r.weights[order], w, atol=1e-14)


def test_rule_invariants():
    for n in range(1, 33):
        r = gauss_legendre(n)
        assert r.weights.sum() == pytest.approx(2.0, abs=1e-13)
        assert np.all(r.weights > 0)
        np.testing.assert_allclose(np.sort(r.nodes), -np.sort(r.nodes)[::-1], atol=1e-15)


def test_map_to_element():
    x, w = map_to_element(gauss_legendre(1), (0.0, 0.5))
    np.testing.assert_allclose(x, [0.25])
    np.testing.assert_allclose(w, [0.5])
    x, w = map_to_element(gauss_legendre(3), (1.0, 3.0))
    assert np.sum(w * x**2) == pytest.approx(26 / 3, rel=1e-14)
    with pytest.raises(DomainError):
        map_to_element(gauss_legendre(2), (1.0, 1.0))


def test_mesh_quadrature_and_tensor_grid():
    x, w = mesh_quadrature(np.array([0.0, 0.3, 1.0]), 3)
    assert np.sum(w * np.exp(x)) == pytest.approx(np.e - 1, rel=1e-6)
    pts, wts = tensor_grid([x, x], [w, w])
    assert np.sum(wts * pts[:, 0] * pts[:, 1] ** 2) == pytest.approx(1 / 6, rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_polynomial_exactness(n, seed):
    coef = np.random.default_rng(seed).standard_normal(2 * n)
    poly = np.polynomial.Polynomial(coef)
    r = gauss_legendre(n)
    exact = poly.integ()(1.0) - poly.integ()(-1.0)
    assert np.sum(r.weights * poly(r.nodes)) == pytest.approx(exact, abs=1e-12 * (1 + np.abs(coef).sum()))
