import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stwave.exceptions import DomainError, GeometryError
from stwave.geometry import BoxMap, half_annulus, pullback_gradient, unit_box
from stwave.quadrature import mesh_quadrature, tensor_grid


def test_unit_box_1d():
    g = unit_box(1, T=10.0)
    np.testing.assert_allclose(g.jacobian(np.array([[0.3]])), [[[1.0]]])
    assert g.T == 10.0


def test_unit_box_2d_det():
    g = unit_box(2, lengths=(2.0, 0.5), T=0.375)
    np.testing.assert_allclose(g.det(np.array([[0.2, 0.7]])), [1.0])
    assert g.T == 0.375


def test_unit_box_errors():
    with pytest.raises(DomainError):
        unit_box(1, lengths=(0.0,))
    with pytest.raises(DomainError):
        unit_box(3)


def test_half_annulus_points():
    g = half_annulus(1, 3, 6)
    np.testing.assert_allclose(g.map(np.array([[0.0, 0.0], [1.0, 0.5]])), [[1, 0], [0, 3]], atol=1e-15)


def test_half_annulus_det():
    g = half_annulus(1, 3, 6)
    eta = np.array([[0.0, 0.1], [0.5, 0.4], [1.0, 0.9]])
    r = 1 + 2 * eta[:, 0]
    np.testing.assert_allclose(g.det(eta), np.pi * 2 * r, rtol=1e-14)


def test_half_annulus_area():
    assert half_annulus(1, 3, 6).measure() == pytest.approx(4 * np.pi, abs=1e-10)


def test_half_annulus_errors():
    with pytest.raises(DomainError):
        half_annulus(3, 1)


def test_half_annulus_tags():
    g = half_annulus()
    assert g.faces("dirichlet") == [(0, 0)]
    assert g.faces("robin") == [(0, 1)]
    assert sorted(g.faces("neumann")) == [(1, 0), (1, 1)]


def test_with_boundary_all():
    g = unit_box(2).with_boundary(all="neumann", x0="dirichlet")
    assert g.faces("dirichlet") == [(0, 0)]
    assert len(g.faces("neumann")) == 3


def test_pullback_identity_and_scaling():
    grad = np.array([[1.0, -2.0]])
    eta = np.array([[0.4, 0.6]])
    np.testing.assert_allclose(pullback_gradient(unit_box(2), eta, grad), grad)
    np.testing.assert_allclose(pullback_gradient(unit_box(2, lengths=(3.0, 3.0)), eta, grad), grad / 3)


def test_pullback_half_annulus_finite_difference():
    g = half_annulus()

    def phi(x):
        return np.sin(x[..., 0]) * x[..., 1] ** 2

    def grad_phi(x):
        return np.stack([np.cos(x[..., 0]) * x[..., 1] ** 2, 2 * np.sin(x[..., 0]) * x[..., 1]], axis=-1)

    eta = np.array([[0.5, 0.25]])
    h = 1e-6
    pgrad = np.array([[(phi(g.map(eta + h * e)) - phi(g.map(eta - h * e)))[0] / (2 * h)
                       for e in np.eye(2)]])
    phys = pullback_gradient(g, eta, pgrad)
    np.testing.assert_allclose(phys, grad_phi(g.map(eta)), atol=1e-6)


def test_pullback_singular():
    g = half_annulus(1e-300, 1.0)
    with pytest.raises(GeometryError):
        pullback_gradient(g, np.array([[0.0, 0.3]]), np.array([[1.0, 0.0]]))


def test_outward_normals_half_annulus():
    g = half_annulus()
    eta = np.array([[1.0, 0.25]])
    np.testing.assert_allclose(g.outward_normal((0, 1), eta), g.map(eta) / 3, atol=1e-14)
    np.testing.assert_allclose(g.outward_normal((1, 0), np.array([[0.5, 0.0]])), [[0, -1]], atol=1e-14)


def test_dirichlet_energy_scaling_quadrature():
    # grad phi . grad phi over (0, L)^2 for phi = x y
    L = 2.0
    g = unit_box(2, lengths=(L, L))
    x, w = mesh_quadrature(np.linspace(0, 1, 5), 4)
    eta, wt = tensor_grid([x, x], [w, w])
    X = g.map(eta)
    pgrad = np.stack([L * X[:, 1], L * X[:, 0]], axis=1)  # d(phi o F)/d eta
    phys = pullback_gradient(g, eta, pgrad)
    val = np.sum(wt * g.det(eta) * np.sum(phys**2, axis=1))
    assert val == pytest.approx(2 * L**4 / 3, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.1, 3.0), st.floats(0, 1), st.floats(0, 1))
def test_annulus_inverse_and_positive_det(r_in, width, e1, e2):
    g = half_annulus(r_in, r_in + width)
    eta = np.array([[e1, e2]])
    assert g.det(eta)[0] > 0
    np.testing.assert_allclose(g.inverse(g.map(eta)), eta, atol=1e-9)


def test_box_is_affine():
    assert isinstance(unit_box(1), BoxMap) and unit_box(1).is_affine
    assert not half_annulus().is_affine
