import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brownchain.errors import DomainError
from brownchain.spectral_core import (
    SpectralBasis,
    apply_laplacian,
    continuum_eigenfunction,
    continuum_rate,
    eigenvalue,
    eigenvalues,
    eigenvector_component,
    laplacian_matrix,
    transform_forward,
    transform_inverse,
)

from oracles import dense_eigensystem, dense_laplacian


def test_small_eigenvalues():
    assert eigenvalue(2, 1) == pytest.approx(-2.0, abs=1e-15)
    assert eigenvalue(3, 1) == pytest.approx(-1.0, abs=1e-14)
    assert eigenvalue(3, 2) == pytest.approx(-3.0, abs=1e-14)
    vals, _ = dense_eigensystem(3)
    np.testing.assert_allclose(eigenvalues(3), vals, atol=1e-14)


def test_first_eigenvalue_taylor_remainder():
    d = 64
    assert abs(d * d * eigenvalue(d, 1) + np.pi**2) <= np.pi**4 / (12 * d * d) * 1.1
    vals, _ = dense_eigensystem(d)
    assert eigenvalue(d, 1) == pytest.approx(vals[0], abs=1e-12)


def test_eigenvector_components():
    assert eigenvector_component(2, 1, 1) == pytest.approx(1.0)
    assert eigenvector_component(4, 2, 2) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("d, k", [(1, 1), (4, 0), (4, 4)])
def test_range_errors(d, k):
    with pytest.raises(DomainError):
        eigenvalue(d, k)


def test_eigenvector_range_error():
    with pytest.raises(DomainError):
        eigenvector_component(5, 1, 5)


def test_laplacian_matrix_is_tridiagonal():
    np.testing.assert_array_equal(laplacian_matrix(7), dense_laplacian(7))


def test_apply_laplacian_on_eigenvectors():
    d = 12
    basis = SpectralBasis(d)
    for k in range(1, d):
        f = basis.modes[k - 1]
        np.testing.assert_allclose(apply_laplacian(f), basis.eigenvalues[k - 1] * f, atol=1e-12)
    np.testing.assert_array_equal(apply_laplacian(np.zeros(d - 1)), 0.0)


def test_apply_laplacian_matches_dense():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 7))
    np.testing.assert_allclose(apply_laplacian(x), x @ dense_laplacian(8).T, atol=1e-13)
    np.testing.assert_allclose(apply_laplacian(x.T, axis=0), (x @ dense_laplacian(8).T).T, atol=1e-13)


def test_unit_coordinate():
    d = 10
    basis = SpectralBasis(d)
    x = np.sqrt(2 / d) * basis.modes[0]
    e = basis.forward(x)
    np.testing.assert_allclose(e, np.eye(d - 1)[0], atol=1e-14)


@pytest.mark.parametrize("d", [3, 8, 16, 64])
def test_against_dense_eigensolver(d):
    basis = SpectralBasis(d)
    vals, vecs = dense_eigensystem(d)
    np.testing.assert_allclose(basis.eigenvalues, vals, atol=1e-10)
    # eigenvectors agree up to sign
    overlap = np.abs(np.sum(basis.Q * vecs, axis=0))
    np.testing.assert_allclose(overlap, 1.0, atol=1e-10)
    np.testing.assert_allclose(basis.Q @ basis.Q.T, np.eye(d - 1), atol=1e-12)


def test_rates_approach_continuum_monotonically():
    for k in (1, 2, 5):
        gaps = [abs(SpectralBasis(d).rates[k - 1] - continuum_rate(k)) for d in (16, 32, 64, 128)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_continuum_eigenfunction_boundaries():
    assert continuum_eigenfunction(3, 0.0) == 0.0
    assert abs(continuum_eigenfunction(3, 1.0)) < 1e-15
    assert continuum_eigenfunction(1, 0.5) == pytest.approx(np.sqrt(2))


def test_arrays_are_read_only():
    basis = SpectralBasis(6)
    with pytest.raises(ValueError):
        basis.Q[0, 0] = 1.0


def test_transform_shape_mismatch():
    with pytest.raises(Exception):
        SpectralBasis(6).forward(np.zeros(4))


def test_propagator_matches_expm():
    from scipy.linalg import expm

    d, tau = 9, 0.003
    np.testing.assert_allclose(SpectralBasis(d).propagator(tau), expm(d * d * tau * dense_laplacian(d)), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 70), seed=st.integers(0, 2**32 - 1))
def test_round_trip_and_fast_path(d, seed):
    x = np.random.default_rng(seed).standard_normal((3, d - 1))
    basis = SpectralBasis(d)
    c = basis.forward(x)
    np.testing.assert_allclose(basis.inverse(c), x, atol=1e-12)
    np.testing.assert_allclose(basis.forward(x, fast=True), c, atol=1e-12)
    np.testing.assert_allclose(basis.inverse(c, fast=True), x, atol=1e-12)
    np.testing.assert_allclose(transform_inverse(transform_forward(x)), x, atol=1e-12)
    # isometry
    np.testing.assert_allclose(np.linalg.norm(c, axis=-1), np.linalg.norm(x, axis=-1), rtol=1e-12)
