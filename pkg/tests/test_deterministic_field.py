import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brownchain.deterministic_field import (
    DeterministicParams,
    d_continuum,
    d_continuum_grid,
    delta_discrete_matrix,
    delta_discrete_spectral,
    delta_profile,
    fourier_coeff,
    h_continuum,
    h_discrete,
    truncation_bound,
)
from brownchain.errors import DomainError

from oracles import quad_coefficient, rk4_pulled_chain


def test_h_values():
    assert h_continuum(0.0) == 0.0
    assert h_continuum(1.0) == 0.0
    assert h_continuum(0.5) == pytest.approx(-1 / 16)


def test_h_discrete_is_scaled_continuum():
    d = 10
    i = np.arange(d + 1)
    np.testing.assert_allclose(h_discrete(d, i) / d**2, h_continuum(i / d), atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 7, 20])
def test_fourier_coefficients_against_quadrature(k):
    assert fourier_coeff(k) == pytest.approx(quad_coefficient(k), abs=1e-13)


def test_fourier_examples():
    assert fourier_coeff(1) == pytest.approx(-np.sqrt(2) / np.pi**3, rel=1e-14)
    assert fourier_coeff(2) == pytest.approx(np.sqrt(2) / (8 * np.pi**3), rel=1e-14)
    # four-digit sanity check of the magnitudes
    assert fourier_coeff(1) == pytest.approx(-0.04561, abs=1e-5)
    assert fourier_coeff(2) == pytest.approx(0.005701, abs=1e-6)


def test_series_reproduces_h():
    k = np.arange(1, 201)
    partial = np.sum(fourier_coeff(k) * np.sqrt(2) * np.sin(k * np.pi * 0.3))
    assert abs(partial - h_continuum(0.3)) <= 1e-5
    assert abs(partial - h_continuum(0.3)) <= truncation_bound(1.0, 200)


def test_params_validation():
    with pytest.raises(DomainError):
        DeterministicParams(-1.0, 8)
    with pytest.raises(DomainError):
        DeterministicParams(1.0, 1)


def test_negative_time_rejected():
    p = DeterministicParams(1.0, 8)
    with pytest.raises(DomainError):
        delta_discrete_spectral(p, -0.1, 3)
    with pytest.raises(DomainError):
        d_continuum(-0.1, 0.5)


def test_initial_and_boundary_values():
    p = DeterministicParams(0.7, 9)
    i = np.arange(10)
    np.testing.assert_allclose(delta_discrete_spectral(p, 0.0, i), i / 9, atol=1e-14)
    np.testing.assert_allclose(delta_discrete_matrix(p, 0.0, i), i / 9, atol=1e-14)
    for t in (0.0, 0.3, 2.0):
        assert delta_discrete_spectral(p, t, 0) == 0.0
        assert delta_discrete_spectral(p, t, 9) == pytest.approx(1 + 0.7 * t, abs=1e-15)


def test_example_point_against_rk4():
    p = DeterministicParams(1.0, 8)
    spectral = delta_discrete_spectral(p, 0.1, 4)
    assert spectral == pytest.approx(delta_discrete_matrix(p, 0.1, 4), abs=1e-12)
    assert abs(spectral - rk4_pulled_chain(8, 1.0, 0.1)[4]) <= 1e-6


def test_long_time_limit():
    p = DeterministicParams(1.0, 8)
    t = 50.0
    i = np.arange(9)
    limit = i / 8 * (t + 1) + h_discrete(8, i) / 64
    np.testing.assert_allclose(delta_discrete_spectral(p, t, i), limit, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(2, 32), t=st.floats(0, 1), frac=st.floats(0, 1), eps=st.floats(0, 3))
def test_representations_agree(d, t, frac, eps):
    i = int(round(frac * d))
    p = DeterministicParams(eps, d)
    assert abs(delta_discrete_matrix(p, t, i) - delta_discrete_spectral(p, t, i)) <= 1e-12


def test_profile_shape_and_rows():
    p = DeterministicParams(1.0, 6)
    times = np.array([0.0, 0.1, 0.4])
    prof = delta_profile(p, times)
    assert prof.shape == (3, 7)
    np.testing.assert_allclose(prof[1], delta_discrete_spectral(p, 0.1, np.arange(7)), atol=1e-14)


def test_continuum_initial_and_boundary():
    v = np.linspace(0.1, 0.9, 9)
    assert np.max(np.abs(d_continuum(0.0, v, 1.0, 200) - v)) <= 1e-5
    t = np.linspace(0, 3, 7)
    for K in (1, 5, 200):
        np.testing.assert_array_equal(d_continuum(t, 0.0, 1.0, K), 0.0)
        np.testing.assert_array_equal(d_continuum(t, 1.0, 1.0, K), 1 + t)


def test_truncation_bound_certifies_tail():
    t, v = 0.0, np.linspace(0.05, 0.95, 19)
    ref = d_continuum(t, v, 1.0, 20000)
    for K in (10, 50, 200):
        assert np.max(np.abs(d_continuum(t, v, 1.0, K) - ref)) <= truncation_bound(1.0, K)


def test_discrete_converges_to_continuum():
    p = DeterministicParams(1.0, 256)
    assert abs(delta_discrete_spectral(p, 0.05, 128) - d_continuum(0.05, 0.5)) <= 5e-3


def test_zero_epsilon_is_linear_profile():
    v = np.linspace(0, 1, 11)
    np.testing.assert_allclose(d_continuum(0.4, v, 0.0), v, atol=1e-15)
    np.testing.assert_allclose(delta_profile(DeterministicParams(0.0, 10), [0.4])[0], v, atol=1e-14)


def test_heat_equation_residual():
    dt, dv = 1e-5, 1e-3
    f = lambda t, v: d_continuum(t, v, 1.0, 400)  # noqa: E731
    t = np.array([0.05, 0.2, 0.8])[:, None]
    v = np.linspace(0.1, 0.9, 9)[None, :]
    resid = (f(t + dt, v) - f(t, v)) / dt - (f(t, v + dv) - 2 * f(t, v) + f(t, v - dv)) / dv**2
    assert np.max(np.abs(resid)) <= 1e-2


def test_grid_matches_pointwise():
    times = np.array([0.0, 0.3])
    v = np.array([0.0, 0.25, 1.0])
    grid = d_continuum_grid(times, v, 1.0, 50)
    assert grid.shape == (2, 3)
    assert grid[1, 1] == pytest.approx(float(d_continuum(0.3, 0.25, 1.0, 50)), abs=1e-15)


def test_monotone_d_convergence():
    errs = []
    for d in (16, 32, 64, 128, 256):
        times = np.linspace(0, 1, 17)
        i = np.arange(d + 1)
        delta = delta_profile(DeterministicParams(1.0, d), times)
        cont = d_continuum_grid(times, i / d, 1.0, 400)
        errs.append(np.max(np.abs(delta - cont)))
    assert all(b <= 1.1 * a for a, b in zip(errs, errs[1:]))
