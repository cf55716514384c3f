"""The noiseless chain (sigma = 0) and its continuum limit.

The discrete profile Delta(t, i/d) solves the rescaled chain with zero noise,
initial profile i/d and boundary data (0, 1 + eps t). It splits into the moving
linear profile plus a cubic correction relaxing through the discrete heat
semigroup; the continuum profile D(t, v) replaces the semigroup by the sine
series with rates pi^2 k^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .spectral_core import SpectralBasis

DEFAULT_TRUNCATION = 200


@dataclass(frozen=True)
class DeterministicParams:
    epsilon: float
    d: int
    K: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        if self.epsilon < 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d}")
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"truncation K must be a positive integer, got {self.K}")


def h_continuum(v):
    """Cubic profile ``h(v) = v (v^2 - 1) / 6``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(v > 1):
        raise DomainError("v must lie in [0, 1]")
    return v * (v * v - 1.0) / 6.0


def h_discrete(d: int, i):
    """Discrete samples ``h^i = i (i^2 - d^2) / (6 d)``, equal to ``d^2 h(i/d)``."""
    i = np.asarray(i, dtype=float)
    if np.any(i < 0) or np.any(i > d):
        raise DomainError(f"i must lie in 0..{d}")
    return i * (i * i - d * d) / (6.0 * d)


def fourier_coeff(k):
    """Sine coefficient ``c_k = sqrt(2) int_0^1 h(v) sin(k pi v) dv``.

    Three integrations by parts give ``(-1)^k sqrt(2) / (k pi)^3``.
    """
    k = np.asarray(k)
    if np.any(k < 1):
        raise DomainError("k must be >= 1")
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return sign * np.sqrt(2.0) / (k * np.pi) ** 3


def truncation_bound(epsilon: float, K: int) -> float:
    """Uniform bound on the series tail of D beyond mode K.

    Each dropped term is at most ``eps * 2 / (k pi)^3`` and
    ``sum_{k>K} k^-3 <= 1 / (2 K^2)``.
    """
    return epsilon / (np.pi**3 * K**2)


def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    return t


@lru_cache(maxsize=64)
def _h_projection(d: int) -> np.ndarray:
    # (2 / d^3) sum_m h^m f_k^m, the coefficient of f_k^i in the cubic correction
    basis = SpectralBasis(d)
    h = h_discrete(d, np.arange(1, d))
    proj = 2.0 / d**3 * (basis.modes @ h)
    proj.setflags(write=False)
    return proj


def _boundary_rows(params: DeterministicParams, t: np.ndarray, i: np.ndarray):
    if np.any(i < 0) or np.any(i > params.d):
        raise DomainError(f"i must lie in 0..{params.d}")
    return i / params.d * (params.epsilon * t + 1.0)


def delta_discrete_matrix(params: DeterministicParams, t, i):
    """Delta(t, i/d) through the semigroup ``exp(d^2 t A)`` applied to ``h / d^2``."""
    t = _check_time(t)
    i = np.asarray(i)
    linear = _boundary_rows(params, t, i)
    d = params.d
    basis = SpectralBasis(d)
    h = h_discrete(d, np.arange(1, d)) / d**2
    tb, ib = np.broadcast_arrays(t, i)
    out = np.array(linear, dtype=float, copy=True)
    flat_t, flat_i, flat_out = tb.ravel(), ib.ravel(), out.reshape(-1)
    for n, (tt, ii) in enumerate(zip(flat_t, flat_i)):
        if 0 < ii < d:
            relaxed = basis.propagator(tt) @ h
            flat_out[n] += params.epsilon * (h[ii - 1] - relaxed[ii - 1])
    return out if out.ndim else float(out)


def delta_discrete_spectral(params: DeterministicParams, t, i):
    """Delta(t, i/d) from precomputed projections of ``h`` on the sine modes."""
    t = _check_time(t)
    i = np.asarray(i)
    linear = _boundary_rows(params, t, i)
    d = params.d
    basis = SpectralBasis(d)
    proj = _h_projection(d)
    tb, ib = np.broadcast_arrays(t, i)
    interior = (ib > 0) & (ib < d)
    safe_i = np.where(interior, ib, 1)
    decay = np.exp(d**2 * tb[..., None] * basis.eigenvalues)
    f_i = np.sin(np.arange(1, d) * safe_i[..., None] * np.pi / d)
    relaxed = np.sum(proj * decay * f_i, axis=-1)
    h_i = safe_i * (safe_i**2 - d * d) / (6.0 * d) / d**2
    out = linear + np.where(interior, params.epsilon * (h_i - relaxed), 0.0)
    return out if out.ndim else float(out)


def delta_profile(params: DeterministicParams, times) -> np.ndarray:
    """Delta at all sites ``i = 0..d`` for each time; shape ``(len(times), d + 1)``."""
    times = _check_time(np.atleast_1d(times))
    d = params.d
    basis = SpectralBasis(d)
    proj = _h_projection(d)
    decay = np.exp(d**2 * np.outer(times, basis.eigenvalues))
    relaxed = (decay * proj) @ basis.modes
    h = h_discrete(d, np.arange(1, d)) / d**2
    out = np.outer(times * params.epsilon + 1.0, np.arange(d + 1) / d)
    out[:, 1:-1] += params.epsilon * (h - relaxed)
    return out


def d_continuum(t, v, epsilon: float = 1.0, K: int = DEFAULT_TRUNCATION):
    """Continuum profile D(t, v), series truncated after K modes.

    ``t`` and ``v`` broadcast against each other. The truncation error is at
    most ``truncation_bound(epsilon, K)`` uniformly in (t, v).
    """
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    if K < 1:
        raise DomainError("K must be >= 1")
    t = _check_time(t)
    v = np.asarray(v, dtype=float)
    h = h_continuum(v)
    tb, vb = np.broadcast_arrays(t, v)
    k = np.arange(1, K + 1)
    series = np.zeros(tb.shape)
    # chunk over modes to bound memory on large (t, v) meshes
    for start in range(0, K, 64):
        kk = k[start:start + 64]
        coeff = fourier_coeff(kk) * np.exp(-(np.pi * kk) ** 2 * tb[..., None])
        series += np.sum(coeff * np.sqrt(2.0) * np.sin(np.pi * kk * vb[..., None]), axis=-1)
    out = vb * (1.0 + epsilon * tb) + epsilon * (np.broadcast_to(h, tb.shape) - series)
    # sin(k pi) is not exactly zero in floating point
    out = np.where(vb == 0.0, 0.0, out)
    out = np.where(vb == 1.0, 1.0 + epsilon * tb, out)
    return out if out.ndim else float(out)


def d_continuum_grid(times, v, epsilon: float = 1.0, K: int = DEFAULT_TRUNCATION) -> np.ndarray:
    """D on the tensor grid ``times x v``; shape ``(len(times), len(v))``."""
    times = _check_time(np.atleast_1d(times))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    k = np.arange(1, K + 1)
    coeff = fourier_coeff(k) * np.exp(-np.outer(times, (np.pi * k) ** 2))
    modes = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, v))
    out = np.outer(1.0 + epsilon * times, v) + epsilon * (h_continuum(v) - coeff @ modes)
    out[:, v == 0.0] = 0.0
    out[:, v == 1.0] = (1.0 + epsilon * times)[:, None]
    return out
