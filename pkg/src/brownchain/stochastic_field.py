"""Coupled noise: the master Brownian family, OU spectral coordinates and the two random fields.

Every random quantity is a functional of one family of independent Brownian
motions ``B^k``. Mode ``k`` owns the random substream keyed by ``(seed, k)``,
so adding modes never changes existing ones. Two samplers are provided:

* ``BrownianDriver`` stores increments on a fine uniform grid; OU coordinates
  follow the left-endpoint recursion ``w <- exp(-a dt) (w + dB)``, which uses
  the increments exactly as the Euler scheme of the chain does.
* ``sample_coupled_modes`` draws, per mode, the exact joint Gaussian transition
  of all OU coordinates driven by the same ``B^k`` between consecutive
  evaluation times. It has no time-step bias, which matters once the rates
  ``-d^2 lambda_k`` reach ``4 d^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, GridMismatchError
from .grid import FieldGrid
from .spectral_core import SpectralBasis, continuum_rate

SQRT2 = np.sqrt(2.0)


def substream_seed(seed: int, *keys: int) -> int:
    """64-bit seed derived from ``seed`` and a tuple of integer keys."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def mode_generator(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(k)]))


# ---------------------------------------------------------------------------
# exact moments


def ou_exact_variance(a, t):
    """``Var[int_0^t exp(-a (t-u)) dB_u] = (1 - exp(-2 a t)) / (2 a)``."""
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(a <= 0):
        raise DomainError("rate a must be > 0")
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    out = -np.expm1(-2.0 * a * t) / (2.0 * a)
    return out if out.ndim else float(out)


def ou_exact_covariance(a, b, t):
    """Covariance of two OU coordinates with rates ``a`` and ``b`` driven by one Brownian motion."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)
    s = a + b
    safe = np.where(s > 0, s, 1.0)
    out = np.where(s > 0, -np.expm1(-s * t) / safe, t)
    return out if out.ndim else float(out)


def sigma_d_variance(d: int, t: float, i, sigma: float = 1.0):
    """Exact ``Var[Sigma(t, i/d)]``; mode coordinates are independent."""
    basis = SpectralBasis(d)
    phi = np.sin(np.pi * np.outer(np.atleast_1d(i), np.arange(1, d)) / d)
    out = sigma**2 * (2.0 * phi**2) @ ou_exact_variance(basis.rates, t)
    return out if np.ndim(i) else float(out[0])


def s_variance(t: float, v, K: int, sigma: float = 1.0):
    """Exact variance of the K-mode truncation of S at (t, v)."""
    k = np.arange(1, K + 1)
    phi = np.sin(np.pi * np.outer(np.atleast_1d(v), k))
    out = sigma**2 * (2.0 * phi**2) @ ou_exact_variance(continuum_rate(k), t)
    return out if np.ndim(v) else float(out[0])


def s_tail_variance_bound(K: int, sigma: float = 1.0) -> float:
    """Bound on the variance of the modes dropped beyond K: ``sigma^2 / (pi^2 K)``."""
    return sigma**2 / (np.pi**2 * K)


# ---------------------------------------------------------------------------
# fine-grid driver


@dataclass(frozen=True)
class BrownianDriver:
    """Increments of ``B^1..B^K`` on ``n_steps`` uniform steps of [0, T].

    ``increments`` has shape ``(n_modes, n_steps)``, or
    ``(n_paths, n_modes, n_steps)`` when an ensemble of paths was requested.
    """

    seed: int
    n_modes: int
    n_steps: int
    T: float
    increments: np.ndarray = field(repr=False)
    n_paths: int | None = None

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.T * np.arange(self.n_steps + 1) / self.n_steps

    def step_indices(self, times) -> np.ndarray:
        """Fine-grid indices of ``times``; every time must be a fine node."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.rint(times / self.dt).astype(int)
        if (
            np.any(idx < 0)
            or np.any(idx > self.n_steps)
            or np.any(np.abs(idx * self.dt - times) > 1e-9 * max(self.T, 1.0))
        ):
            raise GridMismatchError("evaluation times are not nodes of the driver's fine grid")
        return idx

    def coarsen(self, factor: int) -> "BrownianDriver":
        """Driver on the grid with ``factor`` times larger steps, same Brownian paths."""
        if factor < 1 or self.n_steps % factor:
            raise GridMismatchError(f"cannot coarsen {self.n_steps} steps by {factor}")
        shape = self.increments.shape[:-1] + (self.n_steps // factor, factor)
        return BrownianDriver(
            self.seed,
            self.n_modes,
            self.n_steps // factor,
            self.T,
            self.increments.reshape(shape).sum(axis=-1),
            self.n_paths,
        )

    def modes(self, count: int) -> np.ndarray:
        if count > self.n_modes:
            raise GridMismatchError(f"driver has {self.n_modes} modes, {count} required")
        return self.increments[..., :count, :]


def make_driver(seed: int, K_max: int, M: int, T: float, n_paths: int | None = None) -> BrownianDriver:
    """Seeded increments, each ``Normal(0, T / M)``; mode ``k`` reads substream ``(seed, k)``."""
    if K_max < 1 or M < 1 or not T > 0 or (n_paths is not None and n_paths < 1):
        raise DomainError("K_max, M, n_paths must be >= 1 and T > 0")
    scale = np.sqrt(T / M)
    shape = (M,) if n_paths is None else (n_paths, M)
    rows = [mode_generator(seed, k).standard_normal(shape) * scale for k in range(1, K_max + 1)]
    incr = np.stack(rows, axis=-2)
    return BrownianDriver(int(seed), K_max, M, float(T), incr, n_paths)


def evolve_ou(driver: BrownianDriver, k: int, rate: float, times) -> np.ndarray:
    """OU coordinate ``w(t) = int_0^t exp(-rate (t-u)) dB^k_u`` sampled at ``times``.

    Uses ``w <- exp(-rate dt) (w + dB)`` on the driver's fine grid; ``rate = 0``
    returns the Brownian path itself. Output has the driver's path axis (if
    any) followed by the time axis.
    """
    if not 1 <= k <= driver.n_modes:
        raise GridMismatchError(f"mode {k} not carried by driver with {driver.n_modes} modes")
    idx = driver.step_indices(times)
    return _evolve(driver.increments[..., k - 1:k, :], np.array([rate]), driver.dt)[..., idx, 0]


def _evolve(increments: np.ndarray, rates: np.ndarray, dt: float) -> np.ndarray:
    """Paths for several rates; ``increments (..., n_modes, M)`` -> ``(..., M + 1, n_modes)``."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise DomainError("rates must be >= 0")
    out = np.zeros(increments.shape[:-2] + (increments.shape[-1] + 1, increments.shape[-2]))
    for j, a in enumerate(rates):
        x = increments[..., j, :]
        if a == 0:
            out[..., 1:, j] = np.cumsum(x, axis=-1)
        else:
            c = np.exp(-a * dt)
            out[..., 1:, j] = lfilter([c], [1.0, -c], x, axis=-1)
    return out


def evolve_ou_modes(driver: BrownianDriver, rates: np.ndarray, times) -> np.ndarray:
    """Coordinates of modes ``1..len(rates)`` at ``times``; shape ``(..., n_times, n_modes)``."""
    rates = np.asarray(rates, dtype=float)
    idx = driver.step_indices(times)
    return _evolve(driver.modes(len(rates)), rates, driver.dt)[..., idx, :]


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class RandomField:
    """Field values over ``grid.times x grid.v``; an optional leading replication axis."""

    grid: FieldGrid
    values: np.ndarray = field(repr=False)
    kind: str
    tail_variance_bound: float = 0.0


def floor_sites(v, d: int) -> np.ndarray:
    """Site index ``floor(d v)`` with v on a dyadic-safe lattice."""
    v = np.asarray(v, dtype=float)
    return np.minimum(np.floor(v * d + 1e-9).astype(int), d)


def sigma_d_values(coords: np.ndarray, d: int, v, sigma: float) -> np.ndarray:
    """``Sigma_d(t, v) = sigma sum_k w_{k,d}(t) sqrt2 sin(k pi floor(dv)/d)``.

    ``coords`` holds ``w_{k,d}`` in its last axis (length ``d - 1``).
    """
    if coords.shape[-1] != d - 1:
        raise GridMismatchError(f"expected {d - 1} mode coordinates, got {coords.shape[-1]}")
    sites = floor_sites(v, d)
    phi = SQRT2 * np.sin(np.pi * np.outer(np.arange(1, d), sites) / d)
    phi[:, (sites == 0) | (sites == d)] = 0.0
    return sigma * (coords @ phi)


def s_values(coords: np.ndarray, v, sigma: float) -> np.ndarray:
    """Truncated ``S(t, v) = sigma sum_{k<=K} w_k(t) sqrt2 sin(k pi v)``."""
    v = np.asarray(v, dtype=float)
    k = np.arange(1, coords.shape[-1] + 1)
    phi = SQRT2 * np.sin(np.pi * np.outer(k, v))
    phi[:, (v == 0.0) | (v == 1.0)] = 0.0
    return sigma * (coords @ phi)


def sigma_d_field(driver: BrownianDriver, basis: SpectralBasis, sigma: float, grid: FieldGrid) -> RandomField:
    """Discrete homogeneous field on ``grid`` from the driver's first ``d - 1`` modes."""
    coords = evolve_ou_modes(driver, basis.rates, grid.times)
    return RandomField(grid, sigma_d_values(coords, basis.d, grid.v, sigma), "Sigma_d")


def s_field(driver: BrownianDriver, K: int, sigma: float, grid: FieldGrid) -> RandomField:
    """Continuum field truncated after K modes, with the variance bound of the dropped tail."""
    coords = evolve_ou_modes(driver, continuum_rate(np.arange(1, K + 1)), grid.times)
    return RandomField(grid, s_values(coords, grid.v, sigma), "S_truncated", s_tail_variance_bound(K, sigma))


def coupled_chain_noise(driver: BrownianDriver, basis: SpectralBasis) -> np.ndarray:
    """Increments of the site Brownian motions ``B^{i,d} = Q (B^1..B^{d-1})``.

    Shape ``(..., d - 1, n_steps)``; rows are again independent with variance ``dt``.
    """
    return basis.inverse(driver.modes(basis.size), axis=-2)


# ---------------------------------------------------------------------------
# exact coupled sampler


def _psd_cholesky(cov: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """Lower-triangular factor of a batch of PSD matrices, zeroing degenerate pivots."""
    m = cov.shape[-1]
    low = np.zeros_like(cov)
    for j in range(m):
        s = cov[..., j, j] - np.sum(low[..., j, :j] ** 2, axis=-1)
        ok = s > rtol * cov[..., j, j]
        piv = np.sqrt(np.where(ok, s, 0.0))
        low[..., j, j] = piv
        safe = np.where(ok, piv, 1.0)
        for i in range(j + 1, m):
            r = cov[..., i, j] - np.sum(low[..., i, :j] * low[..., j, :j], axis=-1)
            low[..., i, j] = np.where(ok, r / safe, 0.0)
    return low


@dataclass(frozen=True)
class CoupledModes:
    """OU coordinates of one Brownian family at ``times``.

    ``s`` has shape ``(..., n_times, K)`` with rates ``pi^2 k^2``; ``sigma[d]`` has
    shape ``(..., n_times, d - 1)`` with rates ``-d^2 lambda_k``. All share the
    same ``B^k``.
    """

    times: np.ndarray
    s: np.ndarray
    sigma: dict


def sample_coupled_modes(
    seed: int, times, K: int, d_list: Sequence[int], n_paths: int | None = None
) -> CoupledModes:
    """Exact joint sample of ``w_k`` (k <= K) and ``w_{k,d}`` (k < d) at ``times``.

    For each mode the coordinates driven by ``B^k`` form a Gaussian Markov
    vector; between consecutive times it is advanced by its exact transition
    ``w <- exp(-a dt) w + Z`` with ``Cov(Z_a, Z_b) = (1 - exp(-(a+b) dt)) / (a+b)``.
    The continuum coordinate is factored first, so it does not depend on
    ``d_list``. With ``n_paths`` every output gains a leading path axis, all
    paths drawn from the same per-mode substreams.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise DomainError("times must be strictly increasing and non-negative")
    d_list = sorted(int(d) for d in d_list)
    if any(d < 2 for d in d_list):
        raise DomainError("every d must be >= 2")
    if K < max(d_list, default=2) - 1:
        raise DomainError("K must cover every discrete mode")
    steps = np.diff(np.concatenate([[0.0], times]))
    keep_first = times[0] > 0
    if not keep_first:
        steps = steps[1:]
    n_steps = len(steps)
    step_keys, step_of = np.unique(np.round(steps, 15), return_inverse=True)

    rates_by_d = {d: SpectralBasis(d).rates for d in d_list}
    lead = () if n_paths is None else (n_paths,)
    s_out = np.zeros(lead + (len(times), K))
    sig_out = {d: np.zeros(lead + (len(times), d - 1)) for d in d_list}
    # group modes by the set of discrete representations they belong to
    bounds = sorted({1, K + 1, *(d for d in d_list if d <= K)})
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        ks = np.arange(lo, hi)
        members = [d for d in d_list if d > lo]
        m = 1 + len(members)
        rates = np.empty((len(ks), m))
        rates[:, 0] = continuum_rate(ks)
        for j, d in enumerate(members, start=1):
            rates[:, j] = rates_by_d[d][ks - 1]
        factors = []
        decays = []
        for dt in step_keys:
            cov = ou_exact_covariance(rates[:, :, None], rates[:, None, :], dt)
            factors.append(_psd_cholesky(cov))
            decays.append(np.exp(-rates * dt))
        noise = np.stack(
            [mode_generator(seed, k).standard_normal(lead + (m, n_steps)) for k in ks], axis=-3
        )
        w = np.zeros(lead + (len(ks), m))
        path = np.zeros(lead + (len(times), len(ks), m))
        row = 0
        if not keep_first:
            row = 1
        for n in range(n_steps):
            u = step_of[n]
            w = decays[u] * w + np.einsum("kij,...kj->...ki", factors[u], noise[..., n])
            path[..., row, :, :] = w
            row += 1
        s_out[..., lo - 1:hi - 1] = path[..., 0]
        for j, d in enumerate(members, start=1):
            sig_out[d][..., lo - 1:hi - 1] = path[..., j]
    return CoupledModes(times, s_out, sig_out)


def difference_variance(d: int, t: float, v: float, K: int, sigma: float = 1.0) -> float:
    """Exact ``Var[Sigma_d(t, v) - S_K(t, v)]`` under the shared-noise coupling."""
    if K < d - 1:
        raise DomainError("K must be >= d - 1")
    k = np.arange(1, K + 1)
    a_s = continuum_rate(k)
    phi_s = np.sin(np.pi * k * v)
    total = 2.0 * phi_s**2 * ou_exact_covariance(a_s, a_s, t)
    kd = k[: d - 1]
    a_d = SpectralBasis(d).rates
    site = floor_sites(v, d)
    phi_d = np.sin(np.pi * kd * site / d) if 0 < site < d else np.zeros(d - 1)
    total[: d - 1] += 2.0 * (
        phi_d**2 * ou_exact_covariance(a_d, a_d, t)
        - 2.0 * phi_d * phi_s[: d - 1] * ou_exact_covariance(a_d, a_s[: d - 1], t)
    )
    return float(sigma**2 * total.sum())
