"""Euler-Maruyama integration of the rescaled chain, independent of the spectral formulas.

    dXi_i = d^2 (Xi_{i+1} - 2 Xi_i + Xi_{i-1}) dt + sqrt(d) sigma dB^{i,d},   i = 1..d-1

The pulled system starts from i/d with boundary values (0, 1 + eps t); the
homogeneous system starts from zero with zero boundary values. Site noise is
the rotation ``Q`` of the driver's mode increments, so the oracle and the
spectral fields see the same Brownian paths.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StabilityError
from .spectral_core import SpectralBasis, apply_laplacian
from .stochastic_field import BrownianDriver, coupled_chain_noise

SYSTEMS = ("pulled", "homogeneous")


@dataclass(frozen=True)
class ChainConfig:
    d: int
    sigma: float = 0.0
    epsilon: float = 0.0
    system: str = "pulled"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d}")
        if self.sigma < 0 or self.epsilon < 0:
            raise DomainError("sigma and epsilon must be >= 0")
        if self.system not in SYSTEMS:
            raise DomainError(f"system must be one of {SYSTEMS}, got {self.system!r}")

    def right_boundary(self, t):
        if self.system == "homogeneous":
            return np.zeros_like(np.asarray(t, dtype=float))
        return 1.0 + self.epsilon * np.asarray(t, dtype=float)

    def initial_positions(self) -> np.ndarray:
        if self.system == "homogeneous":
            return np.zeros(self.d + 1)
        return np.arange(self.d + 1) / self.d


@dataclass(frozen=True)
class ChainState:
    """Positions at sites ``0..d`` (boundaries included) at time ``t``."""

    d: int
    positions: np.ndarray
    t: float


def max_stable_step(d: int) -> float:
    """The drift matrix ``d^2 A`` has spectral radius below ``4 d^2``; explicit Euler needs ``dt rho < 2``."""
    return 1.0 / (2.0 * d * d)


def default_step(d: int) -> float:
    return 1.0 / (8.0 * d * d)


def check_stability(d: int, dt: float) -> None:
    if not 0 < dt < max_stable_step(d):
        raise StabilityError(
            f"Euler step dt={dt:.3e} violates the stability gate dt < 1/(2 d^2) = "
            f"{max_stable_step(d):.3e} for d={d}"
        )


def _drift(interior: np.ndarray, right: np.ndarray, d: int) -> np.ndarray:
    lap = apply_laplacian(interior)
    lap[..., -1] += right
    return d * d * lap


def euler_step(state: ChainState, noise, dt: float, config: ChainConfig) -> ChainState:
    """One step ``Xi <- Xi + d^2 (A Xi + boundary) dt + noise``.

    ``noise`` is the already scaled site increment ``sqrt(d) sigma dB^{i,d}``
    (length ``d - 1``); boundary entries are overwritten exactly.
    """
    check_stability(state.d, dt)
    pos = np.asarray(state.positions, dtype=float)
    interior = pos[..., 1:-1]
    right = pos[..., -1]
    new = np.empty_like(pos)
    new[..., 1:-1] = interior + _drift(interior, right, state.d) * dt + noise
    t = state.t + dt
    new[..., 0] = 0.0
    new[..., -1] = config.right_boundary(t)
    return ChainState(state.d, new, t)


def integrate(config: ChainConfig, driver: BrownianDriver, times) -> np.ndarray:
    """Euler trajectory at ``times`` (fine-grid nodes); shape ``(..., len(times), d + 1)``.

    The step is the driver's ``dt``, which must pass the stability gate.
    """
    d = config.d
    dt = driver.dt
    check_stability(d, dt)
    idx = driver.step_indices(times)
    basis = SpectralBasis(d)
    scale = np.sqrt(d) * config.sigma
    noise = scale * coupled_chain_noise(driver, basis)
    lead = noise.shape[:-2]

    interior = np.broadcast_to(config.initial_positions()[1:-1], lead + (d - 1,)).copy()
    out = np.empty(lead + (len(idx), d + 1))
    want = {int(n): j for j, n in enumerate(idx)}
    grid_t = driver.times

    def record(n, interior):
        for j in (j for j, m in enumerate(idx) if m == n):
            out[..., j, 0] = 0.0
            out[..., j, 1:-1] = interior
            out[..., j, -1] = config.right_boundary(grid_t[n])

    last = int(idx.max())
    if 0 in want:
        record(0, interior)
    for n in range(last):
        right = config.right_boundary(grid_t[n])
        interior = interior + _drift(interior, right, d) * dt + noise[..., n]
        if n + 1 in want:
            record(n + 1, interior)
    return out


def integrate_deterministic(config: ChainConfig, dt: float, times) -> np.ndarray:
    """Noise-free Euler trajectory with step ``dt``; ``times`` must be multiples of ``dt``."""
    d = config.d
    check_stability(d, dt)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    idx = np.rint(times / dt).astype(int)
    if np.any(np.abs(idx * dt - times) > 1e-9 * max(1.0, times.max(initial=1.0))):
        raise DomainError("times must be multiples of dt")
    interior = config.initial_positions()[1:-1].copy()
    out = np.empty((len(idx), d + 1))
    schedule = {}
    for j, n in enumerate(idx):
        schedule.setdefault(int(n), []).append(j)
    for n in range(int(idx.max()) + 1):
        right = config.right_boundary(n * dt)
        for j in schedule.get(n, ()):
            out[j, 1:-1] = interior
            out[j, 0] = 0.0
            out[j, -1] = right
        interior = interior + _drift(interior, right, d) * dt
    return out
