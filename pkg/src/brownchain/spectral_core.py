"""Closed-form eigensystem of the Dirichlet second-difference matrix.

For ``d`` intervals the chain has ``d - 1`` interior sites and the interaction
matrix ``A`` is tridiagonal with ``-2`` on the diagonal and ``1`` off it.
Its eigenpairs are discrete sine modes:

    lambda_k = -2 (1 - cos(k pi / d)),    f_k^m = sin(k m pi / d)

and ``Q[j, k] = sqrt(2/d) f_k^j`` is symmetric and orthogonal, so ``Q`` is its
own inverse. ``Q.T @ x`` coincides with the orthonormal type-I DST, which is
used as the fast path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import DomainError, GridMismatchError

# cos(u) <= 1 - c u**2 on [-pi, pi]; equality at u = pi.
SHARP_COS_CONSTANT = 2.0 / np.pi**2


def _check_d(d: int) -> None:
    if int(d) != d or d < 2:
        raise DomainError(f"d must be an integer >= 2, got {d!r}")


def _check_index(name: str, value, d: int) -> None:
    arr = np.asarray(value)
    if np.any(arr < 1) or np.any(arr > d - 1):
        raise DomainError(f"{name} must lie in 1..{d - 1} for d={d}, got {value!r}")


def eigenvalue(d: int, k):
    """Eigenvalue ``lambda_k`` of the ``(d-1) x (d-1)`` Dirichlet Laplacian."""
    _check_d(d)
    _check_index("k", k, d)
    return -2.0 * (1.0 - np.cos(np.asarray(k) * np.pi / d))


def eigenvalues(d: int) -> np.ndarray:
    _check_d(d)
    return eigenvalue(d, np.arange(1, d))


def eigenvector_component(d: int, k, m):
    """Component ``m`` of the (unnormalised) eigenvector ``f_k``."""
    _check_d(d)
    _check_index("k", k, d)
    _check_index("m", m, d)
    return np.sin(np.asarray(k) * np.asarray(m) * np.pi / d)


def laplacian_matrix(d: int) -> np.ndarray:
    """Dense tridiagonal matrix ``A``; meant for oracles and small ``d``."""
    _check_d(d)
    n = d - 1
    a = -2.0 * np.eye(n)
    idx = np.arange(n - 1)
    a[idx, idx + 1] = 1.0
    a[idx + 1, idx] = 1.0
    return a


def apply_laplacian(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Apply ``A`` along ``axis`` with zero Dirichlet data at both ends, in O(d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[axis] < 1:
        raise GridMismatchError("apply_laplacian needs a vector of length >= 1")
    x = np.moveaxis(x, axis, -1)
    y = -2.0 * x
    y[..., 1:] += x[..., :-1]
    y[..., :-1] += x[..., 1:]
    return np.moveaxis(y, -1, axis)


def continuum_eigenfunction(k, v):
    """``psi_k(v) = sqrt(2) sin(pi k v)``, the Dirichlet eigenfunctions on [0, 1]."""
    return np.sqrt(2.0) * np.sin(np.pi * np.asarray(k) * np.asarray(v))


def continuum_rate(k):
    """``theta_k = pi^2 k^2``."""
    return np.pi**2 * np.asarray(k, dtype=float) ** 2


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvalues, sine modes and orthonormal transform for a fixed ``d``.

    ``modes[k-1, m-1] = f_k^m`` and ``Q = sqrt(2/d) * modes``; the mode matrix
    is symmetric, so ``Q`` serves both directions.
    """

    d: int
    eigenvalues: np.ndarray = field(init=False, repr=False)
    modes: np.ndarray = field(init=False, repr=False)
    Q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_d(self.d)
        k = np.arange(1, self.d)
        lam = -2.0 * (1.0 - np.cos(k * np.pi / self.d))
        modes = np.sin(np.outer(k, k) * np.pi / self.d)
        q = np.sqrt(2.0 / self.d) * modes
        for arr in (lam, modes, q):
            arr.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "Q", q)

    @property
    def size(self) -> int:
        return self.d - 1

    @property
    def rates(self) -> np.ndarray:
        """Decay rates ``-d^2 lambda_k`` of the rescaled chain, all positive."""
        return -(self.d**2) * self.eigenvalues

    def _check(self, x: np.ndarray, axis: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[axis] != self.size:
            raise GridMismatchError(
                f"expected length {self.size} along axis {axis}, got shape {x.shape}"
            )
        return x

    def forward(self, x, axis: int = -1, fast: bool = False) -> np.ndarray:
        """Spectral coordinates ``Q.T @ x`` along ``axis``."""
        x = self._check(x, axis)
        if fast:
            return scipy.fft.dst(x, type=1, norm="ortho", axis=axis)
        return np.moveaxis(np.tensordot(x, self.Q, axes=([axis], [0])), -1, axis)

    def inverse(self, c, axis: int = -1, fast: bool = False) -> np.ndarray:
        """Site values ``Q @ c`` along ``axis``."""
        c = self._check(c, axis)
        if fast:
            return scipy.fft.idst(c, type=1, norm="ortho", axis=axis)
        return np.moveaxis(np.tensordot(c, self.Q, axes=([axis], [1])), -1, axis)

    def propagator(self, tau: float) -> np.ndarray:
        """Dense ``exp(d^2 tau A) = Q diag(exp(d^2 tau lambda)) Q.T``."""
        if tau < 0:
            raise DomainError(f"tau must be >= 0, got {tau}")
        decay = np.exp(self.d**2 * tau * self.eigenvalues)
        return (self.Q * decay) @ self.Q.T


def transform_forward(x, fast: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return SpectralBasis(x.shape[-1] + 1).forward(x, fast=fast)


def transform_inverse(c, fast: bool = False) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return SpectralBasis(c.shape[-1] + 1).inverse(c, fast=fast)
