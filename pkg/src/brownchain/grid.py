"""Space-time evaluation lattice ``t_j = jT/d``, ``v_i = i/d`` with an optional refinement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FieldGrid:
    """Lattice of ``d + 1`` time nodes on [0, T] and ``d + 1`` space nodes on [0, 1].

    ``refine`` inserts ``refine - 1`` extra points between consecutive nodes in
    both axes, giving the dense sub-grid on which off-node values are probed.
    Rounding maps send a point to the node at the left end of its cell, which
    keeps them idempotent on nodes and matches ``Sigma_d(t, v) = Sigma(t, floor(dv)/d)``.
    """

    T: float
    d: int
    refine: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d}")
        if int(self.refine) != self.refine or self.refine < 1:
            raise DomainError(f"refine must be a positive integer, got {self.refine}")

    @property
    def t_nodes(self) -> np.ndarray:
        return self.T * np.arange(self.d + 1) / self.d

    @property
    def v_nodes(self) -> np.ndarray:
        return np.arange(self.d + 1) / self.d

    @property
    def n_points(self) -> int:
        return self.d * self.refine + 1

    @property
    def times(self) -> np.ndarray:
        n = self.d * self.refine
        return self.T * np.arange(n + 1) / n

    @property
    def v(self) -> np.ndarray:
        n = self.d * self.refine
        return np.arange(n + 1) / n

    @property
    def node_index(self) -> np.ndarray:
        """Positions of the nodes inside the dense axis."""
        return np.arange(self.d + 1) * self.refine

    @property
    def t_hat_index(self) -> np.ndarray:
        """Dense index of ``t_hat(t)`` for each dense time ``t``."""
        return (np.arange(self.n_points) // self.refine) * self.refine

    @property
    def v_hat_index(self) -> np.ndarray:
        return (np.arange(self.n_points) // self.refine) * self.refine

    def t_hat(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T):
            raise DomainError("t outside [0, T]")
        j = np.minimum(np.floor(t * self.d / self.T + 1e-12), self.d)
        return j * self.T / self.d

    def v_hat(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < 0) or np.any(v > 1):
            raise DomainError("v outside [0, 1]")
        return np.minimum(np.floor(v * self.d + 1e-12), self.d) / self.d

    def same_as(self, other: "FieldGrid") -> bool:
        return (self.T, self.d, self.refine) == (other.T, other.d, other.refine)
