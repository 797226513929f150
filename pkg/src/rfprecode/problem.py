from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class GlseProblem:
    """Disc-constrained regularized least-squares precoding problem.

    Minimize ``||H^T v - sqrt(rho) s||^2 + lam ||v||^2`` over ``|v_m|^2 <= p_out``.

    Attributes:
        H: (M, K) complex uplink channel, column k belongs to user k.
        s: (K,) complex data symbols.
        rho: scaling factor applied to the data as ``sqrt(rho)``.
        lam: penalty weight of the average-power term.
        p_out: squared radius of the per-antenna disc; ``math.inf`` disables it.
    """

    H: np.ndarray
    s: np.ndarray
    rho: float = 1.0
    lam: float = 0.1
    p_out: float = 1.0

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        self.s = np.atleast_1d(np.asarray(self.s, dtype=complex))
        M, K = self.H.shape
        if M < 1 or K < 1:
            raise ValueError("H must have at least one row and one column")
        if self.s.shape != (K,):
            raise ValueError(f"s has shape {self.s.shape}, expected ({K},)")
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.s))):
            raise ValueError("H and s must be finite")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if not self.p_out > 0:
            raise ValueError("p_out must be positive")

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]

    @property
    def target(self) -> np.ndarray:
        return math.sqrt(self.rho) * self.s

    def with_lambda(self, lam: float) -> GlseProblem:
        return GlseProblem(self.H, self.s, self.rho, lam, self.p_out)


def project_disc(v: np.ndarray, p_out: float) -> np.ndarray:
    """Radially project each complex entry onto ``|v_m| <= sqrt(p_out)``."""
    if math.isinf(p_out):
        return v
    r = np.abs(v)
    radius = math.sqrt(p_out)
    scale = np.where(r > radius, radius / np.where(r > 0, r, 1.0), 1.0)
    return v * scale
