"""Backward projection of RF-stage symbols through the PA onto the complex plane.

For every target ``w`` we solve ``min_u |w - f_RF(u)|^2 + theta |u|^2``. Fixing
``|u| = a``, the phase ``arg(u) = arg(w) - f_Phi(a)`` aligns ``f_RF(u)`` with ``w``
and the regularizer ignores the phase, so only the 1-D amplitude problem

    J(a) = (|w| - f_A(a))^2 + theta * a^2

remains. ``J`` can have a local minimum on each side of the PA peak, so a grid
scan precedes golden-section refinement of every local minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rfprecode.rf import RfModel

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ProjectionConfig:
    theta: float = 0.05
    grid_points: int = 1024
    refine_tol: float = 1e-10
    a_max: float | None = None

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("theta must be non-negative")
        if self.grid_points < 64:
            raise ValueError("grid_points must be >= 64")


def amplitude_objective(a, target: float, theta: float, rf: RfModel):
    """``(target - f_A(a))^2 + theta a^2``; equals the full objective at the phase-aligned input."""
    return (target - rf.amp_conv(a)) ** 2 + theta * np.asarray(a, float) ** 2


def _golden(f, lo: float, hi: float) -> tuple[float, float]:
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if hi - lo <= 4e-16 * max(1.0, abs(hi)):
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _scan_scale(target: float, rf: RfModel) -> float:
    if rf.saleh.beta_a > 0:
        return rf.saturation_peak()[0]
    return 2.0 * target / rf.saleh.alpha_a


def best_amplitude(target: float, rf: RfModel, cfg: ProjectionConfig) -> float:
    """Global minimizer of ``J`` on ``[0, a_max]``; the smallest one among near-ties."""
    if target <= 0.0:
        return 0.0
    theta = cfg.theta
    base = _scan_scale(target, rf)

    def scan(a_max):
        grid = np.linspace(0.0, a_max, cfg.grid_points)
        return grid, amplitude_objective(grid, target, theta, rf)

    if cfg.a_max is not None:
        a_max = cfg.a_max
        grid, J = scan(a_max)
    elif theta > 0:
        a_max = 4.0 * base
        grid, J = scan(a_max)
        while theta * a_max**2 <= J.min():
            a_max *= 2.0
            grid, J = scan(a_max)
    else:
        grid, J = scan(16.0 * base)

    n = len(grid)
    left = np.r_[np.inf, J[:-1]]
    right = np.r_[J[1:], np.inf]
    minima = np.flatnonzero((J <= left) & (J <= right))

    aa, ba = rf.saleh.alpha_a, rf.saleh.beta_a

    def f(a):
        return (target - aa * a / (1.0 + ba * a * a)) ** 2 + theta * a * a

    candidates = []
    for i in minima:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
        a, val = _golden(f, lo, hi)
        if f(grid[i]) < val:
            a, val = grid[i], f(grid[i])
        candidates.append((val, a))
    best = min(val for val, _ in candidates)
    return min(a for val, a in candidates if val <= best + cfg.refine_tol)


def project_symbol(w: complex, rf: RfModel, cfg: ProjectionConfig | None = None) -> complex:
    """Pre-PA symbol ``x`` that minimizes ``|w - f_RF(x)|^2 + theta |x|^2``."""
    cfg = cfg or ProjectionConfig()
    w = complex(w)
    if w == 0:
        return 0j
    a = best_amplitude(abs(w), rf, cfg)
    if a == 0.0:
        return 0j
    phase = math.atan2(w.imag, w.real) - float(rf.phase_conv(a))
    return a * complex(math.cos(phase), math.sin(phase))


def project_signal(w, rf: RfModel, cfg: ProjectionConfig | None = None) -> np.ndarray:
    """Entry-wise :func:`project_symbol` over a vector of RF-stage symbols."""
    cfg = cfg or ProjectionConfig()
    w = np.atleast_1d(np.asarray(w, complex))
    return np.array([project_symbol(wm, rf, cfg) for wm in w], dtype=complex)
