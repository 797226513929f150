"""Distortion metrics, PAPR, the RZF baseline and the PAPR-targeting tuners."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from rfprecode.problem import GlseProblem
from rfprecode.projection import ProjectionConfig, project_signal
from rfprecode.rf import RfModel

_GOLDEN_ITERS = 40
_BISECT_ITERS = 60
_CLIP_FRACTION = 0.999


def to_db(x):
    return 10.0 * np.log10(x)


def rss(H, v, s, rho: float) -> float:
    """Residual sum of squares ``||H^T v - sqrt(rho) s||^2``."""
    r = np.asarray(H).T @ np.asarray(v) - math.sqrt(rho) * np.asarray(s)
    return float(np.vdot(r, r).real)


def avg_distortion(H, v, s, rho: float) -> float:
    """Per-user average RSS (linear). Use :func:`to_db` for the dB value."""
    return rss(H, v, s, rho) / np.asarray(H).shape[1]


def papr(w) -> float:
    """Peak-to-average power ratio (linear) of a spatial signal."""
    p = np.abs(np.asarray(w)) ** 2
    mean = p.mean()
    if mean == 0.0:
        raise ValueError("PAPR undefined for an all-zero signal")
    return float(p.max() / mean)


def papr_db(w) -> float:
    return float(to_db(papr(w)))


@dataclass
class MetricReport:
    d_predicted: float
    d_actual: float
    papr_db: float
    lambda_used: float
    feasible: bool


def evaluate_glse(w, problem: GlseProblem, rf: RfModel, proj: ProjectionConfig) -> MetricReport:
    """Score an RF-stage precoder: D from ``w`` itself, D-tilde after projection and the true PA."""
    x = project_signal(w, rf, proj)
    w_true = rf.true_output(x)
    return MetricReport(
        d_predicted=avg_distortion(problem.H, w, problem.s, problem.rho),
        d_actual=avg_distortion(problem.H, w_true, problem.s, problem.rho),
        papr_db=papr_db(w) if np.any(w) else math.nan,
        lambda_used=problem.lam,
        feasible=bool(np.all(np.abs(w) ** 2 <= problem.p_out + 1e-9)),
    )


@dataclass
class TuneResult:
    value: float
    papr_db: float
    reached: bool
    w: np.ndarray


def _golden_log(fun, lo: float, hi: float):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - inv_phi * (hi - lo), lo + inv_phi * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(_GOLDEN_ITERS):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = fun(d)
    return c if fc <= fd else d


def tune_lambda_for_papr(problem: GlseProblem, target_db: float = 5.0, tol_db: float = 0.1,
                         solve: Callable[[GlseProblem], np.ndarray] | None = None,
                         bracket: tuple[float, float] = (1e-4, 1e2),
                         scan_points: int = 13) -> TuneResult:
    """Find the penalty weight whose GLSE solution has the requested PAPR.

    PAPR is not monotone in ``lam``: it rises along the clipping branch, where the
    peak entry sits on the disc, but once no entry touches the disc it settles near
    the PAPR of the unclipped ridge solution, which may cross the target again.
    Since the distortion grows with ``lam``, the smallest crossing is wanted. The
    bracket is scanned upward on a log grid until ``PAPR - target`` changes sign,
    then bisected on ``log(lam)``. The scan ends at the first grid point whose peak
    has left the disc. Without any sign change a golden-section search on
    ``|PAPR_dB - target_db|`` around the closest scanned point is used and
    ``reached`` reports success.

    ``solve`` maps a problem to its RF-stage signal; it defaults to the AMP precoder.
    """
    if solve is None:
        from rfprecode.amp import amp_precode

        def solve(p):
            return amp_precode(p).w

    cache: dict[float, tuple[float, np.ndarray]] = {}

    def measure(log_lam):
        if log_lam not in cache:
            w = solve(problem.with_lambda(math.exp(log_lam)))
            cache[log_lam] = (papr_db(w) if np.any(w) else -math.inf, w)
        return cache[log_lam]

    def done(log_lam):
        p, w = measure(log_lam)
        return TuneResult(math.exp(log_lam), p, abs(p - target_db) <= tol_db, w)

    def clipped(log_lam):
        w = measure(log_lam)[1]
        return math.isinf(problem.p_out) or np.max(np.abs(w) ** 2) >= _CLIP_FRACTION * problem.p_out

    grid = np.linspace(math.log(bracket[0]), math.log(bracket[1]), scan_points)
    prev = None
    scanned = []
    for g in grid:
        p = measure(g)[0]
        scanned.append(g)
        if abs(p - target_db) <= tol_db:
            return done(g)
        if prev is not None and (measure(prev)[0] - target_db) * (p - target_db) < 0:
            lo, hi = prev, g
            rising = p > measure(prev)[0]
            mid = lo
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                pm = measure(mid)[0]
                if abs(pm - target_db) <= tol_db:
                    break
                if (pm < target_db) == rising:
                    lo = mid
                else:
                    hi = mid
            return done(mid)
        if not clipped(g):
            # past the clipping branch a larger lam only shrinks the signal
            break
        prev = g

    grid = np.array(scanned)
    i = int(np.argmin([abs(measure(g)[0] - target_db) for g in grid]))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best = _golden_log(lambda x: abs(measure(x)[0] - target_db), lo, hi)
    best = min([best, grid[i]], key=lambda x: abs(measure(x)[0] - target_db))
    return done(best)


def rzf_precode(H, s, delta: float, gamma: float = 1.0) -> np.ndarray:
    """Regularized zero forcing ``gamma * conj(H) (H^T conj(H) + delta I)^{-1} s``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    H = np.asarray(H, complex)
    K = H.shape[1]
    gram = H.T @ H.conj() + delta * np.eye(K)
    return gamma * (H.conj() @ np.linalg.solve(gram, np.asarray(s, complex)))


def tune_gamma_for_papr(H, s, rf: RfModel, delta: float, target_db: float = 5.0,
                        tol_db: float = 0.1, grid_points: int = 60) -> TuneResult:
    """Scale the RZF precoder so the PA output has the requested PAPR.

    The post-PA PAPR falls from its small-signal value as the gain drives entries
    into compression, then rises again once entries are pushed past the peak. A
    log-spaced scan locates the first crossing of the target on the falling
    branch, which is then refined by bisection on ``log(gamma)``. ``w`` in the
    result is the true PA output.
    """
    x1 = rzf_precode(H, s, delta, 1.0)
    amp = np.abs(x1)
    if not np.any(amp):
        raise ValueError("RZF direction is all-zero")
    a_peak = rf.saturation_peak()[0] if rf.saleh.beta_a > 0 else 1.0
    rms = math.sqrt(float(np.mean(amp**2)))
    lo = math.log(1e-3 * a_peak / amp.max())
    hi = math.log(100.0 * a_peak / rms)

    def measure(log_g):
        w = rf.true_output(math.exp(log_g) * x1)
        return papr_db(w), w

    def done(log_g):
        p, w = measure(log_g)
        return TuneResult(math.exp(log_g), p, abs(p - target_db) <= tol_db, w)

    grid = np.linspace(lo, hi, grid_points)
    values = np.array([measure(g)[0] for g in grid])
    below = np.flatnonzero(values <= target_db)
    if len(below) == 0 or below[0] == 0:
        return done(grid[int(np.argmin(np.abs(values - target_db)))])
    a, b = grid[below[0] - 1], grid[below[0]]
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        p = measure(mid)[0]
        if abs(p - target_db) <= tol_db:
            return done(mid)
        if p > target_db:
            a = mid
        else:
            b = mid
    return done(mid)
