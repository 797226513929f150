"""AMP (max-sum GAMP) iteration for the disc-constrained GLSE precoder.

Every complex quantity is handled in its augmented real form, so the per-antenna
and per-user "variances" are 2x2 SPD matrices. ``Q[m, k]`` denotes the 2x2 real
block of channel entry ``H[m, k]`` (see :func:`rfprecode.augmented.channel_block`);
sums of such blocks are evaluated through complex matrix products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rfprecode.augmented import (
    augment,
    check_spd,
    clamp_spd,
    de_augment,
    inv2,
    is_spd,
    matvec,
    symmetrize,
)
from rfprecode.problem import GlseProblem, project_disc
from rfprecode.solver import objective

_EYE = np.eye(2)
# Prior covariance used in place of inv(2 * lam * I) when lam == 0.
_FLAT_PRIOR = 100.0
_DIVERGENCE_FACTOR = 1e6
_BISECT_ITERS = 64


@dataclass(frozen=True)
class AmpOptions:
    max_iters: int = 100
    damping: float = 0.7
    stop_tol: float = 1e-8
    jitter: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class AmpState:
    """Iterate of the AMP recursion at iteration ``t`` (1-based)."""

    w: np.ndarray  # (M, 2)
    Rw: np.ndarray  # (M, 2, 2)
    y: np.ndarray  # (K, 2)
    Ry: np.ndarray  # (K, 2, 2)
    v: np.ndarray  # (K, 2)
    Rv: np.ndarray  # (K, 2, 2)
    t: int = 1

    @classmethod
    def initial(cls, problem: GlseProblem) -> AmpState:
        """State at t = 1: w = 0 (minimizer of the penalty) and Rw = inverse penalty Hessian."""
        M, K = problem.M, problem.K
        prior = 1.0 / (2.0 * problem.lam) if problem.lam > 0 else _FLAT_PRIOR
        return cls(
            w=np.zeros((M, 2)),
            Rw=np.broadcast_to(prior * _EYE, (M, 2, 2)).copy(),
            y=np.zeros((K, 2)),
            Ry=np.broadcast_to(_EYE, (K, 2, 2)).copy(),
            v=np.zeros((K, 2)),
            Rv=np.broadcast_to(_EYE, (K, 2, 2)).copy(),
        )

    def w_complex(self) -> np.ndarray:
        return np.atleast_1d(de_augment(self.w))


@dataclass
class AmpResult:
    w: np.ndarray
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    diverged: bool = False
    converged: bool = False


# ----------------------------------------------------------------------------
# thresholders

def _g_out(v, s, R, rho):
    # R^{-1}(z* - v) with z* = (R^{-1} + 2I)^{-1}(R^{-1} v + 2 sqrt(rho) s),
    # which simplifies to 2 (I + 2R)^{-1} (sqrt(rho) s - v).
    return 2.0 * matvec(inv2(_EYE + 2.0 * R), math.sqrt(rho) * s - v)


def _g_out_jac(R):
    return symmetrize(2.0 * inv2(_EYE + 2.0 * R))


def g_out(v, s, R, rho: float) -> np.ndarray:
    """Output thresholder: ``R^{-1}(z* - v)`` where ``z*`` minimizes
    ``q(z - v, R) + ||z - sqrt(rho) s||^2``.

    The sign makes ``-d g_out / dv`` positive-definite.
    """
    R = check_spd(R)
    return _g_out(np.asarray(v, float), np.asarray(s, float), R, rho)


def g_out_jacobian(v, s, R, rho: float) -> np.ndarray:
    """Return ``-d g_out / dv = 2 (I + 2R)^{-1}``, independent of ``v`` and ``s``."""
    R = check_spd(R)
    shape = np.broadcast_shapes(np.shape(v)[:-1], np.shape(s)[:-1], R.shape[:-2])
    return np.broadcast_to(_g_out_jac(R), shape + (2, 2)).copy()


def _g_in(u, R, lam, p_out):
    u = np.asarray(u, float)
    R = np.broadcast_to(R, u.shape[:-1] + (2, 2))
    w = matvec(inv2(_EYE + 2.0 * lam * R), u)
    if math.isinf(p_out):
        return w, np.zeros(u.shape[:-1], bool)
    radius = math.sqrt(p_out)
    active = np.einsum("...i,...i->...", w, w) > p_out
    if not np.any(active):
        return w, active

    ua, Ra = u[active], symmetrize(R[active])
    # eigen-coordinates of R: ||w(c)||^2 = sum_i coef_i^2 / (1 + 2 c r_i)^2, c = lam + mu
    r, V = np.linalg.eigh(Ra)
    r = np.maximum(r, 1e-300)
    coef = np.einsum("nji,nj->ni", V, ua)
    c0, c1, r0, r1 = coef[:, 0] ** 2, coef[:, 1] ** 2, r[:, 0], r[:, 1]

    def phi(c):
        # 1/sqrt(p_out) - 1/||w(c)||: decreasing in c, zero at the boundary multiplier
        d0, d1 = 1.0 + 2.0 * c * r0, 1.0 + 2.0 * c * r1
        S = c0 / d0**2 + c1 / d1**2
        dS = -4.0 * (c0 * r0 / d0**3 + c1 * r1 / d1**3)
        return 1.0 / radius - S**-0.5, 0.5 * S**-1.5 * dS

    # ||u|| / (1 + 2c r_max) <= ||w(c)|| <= ||u|| / (1 + 2c r_min) brackets the root
    excess = np.linalg.norm(ua, axis=-1) / radius - 1.0
    lo = np.maximum(lam, 0.5 * excess / r1)
    hi = 0.5 * excess / r0 * (1.0 + 1e-12) + 1e-300
    lo = np.minimum(lo, hi)
    if np.any(phi(hi)[0] > 0):
        raise RuntimeError("g_in bisection failed to bracket the boundary multiplier")
    # bisection safeguarded Newton: Newton steps are kept only inside the bracket
    c = lo.copy()
    for _ in range(_BISECT_ITERS):
        f, df = phi(c)
        lo = np.where(f > 0, c, lo)
        hi = np.where(f > 0, hi, c)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = c - f / df
        ok = (newton > lo) & (newton < hi)
        c_next = np.where(ok, newton, 0.5 * (lo + hi))
        settled = (np.abs(f) <= 1e-14 / radius) | (np.abs(c_next - c) <= 1e-15 * c)
        c = np.where(settled, c, c_next)
        if np.all(settled):
            break
    hi = c
    wb = matvec(inv2(_EYE + 2.0 * hi[:, None, None] * Ra), ua)
    wb *= (radius / np.maximum(np.linalg.norm(wb, axis=-1), 1e-300))[:, None]
    w = w.copy()
    w[active] = wb
    return w, active


def g_in(u, R, lam: float, p_out: float) -> np.ndarray:
    """Input thresholder: minimizer of ``q(u - w, R) + lam ||w||^2`` over ``||w|| <= sqrt(p_out)``.

    Interior solution ``(I + 2 lam R)^{-1} u``; on the boundary the Lagrange
    multiplier ``mu`` of the disc is located by bisection.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    R = check_spd(R)
    return _g_in(u, R, lam, p_out)[0]


def _fd_jacobian(fun, u, step):
    u = np.asarray(u, float)
    J = np.empty(u.shape + (2,))
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        d = step[..., None] * e
        J[..., :, j] = (fun(u + d) - fun(u - d)) / (2.0 * step[..., None])
    return J


def _g_in_jac(u, R, lam, p_out, active):
    J = np.broadcast_to(inv2(_EYE + 2.0 * lam * R), u.shape[:-1] + (2, 2)).copy()
    if np.any(active):
        ua = u[active]
        Ra = np.broadcast_to(R, u.shape[:-1] + (2, 2))[active]
        step = 1e-6 * np.maximum(1.0, np.linalg.norm(ua, axis=-1))
        J[active] = _fd_jacobian(lambda x: _g_in(x, Ra, lam, p_out)[0], ua, step)
    return J


def g_in_jacobian(u, R, lam: float, p_out: float) -> np.ndarray:
    """Jacobian ``d g_in / du``: analytic inside the disc, central differences on its boundary."""
    R = check_spd(R)
    u = np.asarray(u, float)
    _, active = _g_in(u, R, lam, p_out)
    return _g_in_jac(u, R, lam, p_out, active)


# ----------------------------------------------------------------------------
# iteration

def _split(R):
    """Write symmetric 2x2 ``R`` as ``c I`` plus the conjugate-linear map ``z -> n conj(z)``."""
    c = 0.5 * (R[..., 0, 0] + R[..., 1, 1])
    n = 0.5 * (R[..., 0, 0] - R[..., 1, 1]) + 1j * 0.5 * (R[..., 0, 1] + R[..., 1, 0])
    return c, n


def _join(c, n):
    R = np.empty(np.shape(c) + (2, 2))
    R[..., 0, 0] = c + n.real
    R[..., 1, 1] = c - n.real
    R[..., 0, 1] = R[..., 1, 0] = n.imag
    return R


class _Channel:
    """Channel terms for the block sums.

    With ``Q[m, k]`` the block of ``h = H[m, k]``, ``Q (cI + N) Q^T`` has circular part
    ``|h|^2 c`` and improper coefficient ``h^2 n``, and ``Q^T (cI + N) Q`` has ``|h|^2 c``
    and ``conj(h)^2 n``. The sums over ``m`` or ``k`` thus reduce to matrix-vector products.
    """

    def __init__(self, H):
        self.H = np.asarray(H, complex)
        self.abs2 = np.abs(self.H) ** 2
        self.sq = self.H**2

    def sum_over_antennas(self, Rw):
        # sum_m Q[m,k] Rw[m] Q[m,k]^T
        c, n = _split(Rw)
        return _join(self.abs2.T @ c, self.sq.T @ n)

    def sum_over_users(self, Ry):
        # sum_k Q[m,k]^T Ry[k] Q[m,k]
        c, n = _split(Ry)
        return _join(self.abs2 @ c, self.sq.conj() @ n)

    def forward(self, w):
        # sum_m Q[m,k] w[m]
        return augment(self.H.T @ de_augment(w))

    def backward(self, y):
        # sum_k Q[m,k]^T y[k]
        return augment(self.H.conj() @ de_augment(y))


def amp_step(state: AmpState, problem: GlseProblem, options: AmpOptions,
             channel: _Channel | None = None) -> AmpState:
    """Run one pass of the AMP recursion and return the state at ``t + 1``."""
    ch = channel or _Channel(problem.H)
    jit = options.jitter
    s = augment(problem.s)

    Rv = clamp_spd(ch.sum_over_antennas(state.Rw), jit)
    v = ch.forward(state.w) - matvec(Rv, state.y)
    y = _g_out(v, s, Rv, problem.rho)
    Ry = _g_out_jac(Rv)

    Ru = clamp_spd(inv2(clamp_spd(ch.sum_over_users(Ry), jit)), jit)
    assert is_spd(Rv, eig_floor=0.0) and is_spd(Ru, eig_floor=0.0)
    u = state.w + matvec(Ru, ch.backward(y))

    w_new, active = _g_in(u, Ru, problem.lam, problem.p_out)
    J = _g_in_jac(u, Ru, problem.lam, problem.p_out, active)
    Rw = clamp_spd(np.einsum("mij,mjk->mik", J, Ru), jit)

    g = options.damping
    w = (1.0 - g) * state.w + g * w_new
    return AmpState(w=w, Rw=Rw, y=y, Ry=Ry, v=v, Rv=Rv, t=state.t + 1)


def amp_precode(problem: GlseProblem, options: AmpOptions | None = None) -> AmpResult:
    """Compute the GLSE precoder with the AMP iteration.

    Iterates until ``max_iters`` passes are done or the relative change of ``w``
    falls below ``stop_tol``. ``trace`` holds the GLSE objective after every pass.
    If the objective exceeds ``1e6`` times its initial value (or turns non-finite),
    the best iterate seen so far is returned with ``diverged=True``.
    """
    options = options or AmpOptions()
    channel = _Channel(problem.H)
    state = AmpState.initial(problem)
    w = state.w_complex()
    obj0 = objective(w, problem)
    best_w, best_obj = w, obj0
    trace: list[float] = []
    result = AmpResult(w=w)

    for _ in range(options.max_iters):
        prev = state.w
        state = amp_step(state, problem, options, channel)
        w = state.w_complex()
        obj = objective(w, problem)
        trace.append(obj)
        if not np.isfinite(obj) or obj > _DIVERGENCE_FACTOR * max(obj0, 1e-300):
            result.diverged = True
            w = best_w
            break
        if obj < best_obj:
            best_w, best_obj = w, obj
        change = np.linalg.norm(state.w - prev)
        scale = np.linalg.norm(prev)
        if change == 0.0 or (scale > 0 and change / scale < options.stop_tol):
            result.converged = True
            break

    result.w = project_disc(w, problem.p_out)
    result.trace = trace
    result.iterations = len(trace)
    return result
