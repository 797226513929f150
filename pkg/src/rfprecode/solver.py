"""Reference solver for the disc-constrained GLSE problem (accelerated projected gradient)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rfprecode.problem import GlseProblem, project_disc

STEP_MARGIN = 1.05


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 50000
    rel_tol: float = 1e-10
    accelerate: bool = True
    check_every: int = 10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SolveResult:
    w: np.ndarray
    objective: float
    iterations: int
    converged: bool


def objective(v, problem: GlseProblem) -> float:
    """GLSE objective ``||H^T v - sqrt(rho) s||^2 + lam ||v||^2``."""
    v = np.asarray(v, complex)
    r = problem.H.T @ v - problem.target
    return float(np.vdot(r, r).real + problem.lam * np.vdot(v, v).real)


def gradient(v, problem: GlseProblem) -> np.ndarray:
    """Complex gradient (d/dRe + j d/dIm) of :func:`objective`."""
    r = problem.H.T @ v - problem.target
    return 2.0 * (problem.H.conj() @ r) + 2.0 * problem.lam * v


def kkt_residual(w, problem: GlseProblem) -> float:
    """Norm of the unit-step projected-gradient map ``w - P(w - grad f(w))``.

    Zero exactly at the optimum of the convex problem.
    """
    w = np.asarray(w, complex)
    return float(np.linalg.norm(w - project_disc(w - gradient(w, problem), problem.p_out)))


def spectral_norm_sq(H: np.ndarray, iters: int = 200, tol: float = 1e-9) -> float:
    """Largest eigenvalue of ``conj(H) H^T`` by power iteration."""
    x = np.ones(H.shape[0], complex) / np.sqrt(H.shape[0])
    est = 0.0
    for _ in range(iters):
        y = H.conj() @ (H.T @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        x = y / nrm
        if abs(nrm - est) <= tol * nrm:
            return float(nrm)
        est = nrm
    return float(est)


def solve_glse_direct(problem: GlseProblem, options: SolverOptions | None = None,
                      w0: np.ndarray | None = None) -> SolveResult:
    """Solve the GLSE problem to high accuracy.

    Projected gradient with fixed step ``1 / L``, ``L = 2 * 1.05 * sigma_max(H)^2 + 2 lam``,
    Nesterov momentum with restart whenever the objective increases. Stops once
    :func:`kkt_residual` falls below ``rel_tol * max(1, ||sqrt(rho) s||)``.
    """
    options = options or SolverOptions()
    L = 2.0 * STEP_MARGIN * spectral_norm_sq(problem.H) + 2.0 * problem.lam
    if L == 0.0:
        L = 1.0
    tol = options.rel_tol * max(1.0, float(np.linalg.norm(problem.target)))

    w = np.zeros(problem.M, complex) if w0 is None else project_disc(np.asarray(w0, complex), problem.p_out)
    y = w.copy()
    t = 1.0
    f_w = objective(w, problem)
    converged = False
    it = 0
    for it in range(1, options.max_iters + 1):
        w_next = project_disc(y - gradient(y, problem) / L, problem.p_out)
        f_next = objective(w_next, problem)
        if options.accelerate:
            if f_next > f_w:
                # restart momentum from the last accepted point
                y = w.copy()
                t = 1.0
                w_next = project_disc(w - gradient(w, problem) / L, problem.p_out)
                f_next = objective(w_next, problem)
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = w_next + ((t - 1.0) / t_next) * (w_next - w)
            t = t_next
        else:
            y = w_next
        w, f_w = w_next, f_next
        if it % options.check_every == 0 and kkt_residual(w, problem) <= tol:
            converged = True
            break
    return SolveResult(w=w, objective=f_w, iterations=it, converged=converged)
