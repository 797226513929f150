"""Distortion-aware RLS/GLSE precoding for MIMO downlinks with nonlinear PAs."""

from rfprecode.amp import AmpOptions, AmpResult, AmpState, amp_precode, amp_step
from rfprecode.metrics import (
    avg_distortion,
    papr,
    rss,
    rzf_precode,
    tune_gamma_for_papr,
    tune_lambda_for_papr,
)
from rfprecode.problem import GlseProblem
from rfprecode.projection import ProjectionConfig, project_signal, project_symbol
from rfprecode.rf import RfModel, RipplePerturbation, SalehParams
from rfprecode.solver import SolverOptions, kkt_residual, objective, solve_glse_direct

__version__ = "0.1.0"

__all__ = [
    "AmpOptions",
    "AmpResult",
    "AmpState",
    "GlseProblem",
    "ProjectionConfig",
    "RfModel",
    "RipplePerturbation",
    "SalehParams",
    "SolverOptions",
    "amp_precode",
    "amp_step",
    "avg_distortion",
    "kkt_residual",
    "objective",
    "papr",
    "project_signal",
    "project_symbol",
    "rss",
    "rzf_precode",
    "solve_glse_direct",
    "tune_gamma_for_papr",
    "tune_lambda_for_papr",
]
