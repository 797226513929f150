"""Command line entry point: ``rfprecode run | project | papr-tune``."""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time

import numpy as np

from rfprecode.experiment import (
    METHODS,
    ExperimentConfig,
    emit_outputs,
    generate_channel,
    generate_symbols,
    print_summary,
    realization_seed,
    run_sweep,
)


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be a subset of {','.join(METHODS)}")
    return methods


def _load(path):
    return ExperimentConfig.load(path) if path else ExperimentConfig()


def cmd_run(args) -> int:
    cfg = _load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.methods is not None:
        overrides["methods"] = args.methods
    if args.realizations is not None:
        overrides["realizations"] = args.realizations
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)

    start = time.time()

    def progress(done, total):
        if not args.quiet and (done == total or done % max(1, total // 20) == 0):
            print(f"[{time.time() - start:7.1f}s] {done}/{total} realizations", file=sys.stderr)

    result = run_sweep(cfg, progress=progress)
    paths = emit_outputs(result, args.out_dir)
    if not args.quiet:
        print_summary(result)
        for name, path in paths.items():
            print(f"{name}: {path}")
    return 0


def cmd_project(args) -> int:
    from rfprecode.projection import ProjectionConfig, project_symbol

    cfg = _load(args.config)
    rf = cfg.rf_model()
    w = complex(args.w_re, args.w_im)
    if abs(w) ** 2 > rf.p_out:
        raise ValueError(f"|w|^2 = {abs(w) ** 2:.4g} exceeds p_out = {rf.p_out}")
    x = project_symbol(w, rf, ProjectionConfig(theta=args.theta))
    out = rf.rf_convert(x)
    print(f"x        = {x.real:.12g} {x.imag:+.12g}j  (|x| = {abs(x):.12g}, "
          f"{10 * math.log10(abs(x)) if x else -math.inf:.4f} dB)")
    print(f"f_RF(x)  = {out.real:.12g} {out.imag:+.12g}j")
    print(f"residual = {abs(out - w):.3e}")
    return 0


def cmd_papr_tune(args) -> int:
    from rfprecode.amp import amp_precode
    from rfprecode.metrics import tune_gamma_for_papr, tune_lambda_for_papr
    from rfprecode.problem import GlseProblem
    from rfprecode.solver import solve_glse_direct

    cfg = _load(args.config)
    K = cfg.users(args.xi)
    if K < 1:
        raise ValueError(f"xi = {args.xi} leaves no users for M = {cfg.M}")
    seed = realization_seed(args.seed if args.seed is not None else cfg.master_seed, 0, 0)
    H, s = generate_channel(cfg.M, K, seed), generate_symbols(K, seed)
    if args.method == "rzf":
        res = tune_gamma_for_papr(H, s, cfg.rf_model(), cfg.rzf_delta, args.target_db, cfg.papr_tol_db)
        name = "gamma"
    else:
        problem = GlseProblem(H, s, cfg.rho, 1.0, cfg.p_out)
        if args.method == "amp":
            def solve(p):
                return amp_precode(p, cfg.amp).w
        else:
            def solve(p):
                return solve_glse_direct(p, cfg.solver).w
        res = tune_lambda_for_papr(problem, args.target_db, cfg.papr_tol_db, solve, cfg.lambda_bracket)
        name = "lambda"
    print(f"M={cfg.M} K={K} method={args.method} {name}={res.value:.6g} "
          f"papr_db={res.papr_db:.4f} reached={res.reached}")
    return 0 if res.reached else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfprecode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the xi sweep and write CSV, plot data and manifest")
    run.add_argument("--config", help="JSON experiment config (defaults if omitted)")
    run.add_argument("--out-dir", default="results")
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--methods", type=_methods, help="comma separated subset of amp,direct,rzf")
    run.add_argument("--realizations", type=int)
    run.add_argument("--quiet", action="store_true")
    run.set_defaults(func=cmd_run)

    proj = sub.add_parser("project", help="project one RF-stage symbol back through the PA")
    proj.add_argument("--w-re", type=float, required=True)
    proj.add_argument("--w-im", type=float, required=True)
    proj.add_argument("--theta", type=float, required=True)
    proj.add_argument("--config")
    proj.set_defaults(func=cmd_project)

    tune = sub.add_parser("papr-tune", help="tune lambda (or the RZF gain) on one realization")
    tune.add_argument("--xi", type=float, required=True)
    tune.add_argument("--target-db", type=float, required=True)
    tune.add_argument("--method", choices=METHODS, default="amp")
    tune.add_argument("--seed", type=int)
    tune.add_argument("--config")
    tune.set_defaults(func=cmd_papr_tune)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"rfprecode: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
