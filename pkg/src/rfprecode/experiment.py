"""Monte-Carlo sweep over the antennas-per-user ratio xi = M / K.

Each realization draws one channel and one symbol vector and runs every
requested method on that same pair. Seeds are derived from
``(master_seed, xi_index, realization)`` through :class:`numpy.random.SeedSequence`,
so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from rfprecode.amp import AmpOptions, amp_precode
from rfprecode.metrics import (
    avg_distortion,
    evaluate_glse,
    papr_db,
    rzf_precode,
    to_db,
    tune_gamma_for_papr,
    tune_lambda_for_papr,
)
from rfprecode.problem import GlseProblem
from rfprecode.projection import ProjectionConfig
from rfprecode.rf import RfModel, RipplePerturbation, SalehParams
from rfprecode.solver import SolverOptions, solve_glse_direct

METHODS = ("amp", "direct", "rzf")
CSV_HEADER = [
    "xi", "K", "method", "seed", "d_db", "d_tilde_db",
    "papr_db", "tuning_param", "iterations", "diverged",
]
_CHANNEL_STREAM = 0
_SYMBOL_STREAM = 1


@dataclass
class ExperimentConfig:
    M: int = 64
    xi_list: list[float] = field(default_factory=lambda: [1.0, 1.4, 1.8, 2.2, 2.6, 3.0])
    rho: float = 1.0
    papr_target_db: float = 5.0
    papr_tol_db: float = 0.1
    saleh: SalehParams = field(default_factory=SalehParams)
    p_out: float = 1.0
    epsilon: float = 0.05
    theta: float | None = None
    perturbation: RipplePerturbation | None = None
    realizations: int = 200
    master_seed: int = 20190702
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    amp: AmpOptions = field(default_factory=AmpOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    lambda_bracket: tuple[float, float] = (1e-4, 1e2)
    rzf_delta: float = 0.3
    amp_tuning: str = "shared"
    workers: int = 1

    def __post_init__(self):
        if self.theta is None:
            self.theta = self.epsilon
        self.xi_list = [float(x) for x in self.xi_list]
        self.methods = list(self.methods)
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.amp_tuning not in ("shared", "own"):
            raise ValueError("amp_tuning must be 'shared' or 'own'")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.xi_list or any(x <= 0 for x in self.xi_list):
            raise ValueError("xi_list must hold positive ratios")
        if any(self.users(x) < 1 for x in self.xi_list):
            raise ValueError(f"M={self.M} is too small for xi_list {self.xi_list}")

    def users(self, xi: float) -> int:
        return int(round(self.M / xi))

    def rf_model(self) -> RfModel:
        return RfModel(self.saleh, self.p_out, self.epsilon, self.perturbation)

    def projection(self) -> ProjectionConfig:
        return ProjectionConfig(theta=self.theta)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["lambda_bracket"] = list(self.lambda_bracket)
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(raw)
        if isinstance(kw.get("saleh"), dict):
            kw["saleh"] = SalehParams(**kw["saleh"])
        if isinstance(kw.get("perturbation"), dict):
            kw["perturbation"] = RipplePerturbation(**kw["perturbation"])
        if isinstance(kw.get("amp"), dict):
            kw["amp"] = AmpOptions(**kw["amp"])
        if isinstance(kw.get("solver"), dict):
            kw["solver"] = SolverOptions(**kw["solver"])
        if "lambda_bracket" in kw:
            kw["lambda_bracket"] = tuple(kw["lambda_bracket"])
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SweepRow:
    xi: float
    K: int
    method: str
    seed: int | str
    d_db: float
    d_tilde_db: float
    papr_db: float
    tuning_param: float
    iterations: float
    diverged: int
    d_lin: float = math.nan
    d_tilde_lin: float = math.nan
    tuned: bool = True
    peak_power: float = math.nan  # max |w_m|^2 of the emitted signal, not written to CSV

    def csv_fields(self) -> list:
        return [getattr(self, name) for name in CSV_HEADER]


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list[SweepRow] = field(default_factory=list)

    def select(self, method: str, xi: float | None = None) -> list[SweepRow]:
        return [r for r in self.rows
                if r.method == method and (xi is None or r.xi == xi)]

    def mean_db(self, method: str, xi: float, key: str = "d_tilde_lin") -> float:
        """dB value of the linear-domain mean over realizations (failed rows skipped)."""
        vals = np.array([getattr(r, key) for r in self.select(method, xi)], float)
        vals = vals[np.isfinite(vals)]
        return float(to_db(vals.mean())) if len(vals) else math.nan

    def aggregate(self) -> list[SweepRow]:
        out = []
        for xi in self.config.xi_list:
            for method in self.config.methods:
                rows = self.select(method, xi)
                if not rows:
                    continue
                ok = [r for r in rows if math.isfinite(r.d_lin)]

                def mean(attr, rows=ok):
                    vals = [getattr(r, attr) for r in rows]
                    return float(np.mean(vals)) if vals else math.nan

                papr_lin = [10 ** (r.papr_db / 10) for r in ok if math.isfinite(r.papr_db)]
                out.append(SweepRow(
                    xi=xi, K=rows[0].K, method=method, seed="mean",
                    d_db=self.mean_db(method, xi, "d_lin"),
                    d_tilde_db=self.mean_db(method, xi, "d_tilde_lin"),
                    papr_db=float(to_db(np.mean(papr_lin))) if papr_lin else math.nan,
                    tuning_param=mean("tuning_param"),
                    iterations=mean("iterations"),
                    diverged=sum(r.diverged for r in rows),
                    d_lin=mean("d_lin"), d_tilde_lin=mean("d_tilde_lin"),
                ))
        return out


def generate_channel(M: int, K: int, seed) -> np.ndarray:
    """i.i.d. CN(0, 1/M) channel of shape (M, K)."""
    if M < 1 or K < 1:
        raise ValueError("M and K must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(_CHANNEL_STREAM,))))
    return (rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))) / math.sqrt(2 * M)


def generate_symbols(K: int, seed) -> np.ndarray:
    """K i.i.d. unit-variance circularly-symmetric complex Gaussian symbols."""
    if K < 1:
        raise ValueError("K must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(_SYMBOL_STREAM,))))
    return (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / math.sqrt(2)


def realization_seed(master_seed: int, xi_index: int, r: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(xi_index, r))
    return int(ss.generate_state(1, np.uint64)[0])


class _WarmDirect:
    """Direct solver that warm-starts from its previous solution (used during tuning)."""

    def __init__(self, options: SolverOptions):
        self.options = options
        self.last = None
        self.iterations = 0

    def __call__(self, problem: GlseProblem) -> np.ndarray:
        res = solve_glse_direct(problem, self.options, w0=self.last)
        self.last, self.iterations = res.w, res.iterations
        return res.w


def _failed_row(xi, K, method, seed) -> SweepRow:
    nan = math.nan
    return SweepRow(xi, K, method, seed, nan, nan, nan, nan, 0, 1, tuned=False)


def _tune_direct(cfg, problem):
    solver = _WarmDirect(cfg.solver)
    return tune_lambda_for_papr(problem, cfg.papr_target_db, cfg.papr_tol_db,
                                solve=solver, bracket=cfg.lambda_bracket)


def _tune_amp(cfg, problem):
    return tune_lambda_for_papr(problem, cfg.papr_target_db, cfg.papr_tol_db,
                                solve=lambda p: amp_precode(p, cfg.amp).w,
                                bracket=cfg.lambda_bracket)


def _glse_row(cfg, rf, proj, problem, method, xi, seed, tuned) -> SweepRow:
    tuned_problem = problem.with_lambda(tuned.value)
    if method == "amp":
        res = amp_precode(tuned_problem, cfg.amp)
        w, iters, diverged = res.w, res.iterations, res.diverged
    else:
        res = solve_glse_direct(tuned_problem, cfg.solver, w0=tuned.w)
        w, iters, diverged = res.w, res.iterations, not res.converged
    rep = evaluate_glse(w, tuned_problem, rf, proj)
    return SweepRow(
        xi=xi, K=problem.K, method=method, seed=seed,
        d_db=float(to_db(rep.d_predicted)), d_tilde_db=float(to_db(rep.d_actual)),
        papr_db=rep.papr_db, tuning_param=tuned.value, iterations=iters,
        diverged=int(diverged), d_lin=rep.d_predicted, d_tilde_lin=rep.d_actual,
        tuned=tuned.reached, peak_power=float(np.max(np.abs(w) ** 2)),
    )


def _rzf_row(cfg, rf, H, s, xi, seed) -> SweepRow:
    tuned = tune_gamma_for_papr(H, s, rf, cfg.rzf_delta, cfg.papr_target_db, cfg.papr_tol_db)
    x = rzf_precode(H, s, cfg.rzf_delta, tuned.value)
    d = avg_distortion(H, x, s, cfg.rho)
    d_true = avg_distortion(H, tuned.w, s, cfg.rho)
    return SweepRow(
        xi=xi, K=H.shape[1], method="rzf", seed=seed,
        d_db=float(to_db(d)), d_tilde_db=float(to_db(d_true)),
        papr_db=papr_db(tuned.w), tuning_param=tuned.value, iterations=0, diverged=0,
        d_lin=d, d_tilde_lin=d_true, tuned=tuned.reached,
        peak_power=float(np.max(np.abs(tuned.w) ** 2)),
    )


def run_realization(cfg: ExperimentConfig, xi_index: int, r: int) -> list[SweepRow]:
    """All methods of ``cfg`` on realization ``r`` of ``xi_list[xi_index]``."""
    xi = cfg.xi_list[xi_index]
    K = cfg.users(xi)
    seed = realization_seed(cfg.master_seed, xi_index, r)
    H = generate_channel(cfg.M, K, seed)
    s = generate_symbols(K, seed)
    rf, proj = cfg.rf_model(), cfg.projection()
    problem = GlseProblem(H, s, cfg.rho, 1.0, cfg.p_out)
    rows = []
    shared = None
    for method in cfg.methods:
        try:
            if method == "rzf":
                rows.append(_rzf_row(cfg, rf, H, s, xi, seed))
                continue
            if method == "amp" and cfg.amp_tuning == "own":
                tuned = _tune_amp(cfg, problem)
            elif "direct" in cfg.methods or cfg.amp_tuning == "shared":
                if shared is None:
                    shared = _tune_direct(cfg, problem)
                tuned = shared
            else:
                tuned = _tune_amp(cfg, problem)
            rows.append(_glse_row(cfg, rf, proj, problem, method, xi, seed, tuned))
        except (ValueError, ArithmeticError, RuntimeError, AssertionError, np.linalg.LinAlgError):
            rows.append(_failed_row(xi, K, method, seed))
    return rows


def _run_job(args):
    cfg, i, r = args
    return run_realization(cfg, i, r)


def run_sweep(cfg: ExperimentConfig, progress=None) -> SweepResult:
    """Run the full sweep; rows come out in (xi, method, realization) order."""
    jobs = [(cfg, i, r) for i in range(len(cfg.xi_list)) for r in range(cfg.realizations)]
    per_job: list[list[SweepRow]] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for n, rows in enumerate(pool.map(_run_job, jobs, chunksize=4), 1):
                per_job.append(rows)
                if progress:
                    progress(n, len(jobs))
    else:
        for n, job in enumerate(jobs, 1):
            per_job.append(_run_job(job))
            if progress:
                progress(n, len(jobs))

    result = SweepResult(cfg)
    order = {m: k for k, m in enumerate(cfg.methods)}
    for i in range(len(cfg.xi_list)):
        block = [row for rows in per_job[i * cfg.realizations:(i + 1) * cfg.realizations] for row in rows]
        # stable sort keeps the realization order within each method
        result.rows.extend(sorted(block, key=lambda row: order[row.method]))
    return result


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: Iterable[SweepRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(v) for v in row.csv_fields()])


def asymptotic_reference() -> np.ndarray:
    """Shipped large-system D(rho) curve in dB as an (n, 2) array of (xi, value)."""
    text = resources.files("rfprecode").joinpath("data/asymptotic_d.txt").read_text()
    return np.loadtxt(text.splitlines(), ndmin=2)


def write_plot_data(result: SweepResult, path: Path) -> None:
    agg = result.aggregate()
    with open(path, "w") as fh:
        for method in result.config.methods:
            fh.write(f"# {method} mean D-tilde [dB]\n")
            for row in agg:
                if row.method == method:
                    fh.write(f"{row.xi!r} {row.d_tilde_db!r}\n")
            fh.write("\n")
        fh.write("# asymptotic D reference [dB]\n")
        for xi, val in asymptotic_reference():
            fh.write(f"{xi!r} {val!r}\n")


def write_manifest(result: SweepResult, path: Path) -> None:
    from rfprecode import __version__

    manifest = {
        "version": __version__,
        "master_seed": result.config.master_seed,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": result.config.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_outputs(result: SweepResult, out_dir: str | Path) -> dict[str, Path]:
    """Write ``results.csv``, ``plot_data.txt`` and ``manifest.json`` into ``out_dir``.

    Raises:
        OSError: naming the path that could not be written.
    """
    out_dir = Path(out_dir)
    paths = {
        "csv": out_dir / "results.csv",
        "plot": out_dir / "plot_data.txt",
        "manifest": out_dir / "manifest.json",
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    for key, path in paths.items():
        try:
            if key == "csv":
                write_csv(result.rows + result.aggregate(), path)
            elif key == "plot":
                write_plot_data(result, path)
            else:
                write_manifest(result, path)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return paths


def print_summary(result: SweepResult, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{'xi':>5} {'K':>4} {'method':>7} {'D [dB]':>9} {'D~ [dB]':>9} {'PAPR':>6}", file=stream)
    for row in result.aggregate():
        print(f"{row.xi:5.2f} {row.K:4d} {row.method:>7} {row.d_db:9.3f} "
              f"{row.d_tilde_db:9.3f} {row.papr_db:6.2f}", file=stream)
