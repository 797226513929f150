import csv
import json
import math

import numpy as np
import pytest

from rfprecode.experiment import (
    CSV_HEADER,
    ExperimentConfig,
    SweepResult,
    asymptotic_reference,
    emit_outputs,
    generate_channel,
    generate_symbols,
    realization_seed,
    run_realization,
    run_sweep,
)
from rfprecode.rf import SalehParams


def small_config(**kw):
    base = dict(M=8, xi_list=[1.0, 2.0], realizations=2, methods=["amp", "direct", "rzf"])
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_result():
    return run_sweep(small_config())


def test_channel_moments():
    M = 16
    H = np.concatenate([generate_channel(M, 625, s) for s in range(10)], axis=1)  # 1e5 entries
    assert np.mean(np.abs(H) ** 2) == pytest.approx(1 / M, rel=0.05)
    assert np.var(H.real) == pytest.approx(1 / (2 * M), rel=0.05)
    assert np.var(H.imag) == pytest.approx(1 / (2 * M), rel=0.05)
    assert np.mean(np.sum(np.abs(H) ** 2, axis=0)) == pytest.approx(1.0, rel=0.02)


def test_symbol_moments():
    s = np.concatenate([generate_symbols(10_000, seed) for seed in range(10)])
    assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, abs=0.05)
    assert abs(np.mean(s)) < 0.02
    assert abs(np.mean(s * s)) < 0.02  # circular symmetry


def test_generation_deterministic():
    assert np.array_equal(generate_channel(8, 3, 42), generate_channel(8, 3, 42))
    assert np.array_equal(generate_symbols(3, 42), generate_symbols(3, 42))
    assert not np.array_equal(generate_channel(8, 3, 42), generate_channel(8, 3, 43))
    # channel and symbols come from separate streams of the same seed
    assert not np.allclose(generate_channel(1, 3, 7)[0] * np.sqrt(2), generate_symbols(3, 7) * np.sqrt(2))


def test_generation_rejects_empty():
    with pytest.raises(ValueError):
        generate_channel(0, 3, 1)
    with pytest.raises(ValueError):
        generate_symbols(0, 1)


def test_realization_seeds_distinct():
    seeds = {realization_seed(1, i, r) for i in range(6) for r in range(200)}
    assert len(seeds) == 1200
    assert realization_seed(1, 2, 3) == realization_seed(1, 2, 3)


def test_config_defaults_and_users():
    cfg = ExperimentConfig()
    assert cfg.theta == cfg.epsilon == 0.05
    assert [cfg.users(x) for x in cfg.xi_list] == [64, 46, 36, 29, 25, 21]
    assert cfg.saleh == SalehParams(2.159, 1.152, 4.003, 9.104)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(realizations=0)
    with pytest.raises(ValueError):
        ExperimentConfig(methods=["zf"])
    with pytest.raises(ValueError):
        ExperimentConfig(M=2, xi_list=[8.0])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_round_trip(tmp_path):
    cfg = small_config(saleh=SalehParams(2.0, 1.0, 4.0, 9.0), rzf_delta=0.5)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg


def test_smoke_direct_only():
    cfg = small_config(realizations=1, methods=["direct"], xi_list=[1.0, 1.4, 2.0])
    res = run_sweep(cfg)
    assert [r.xi for r in res.rows] == [1.0, 1.4, 2.0]
    assert all(r.method == "direct" for r in res.rows)


def test_methods_share_realizations(small_result):
    by_key = {}
    for r in small_result.rows:
        by_key.setdefault((r.xi, r.method), []).append(r.seed)
    assert by_key[(1.0, "amp")] == by_key[(1.0, "direct")] == by_key[(1.0, "rzf")]


def test_row_order(small_result):
    keys = [(r.xi, r.method) for r in small_result.rows]
    assert keys == [(xi, m) for xi in (1.0, 2.0) for m in ("amp", "direct", "rzf") for _ in range(2)]


def test_aggregation_is_linear_mean(small_result):
    for agg in small_result.aggregate():
        rows = small_result.select(agg.method, agg.xi)
        lin = np.mean([10 ** (r.d_tilde_db / 10) for r in rows])
        assert agg.d_tilde_db == pytest.approx(10 * math.log10(lin), abs=1e-9)
        lin_d = np.mean([10 ** (r.d_db / 10) for r in rows])
        assert agg.d_db == pytest.approx(10 * math.log10(lin_d), abs=1e-9)
        assert agg.seed == "mean"


def test_failed_realization_is_flagged(monkeypatch):
    import rfprecode.experiment as ex

    def boom(*a, **k):
        raise ArithmeticError("boom")

    monkeypatch.setattr(ex, "_tune_direct", boom)
    rows = run_realization(small_config(methods=["direct", "rzf"]), 0, 0)
    assert rows[0].diverged == 1 and math.isnan(rows[0].d_db)
    assert rows[1].diverged == 0 and math.isfinite(rows[1].d_db)


def test_outputs_schema(tmp_path, small_result):
    paths = emit_outputs(small_result, tmp_path / "out")
    with open(paths["csv"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    assert all(len(r) == len(CSV_HEADER) for r in rows)
    assert len(rows) == 1 + len(small_result.rows) + 6
    assert sum(r[3] == "mean" for r in rows) == 6

    plot = paths["plot"].read_text()
    assert "# amp mean D-tilde [dB]" in plot and "# asymptotic D reference [dB]" in plot
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["master_seed"] == small_result.config.master_seed
    assert ExperimentConfig.from_dict(manifest["config"]) == small_result.config


def test_header_only_for_empty_result(tmp_path):
    paths = emit_outputs(SweepResult(small_config()), tmp_path)
    assert paths["csv"].read_text().strip() == ",".join(CSV_HEADER)


def test_unwritable_path_names_it(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        emit_outputs(SweepResult(small_config()), blocker / "sub")


def test_rerun_from_manifest_is_bit_identical(tmp_path, small_result):
    a = emit_outputs(small_result, tmp_path / "a")
    cfg = ExperimentConfig.from_dict(json.loads(a["manifest"].read_text())["config"])
    b = emit_outputs(run_sweep(cfg), tmp_path / "b")
    assert a["csv"].read_bytes() == b["csv"].read_bytes()


def test_parallel_matches_serial(tmp_path, small_result):
    cfg = small_config(workers=2)
    par = run_sweep(cfg)
    assert [r.csv_fields() for r in par.rows] == [r.csv_fields() for r in small_result.rows]


def test_emitted_signals_feasible():
    import rfprecode.experiment as ex
    from rfprecode.amp import amp_precode
    from rfprecode.problem import GlseProblem

    cfg = small_config(M=16, p_out=0.5)
    for i, xi in enumerate(cfg.xi_list):
        seed = realization_seed(cfg.master_seed, i, 0)
        H, s = generate_channel(16, cfg.users(xi), seed), generate_symbols(cfg.users(xi), seed)
        problem = GlseProblem(H, s, cfg.rho, 1.0, cfg.p_out)
        tuned = ex._tune_direct(cfg, problem)
        w_amp = amp_precode(problem.with_lambda(tuned.value), cfg.amp).w
        for w in (tuned.w, w_amp):
            assert np.max(np.abs(w) ** 2) <= cfg.p_out + 1e-9


def test_asymptotic_reference_shape():
    ref = asymptotic_reference()
    assert ref.shape[1] == 2 and len(ref) > 10
    assert np.all(np.diff(ref[:, 0]) > 0)
    assert np.all(np.diff(ref[:, 1]) < 0)
