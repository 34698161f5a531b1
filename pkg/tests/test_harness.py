import numpy as np
import pytest

from ascd.cli import main
from ascd.harness import (
    ExperimentConfig,
    build_problem,
    build_schedule,
    equivalence_report,
    load_config,
    matrix_report,
    measure_speedup,
    rate_bound,
    verify_rate,
)
from ascd.problems import make_sparse_quadratic, save_problem
from ascd.schedule import CONVEX, SC_LINEAR, SC_SUBLINEAR, Schedule
from ascd.trace import RunTrace

BASE_CONFIG = """
[problem]
kind = sparse_quadratic
n = 40
s = 4
seed = 1
mu = 0.5

[schedule]
regime = sc_linear
mu = 0.5

[run]
T = 400
seeds = 0,1,2
record_stride = 40
target_gap = 1e-3

[async]
workers = 1
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(BASE_CONFIG)
    return path


# ------------------------------------------------------------------- config


def test_load_config_values(config_path):
    cfg = load_config(config_path)
    assert cfg.problem_kind == "sparse_quadratic"
    assert (cfg.n, cfg.s, cfg.problem_seed) == (40, 4, 1)
    assert cfg.regime_tag == SC_LINEAR
    assert cfg.seeds == [0, 1, 2]
    assert cfg.T == 400
    assert cfg.workers == [1]


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ValueError):
        load_config(tmp_path / "nope.ini")


def test_load_config_bad_kind(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[problem]\nkind = warp_drive\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_config_defaults_resolution():
    cfg = ExperimentConfig(n=50)
    assert cfg.resolved_T() == 1000
    assert cfg.resolved_checkpoints() == [50, 250, 1000]


def test_build_problem_from_file(tmp_path):
    p = make_sparse_quadratic(30, 3, seed=5, mu_target=0.5)
    path = tmp_path / "prob.txt"
    save_problem(p, path)
    cfg = ExperimentConfig(problem_kind="file", problem_path=str(path))
    q = build_problem(cfg)
    assert q.n == 30
    np.testing.assert_array_equal(q.minimizer, p.minimizer)


def test_build_schedule_takes_problem_mu():
    cfg = ExperimentConfig(n=40, mu=-1.0, regime_tag=SC_LINEAR)
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    assert sched.mu == p.mu


# --------------------------------------------------------------- rate bounds


def test_rate_bound_t_zero_dominates_initial_gap():
    # at T = 0 every bound is at least the initial gap
    for tag in (SC_LINEAR, SC_SUBLINEAR, CONVEX):
        mu = 0.3 if tag != CONVEX else 0.0
        assert rate_bound(tag, 100, mu, 0.1, 0, gap0=2.0, dist0_sq=1.0) >= 2.0


def test_rate_bound_decreases_with_T():
    for tag, mu in [(SC_LINEAR, 0.5), (SC_SUBLINEAR, 0.5), (CONVEX, 0.0)]:
        values = [rate_bound(tag, 100, mu, 0.1, T, 1.0, 1.0) for T in [0, 100, 1000, 10_000]]
        assert all(a > b for a, b in zip(values, values[1:]))


def test_verify_rate_passes_on_identity_quadratic():
    p = make_sparse_quadratic(40, 1, seed=0, mu_target=1.0)
    sched = Schedule(SC_LINEAR, 40, mu=1.0)
    checks = verify_rate(p, sched, seeds=range(6), checkpoints=[40, 200])
    assert all(c.passed for c in checks)
    assert checks[0].bound >= checks[1].bound


def test_verify_rate_needs_two_seeds():
    p = make_sparse_quadratic(40, 1, seed=0, mu_target=1.0)
    sched = Schedule(SC_LINEAR, 40, mu=1.0)
    with pytest.raises(ValueError):
        verify_rate(p, sched, seeds=[0], checkpoints=[40])


# ------------------------------------------------------------------ speedup


def test_measure_speedup_requires_baseline():
    cfg = ExperimentConfig(n=40, workers=[2, 4])
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    with pytest.raises(ValueError):
        measure_speedup(p, sched, cfg)


def test_measure_speedup_reports_epochs(tmp_path):
    cfg = ExperimentConfig(
        n=40, s=4, mu_target=0.5, T=2500, seeds=[0, 1], workers=[1], target_gap=1e-4
    )
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    rows, summary = measure_speedup(p, sched, cfg)
    assert summary[1]["speedup"] == pytest.approx(1.0, rel=0.25)
    assert all(r.epochs_to_target > 0 for r in rows)


def test_measure_speedup_unreachable_target():
    cfg = ExperimentConfig(n=40, s=4, T=50, seeds=[0], workers=[1], target_gap=1e-12)
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    with pytest.raises(RuntimeError):
        measure_speedup(p, sched, cfg)


# ----------------------------------------------------------- property suites


def test_matrix_report_all_pass():
    checks = matrix_report(n_values=(19, 50))
    assert checks, "report must not be empty"
    for c in checks:
        assert c.passed, f"{c.name}: {c.detail}"


def test_equivalence_report_all_pass():
    for c in equivalence_report(n_values=(5, 24), T=300, problems_per_case=1):
        assert c.passed, f"{c.name}: {c.detail}"


# ---------------------------------------------------------------------- CLI


def test_cli_solve_writes_trace(config_path, tmp_path):
    out = tmp_path / "results"
    code = main(["solve", "--config", str(config_path), "--out", str(out), "--seeds", "0"])
    assert code == 0
    trace = RunTrace.from_csv(out / "solve_w1_seed0.csv")
    assert trace.ts[0] == 0
    assert trace.ts[-1] == 400


def test_cli_solve_async_workers(config_path, tmp_path):
    out = tmp_path / "results"
    code = main(
        [
            "solve",
            "--config",
            str(config_path),
            "--out",
            str(out),
            "--seeds",
            "0",
            "--workers",
            "2",
            "--q-throttle",
            "4",
        ]
    )
    assert code == 0
    assert (out / "solve_w2_seed0.csv").exists()


def test_cli_missing_config_is_exit_2(tmp_path):
    code = main(["solve", "--config", str(tmp_path / "absent.ini")])
    assert code == 2


def test_cli_verify_rate(config_path, tmp_path):
    out = tmp_path / "rates"
    code = main(
        [
            "verify-rate",
            "--config",
            str(config_path),
            "--out",
            str(out),
            "--seeds",
            "0,1,2,3",
        ]
    )
    assert code == 0
    assert (out / "rate_checks.csv").exists()


def test_cli_speedup(tmp_path):
    config = tmp_path / "speed.ini"
    config.write_text(BASE_CONFIG.replace("T = 400", "T = 2500"))
    out = tmp_path / "speed"
    code = main(
        [
            "speedup",
            "--config",
            str(config),
            "--out",
            str(out),
            "--seeds",
            "0",
            "--workers",
            "1,2",
            "--q-throttle",
            "6",
        ]
    )
    assert code == 0
    text = (out / "speedup.csv").read_text().splitlines()
    assert text[0] == "workers,seed,epochs_to_target,wall_ns_to_target,q_obs,final_gap"
    assert len(text) == 3


def test_cli_check_matrices_and_equivalence():
    assert main(["check-matrices"]) == 0
    assert main(["equivalence"]) == 0


def test_cli_out_env_override(config_path, tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("ASCD_OUT", str(target))
    code = main(["solve", "--config", str(config_path), "--seeds", "0"])
    assert code == 0
    assert (target / "solve_w1_seed0.csv").exists()
