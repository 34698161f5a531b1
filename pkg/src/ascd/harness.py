"""Experiment harness: problem/schedule construction from config files,
solver drivers, convergence-rate verification, speedup measurement, and
matrix/equivalence property suites.

Configs are flat INI files with ``[problem]``, ``[schedule]``, ``[run]``
and ``[async]`` sections; every command consumes one (CLI flags can
override seeds, workers, throttle, batching and the output directory;
the ``ASCD_OUT`` environment variable also overrides the output
directory).  Reports are CSV files plus a text summary on stdout.

Rate checks are one-sided: the guarantees bound expectations from
above, so a seed-averaged gap is compared against the bound with a
three-standard-error statistical allowance, and only violations count
as failures.
"""

import configparser
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ascd.async_engine import AsyncConfig, run_async
from ascd.basis import (
    ALGEBRA_TOL,
    Mat2,
    a_matrix,
    b_matrix,
    check_goodness,
    mat2_pow,
)
from ascd.problems import (
    Problem,
    lipschitz_params,
    load_problem,
    make_least_squares,
    make_sparse_quadratic,
)
from ascd.schedule import CONVEX, SC_LINEAR, SC_SUBLINEAR, Regime, Schedule, q_bound
from ascd.seq_engine import run_sequential

PROBLEM_KINDS = ("sparse_quadratic", "least_squares", "file")


@dataclass
class ExperimentConfig:
    """One experiment: problem source, regime, run shape, async shape."""

    # problem
    problem_kind: str = "sparse_quadratic"
    n: int = 100
    s: int = 8
    problem_seed: int = 0
    mu_target: float = 0.5
    ls_rows: int = 0  # 0 -> 1.2 n
    ridge: float = 0.0
    problem_path: str = ""
    # schedule
    regime_tag: str = SC_LINEAR
    mu: float = -1.0  # -1 -> take the problem's parameter
    epsilon: float = 0.1
    convex_t0: Optional[int] = None
    # run
    T: int = 0  # 0 -> 20 n
    seeds: List[int] = field(default_factory=lambda: [0])
    record_stride: int = 0  # 0 -> auto
    target_gap: float = 1e-6
    checkpoints: List[int] = field(default_factory=list)  # empty -> [n, 5n, 20n]
    # async
    workers: List[int] = field(default_factory=lambda: [1])
    q_throttle: Optional[int] = None
    counter_batch: Optional[int] = None
    # output
    out_dir: str = "."

    def resolved_T(self) -> int:
        return self.T if self.T > 0 else 20 * self.n

    def resolved_checkpoints(self) -> List[int]:
        if self.checkpoints:
            return self.checkpoints
        return [self.n, 5 * self.n, 20 * self.n]


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment file; raises ``ValueError`` on bad content."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path}")
    cfg = ExperimentConfig()
    try:
        if parser.has_section("problem"):
            sec = parser["problem"]
            cfg.problem_kind = sec.get("kind", cfg.problem_kind).strip()
            cfg.n = sec.getint("n", cfg.n)
            cfg.s = sec.getint("s", cfg.s)
            cfg.problem_seed = sec.getint("seed", cfg.problem_seed)
            cfg.mu_target = sec.getfloat("mu", cfg.mu_target)
            cfg.ls_rows = sec.getint("rows", cfg.ls_rows)
            cfg.ridge = sec.getfloat("ridge", cfg.ridge)
            cfg.problem_path = sec.get("path", cfg.problem_path).strip()
        if parser.has_section("schedule"):
            sec = parser["schedule"]
            cfg.regime_tag = sec.get("regime", cfg.regime_tag).strip()
            cfg.mu = sec.getfloat("mu", cfg.mu)
            cfg.epsilon = sec.getfloat("epsilon", cfg.epsilon)
            if sec.get("t0", "").strip():
                cfg.convex_t0 = sec.getint("t0")
        if parser.has_section("run"):
            sec = parser["run"]
            cfg.T = sec.getint("T", cfg.T)
            if sec.get("seeds", "").strip():
                cfg.seeds = _int_list(sec.get("seeds"))
            cfg.record_stride = sec.getint("record_stride", cfg.record_stride)
            cfg.target_gap = sec.getfloat("target_gap", cfg.target_gap)
            if sec.get("checkpoints", "").strip():
                cfg.checkpoints = _int_list(sec.get("checkpoints"))
        if parser.has_section("async"):
            sec = parser["async"]
            if sec.get("workers", "").strip():
                cfg.workers = _int_list(sec.get("workers"))
            if sec.get("q_throttle", "").strip():
                cfg.q_throttle = sec.getint("q_throttle")
            if sec.get("counter_batch", "").strip():
                cfg.counter_batch = sec.getint("counter_batch")
        if parser.has_section("output"):
            cfg.out_dir = parser["output"].get("dir", cfg.out_dir).strip()
    except (configparser.Error, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if cfg.problem_kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {cfg.problem_kind!r}")
    if not cfg.seeds:
        raise ValueError("at least one seed is required")
    return cfg


def _int_list(text: str) -> List[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.problem_kind == "sparse_quadratic":
        return make_sparse_quadratic(cfg.n, cfg.s, seed=cfg.problem_seed, mu_target=cfg.mu_target)
    if cfg.problem_kind == "least_squares":
        rows = cfg.ls_rows if cfg.ls_rows > 0 else int(1.2 * cfg.n) + 1
        rng = np.random.default_rng(cfg.problem_seed)
        design = rng.standard_normal((rows, cfg.n)) / math.sqrt(rows)
        targets = rng.standard_normal(rows)
        return make_least_squares(design, targets, ridge=cfg.ridge)
    return load_problem(cfg.problem_path)


def build_schedule(cfg: ExperimentConfig, p: Problem) -> Schedule:
    mu = cfg.mu if cfg.mu >= 0 else (0.0 if cfg.regime_tag == CONVEX else p.mu)
    regime = Regime(tag=cfg.regime_tag, n=p.n, mu=mu, epsilon=cfg.epsilon)
    return Schedule.from_regime(regime, convex_t0=cfg.convex_t0)


def resolve_out_dir(cfg: ExperimentConfig, override: Optional[str] = None) -> Path:
    out = Path(override or os.environ.get("ASCD_OUT") or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------- solve


def cmd_solve(cfg: ExperimentConfig, out_override: Optional[str] = None) -> int:
    """Run one solver instance per seed; write traces, print final gaps."""
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    out = resolve_out_dir(cfg, out_override)
    workers = cfg.workers[0]
    T = cfg.resolved_T()
    stride = cfg.record_stride or max(1, T // 256)
    for seed in cfg.seeds:
        if workers == 1:
            trace = run_sequential(p, sched, T=T, seed=seed, record_stride=stride)
        else:
            acfg = AsyncConfig(
                workers=workers,
                T=T,
                seed=seed,
                q_throttle=cfg.q_throttle,
                counter_batch=cfg.counter_batch,
                record_stride=stride,
            )
            _, trace = run_async(p, sched, acfg)
        path = out / f"solve_w{workers}_seed{seed}.csv"
        trace.to_csv(path)
        print(
            f"seed={seed} workers={workers} T={T} "
            f"final_gap={trace.final_gap:.6e} q_obs={trace.q_obs} -> {path}"
        )
    return 0


# --------------------------------------------------------------- rate bounds


def rate_bound(tag: str, n: int, mu: float, epsilon: float, T: int, gap0: float, dist0_sq: float) -> float:
    """Guaranteed upper bound on the expected gap after ``T`` steps."""
    if tag == SC_LINEAR:
        factor = (1.0 - math.sqrt(3.0 / 80.0) * math.sqrt(mu) / n) ** T
        initial = gap0 + (1.0 - math.sqrt(mu) / math.sqrt(240.0)) * (mu / 2.0) * dist0_sq
        return factor * initial
    if tag == SC_SUBLINEAR:
        factor = (1.0 - (1.0 - epsilon) * (3.0 * mu / 20.0) ** (2.0 / 3.0) / n) ** T
        return factor * (gap0 + (10.0 / 3.0) * dist0_sq)
    base = (2.0 * n) * (2.0 * n + 1.0) / ((2.0 * n + T) * (2.0 * n + T + 1.0))
    exponent = n * (0.75 - epsilon - 1.0 / (4.0 * n)) / (n + 1.0)
    return base**exponent * (gap0 + (10.0 / 3.0) * dist0_sq)


@dataclass
class RateCheck:
    T: int
    mean_gap: float
    stderr: float
    bound: float
    passed: bool


def verify_rate(
    p: Problem,
    sched: Schedule,
    seeds: Sequence[int],
    checkpoints: Sequence[int],
    x0: Optional[np.ndarray] = None,
) -> List[RateCheck]:
    """Seed-averaged gaps at checkpoints against the regime's rate bound."""
    if len(seeds) < 2:
        raise ValueError("rate verification needs at least two seeds for a standard error")
    if p.minimizer is None:
        raise ValueError("rate verification requires a problem with known minimizer")
    if x0 is None:
        x0 = np.zeros(p.n)
    checkpoints = sorted(set(int(c) for c in checkpoints))
    stride = math.gcd(*checkpoints) if checkpoints else 1
    T = max(checkpoints)
    gaps = np.empty((len(seeds), len(checkpoints)))
    for i, seed in enumerate(seeds):
        trace = run_sequential(p, sched, T=T, seed=seed, x0=x0, record_stride=stride)
        for j, c in enumerate(checkpoints):
            gaps[i, j] = trace.gap_at(c)
    gap0 = p.value(x0)
    dist0 = float(np.linalg.norm(p.minimizer - x0) ** 2)
    checks = []
    for j, c in enumerate(checkpoints):
        mean = float(np.mean(gaps[:, j]))
        stderr = float(np.std(gaps[:, j], ddof=1) / math.sqrt(len(seeds)))
        bound = rate_bound(sched.tag, sched.n, sched.mu, sched.epsilon, c, gap0, dist0)
        slack = (1.0 + 3.0 * stderr / mean) if mean > 0 else 1.0
        checks.append(RateCheck(T=c, mean_gap=mean, stderr=stderr, bound=bound, passed=mean <= bound * slack))
    return checks


def cmd_verify_rate(cfg: ExperimentConfig, out_override: Optional[str] = None) -> int:
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    out = resolve_out_dir(cfg, out_override)
    checks = verify_rate(p, sched, cfg.seeds, cfg.resolved_checkpoints())
    path = out / "rate_checks.csv"
    with open(path, "w") as fh:
        fh.write("T,mean_gap,stderr,bound,passed\n")
        for c in checks:
            fh.write(f"{c.T},{c.mean_gap!r},{c.stderr!r},{c.bound!r},{int(c.passed)}\n")
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(
            f"[{status}] T={c.T}: mean gap {c.mean_gap:.6e} (stderr {c.stderr:.2e}) "
            f"<= bound {c.bound:.6e}"
        )
    print(f"table -> {path}")
    return 0 if all(c.passed for c in checks) else 1


# -------------------------------------------------------------------- speedup


@dataclass
class SpeedupRow:
    workers: int
    seed: int
    epochs_to_target: float
    wall_ns_to_target: int
    q_obs: int
    final_gap: float


def measure_speedup(
    p: Problem,
    sched: Schedule,
    cfg: ExperimentConfig,
    x0: Optional[np.ndarray] = None,
) -> Tuple[List[SpeedupRow], dict]:
    """Run every worker count to the target gap; derive epochs and wall time.

    Each run executes the full ``T`` cap and the target crossing is read
    off the replayed trace, so one run yields both metrics.
    """
    if 1 not in cfg.workers:
        raise ValueError("speedup needs the single-worker baseline in the workers list")
    T = cfg.resolved_T()
    stride = cfg.record_stride or max(1, p.n // 2)
    rows: List[SpeedupRow] = []
    for w in cfg.workers:
        for seed in cfg.seeds:
            acfg = AsyncConfig(
                workers=w,
                T=T,
                seed=seed,
                q_throttle=cfg.q_throttle,
                counter_batch=cfg.counter_batch,
                record_stride=stride,
            )
            _, trace = run_async(p, sched, acfg, x0=x0)
            hit = trace.first_step_reaching(cfg.target_gap)
            if hit is None:
                raise RuntimeError(
                    f"target gap {cfg.target_gap} unreachable within T={T} "
                    f"(workers={w}, seed={seed}, final={trace.final_gap:.3e})"
                )
            idx = trace.ts.index(hit)
            rows.append(
                SpeedupRow(
                    workers=w,
                    seed=seed,
                    epochs_to_target=hit / p.n,
                    wall_ns_to_target=trace.wall_ns[idx],
                    q_obs=trace.q_obs,
                    final_gap=trace.final_gap,
                )
            )
    base = np.mean([r.wall_ns_to_target for r in rows if r.workers == 1])
    summary = {}
    for w in sorted(set(cfg.workers)):
        wall = np.mean([r.wall_ns_to_target for r in rows if r.workers == w])
        epochs = np.mean([r.epochs_to_target for r in rows if r.workers == w])
        qs = max(r.q_obs for r in rows if r.workers == w)
        summary[w] = {"speedup": float(base / wall), "epochs": float(epochs), "q_obs_max": qs}
    return rows, summary


def cmd_speedup(cfg: ExperimentConfig, out_override: Optional[str] = None) -> int:
    p = build_problem(cfg)
    sched = build_schedule(cfg, p)
    out = resolve_out_dir(cfg, out_override)
    info = lipschitz_params(p)
    admissible = q_bound(sched.regime, info.l_res_bar)
    rows, summary = measure_speedup(p, sched, cfg)
    path = out / "speedup.csv"
    with open(path, "w") as fh:
        fh.write("workers,seed,epochs_to_target,wall_ns_to_target,q_obs,final_gap\n")
        for r in rows:
            fh.write(
                f"{r.workers},{r.seed},{r.epochs_to_target!r},{r.wall_ns_to_target},"
                f"{r.q_obs},{r.final_gap!r}\n"
            )
    print(f"admissible staleness bound: {admissible:.3f} (l_res_bar={info.l_res_bar:.3f})")
    for w, row in summary.items():
        print(
            f"workers={w}: speedup x{row['speedup']:.2f}, "
            f"epochs to gap<={cfg.target_gap:g}: {row['epochs']:.1f}, "
            f"max q_obs={row['q_obs_max']}"
        )
    print(f"table -> {path}")
    return 0


# ------------------------------------------------------------ property suites


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    detail: str


def matrix_report(n_values: Sequence[int] = (19, 50, 200)) -> List[PropertyCheck]:
    """Product identity, row stochasticity, closed forms, staleness goodness."""
    checks: List[PropertyCheck] = []
    t_samples = [0, 1, 2, 5, 17, 101, 999, 4999, 10_000]
    schedules = []
    for n in n_values:
        schedules += [
            Schedule(SC_LINEAR, n, mu=1.0),
            Schedule(SC_LINEAR, n, mu=0.01),
            Schedule(SC_SUBLINEAR, n, mu=0.5),
            Schedule(CONVEX, n),
        ]

    worst = 0.0
    for sched in schedules:
        for t in t_samples:
            dev = b_matrix(t + 1, sched).max_abs_diff(a_matrix(t, sched) @ b_matrix(t, sched))
            worst = max(worst, dev)
    checks.append(
        PropertyCheck("product-recurrence", worst < ALGEBRA_TOL, f"max deviation {worst:.2e}")
    )

    worst = 0.0
    convex_exact = True
    for sched in schedules:
        for t in t_samples:
            for m in (a_matrix(t, sched), b_matrix(t, sched)):
                worst = max(worst, abs(m.a11 + m.a12 - 1.0), abs(m.a21 + m.a22 - 1.0))
                if sched.tag == CONVEX and (m.a21, m.a22) != (0.0, 1.0):
                    convex_exact = False
    checks.append(
        PropertyCheck("row-stochastic", worst < ALGEBRA_TOL, f"max row-sum error {worst:.2e}")
    )
    checks.append(PropertyCheck("convex-lower-row", convex_exact, "second row is exactly (0, 1)"))

    worst = 0.0
    for sched in schedules:
        if sched.tag == CONVEX:
            continue
        a = a_matrix(0, sched)
        for t in [1, 10, 1000, 100_000]:
            worst = max(worst, b_matrix(t, sched).max_abs_diff(mat2_pow(a, t)))
    checks.append(
        PropertyCheck("eigen-vs-squaring", worst < 1e-11, f"max deviation {worst:.2e}")
    )

    worst = 0.0
    for sched in schedules:
        if sched.tag != CONVEX:
            continue
        acc = Mat2.identity()
        for t in range(0, 600):
            dev = b_matrix(t, sched).max_abs_diff(acc)
            worst = max(worst, dev)
            acc = a_matrix(t, sched) @ acc
    checks.append(
        PropertyCheck("convex-closed-form", worst < ALGEBRA_TOL, f"max deviation {worst:.2e}")
    )

    good = True
    for n in n_values:
        q = math.floor(min((n - 8) / 12.0, (2 * n - 4) / 10.0, n / 20.0))
        for sched in schedules:
            if sched.n != n:
                continue
            for t in [0, 1, q, 2 * q, 137, 1009, 5000]:
                for s in range(max(t - 2 * q, 0), t + 2 * q + 1):
                    if not check_goodness(t, s, sched):
                        good = False
    checks.append(
        PropertyCheck(
            "staleness-goodness", good, "bounded transfer over the admissible window"
        )
    )
    return checks


def equivalence_report(
    n_values: Sequence[int] = (5, 50),
    T: int = 500,
    problems_per_case: int = 2,
) -> List[PropertyCheck]:
    """Basic-vs-efficient and single-worker-async-vs-sequential deviations."""
    from ascd.sampling import coord_at, split_stream, uniform_at
    from ascd.seq_engine import (
        BasicState,
        EfficientState,
        basic_iterates,
        efficient_iterates,
        step_basic,
        step_efficient,
    )

    checks: List[PropertyCheck] = []
    worst = 0.0
    for n in n_values:
        for rep in range(problems_per_case):
            for tag in (SC_LINEAR, SC_SUBLINEAR, CONVEX):
                seed = split_stream(1234, 1000 * n + 10 * rep + hash(tag) % 10)
                p = make_sparse_quadratic(n, min(4, n), seed=seed, mu_target=0.5)
                if tag == CONVEX:
                    sched = Schedule(CONVEX, n)
                else:
                    phi_cap = 5.0 / T
                    mu_cap = min((phi_cap * n) ** 2 * 20.0 / 3.0, 1.0)
                    sched = Schedule(tag, n, mu=mu_cap * (0.1 + 0.9 * uniform_at(seed, 1)))
                rng = np.random.default_rng(seed & 0xFFFF)
                x0 = rng.standard_normal(n)
                sb = BasicState.from_point(x0)
                se = EfficientState.from_point(x0)
                for t in range(T):
                    k = coord_at(seed, t, n)
                    sb = step_basic(sb, p, sched, k)
                    step_efficient(se, p, sched, k)
                xb, yb, zb = basic_iterates(sb)
                xe, ye, ze = efficient_iterates(se, sched)
                scale = 1.0 + max(np.abs(v).max() for v in (xb, yb, zb))
                dev = max(np.abs(a - b).max() for a, b in [(xb, xe), (yb, ye), (zb, ze)])
                worst = max(worst, dev / scale)
    checks.append(
        PropertyCheck(
            "basic-vs-efficient", worst <= 1e-9, f"max relative deviation {worst:.2e}"
        )
    )

    worst = 0.0
    for n in n_values:
        p = make_sparse_quadratic(max(n, 2), min(4, n), seed=7, mu_target=0.5)
        sched = Schedule(SC_LINEAR, p.n, mu=min(0.5, (5.0 / T * p.n) ** 2 * 20.0 / 3.0))
        x0 = np.ones(p.n)
        seq = run_sequential(p, sched, T=T, seed=3, mode="efficient", x0=x0)
        _, tr = run_async(p, sched, AsyncConfig(workers=1, T=T, seed=3), x0=x0)
        scale = 1.0 + np.abs(seq.final_x).max()
        worst = max(worst, np.abs(seq.final_x - tr.final_x).max() / scale)
    checks.append(
        PropertyCheck(
            "async1-vs-sequential", worst <= 1e-9, f"max relative deviation {worst:.2e}"
        )
    )
    return checks


def _print_report(checks: List[PropertyCheck]) -> int:
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return 0 if all(c.passed for c in checks) else 1


def cmd_check_matrices(cfg: Optional[ExperimentConfig] = None, out_override=None) -> int:
    return _print_report(matrix_report())


def cmd_equivalence(cfg: Optional[ExperimentConfig] = None, out_override=None) -> int:
    return _print_report(equivalence_report())
