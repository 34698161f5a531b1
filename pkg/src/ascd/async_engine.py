"""Asynchronous shared-memory version of the efficient iteration.

Worker processes (forked, so they share ``u``/``v`` through raw shared
memory) repeat the following loop until ``T`` updates have committed:

1.  fetch-and-increment the global counter to obtain a rank ``t``
    (optionally claiming a contiguous batch of ranks per counter touch);
2.  draw the coordinate ``k_t`` from the rank-keyed stream, so the
    coordinate at rank ``t`` is reproducible regardless of scheduling;
3.  read the needed ``u``/``v`` entries without locks -- reads may mix
    components from different historical states (inconsistent reads are
    expected; each aligned 64-bit load is individually tear-free);
4.  evaluate the basis matrices for ``t`` and ``t+1`` (closed forms);
5.  reconstruct the working point on the gradient's support, evaluate
    the coordinate gradient and the proximal displacement;
6.  commit: lock ``u_k``, read-add-write, unlock; then the same for
    ``v_k`` -- two separate critical sections per update, each guarded
    by that coordinate's own lock;
7.  log ``(rank, coordinate, start_ns, commit_ns, worker, delta_z)``
    into a rank-indexed slot of a preallocated shared log (one writer
    per slot, hence contention-free).

Staleness control: with ``q_throttle = c`` set, admission proceeds in
FIFO rank order through generations of ``c + 1`` updates; a generation
begins only once the previous one has fully committed.  An update may
therefore begin only while at most ``c`` others are in flight, and no
update's computation interval can intersect more than ``c`` others.
This is a measurement instrument for experiments; unthrottled runs pay
no gating cost.  With counter batching of ``r`` ranks per counter
touch, the effective staleness budget grows to ``q * r``.

After the run, the commit log is replayed in start (rank) order to
rebuild the analyzed trajectory: accumulating the logged updates over
ranks ``0..t-1`` and mapping through the basis at ``t`` yields the
iterate the convergence statements refer to, and the accumulation over
all ``T`` ranks lands exactly on the final shared-memory state.

Numerical envelope: stale gradients put a noise floor under the
displacement sizes, so in the strongly convex regimes the stored
``(u, v)`` keep growing geometrically once the gap reaches that floor;
past the schedule's ``conditioning_horizon`` the feedback through the
shared state amplifies rounding noise without bound.  Both run drivers
warn when ``T`` crosses the horizon.
"""

import multiprocessing as mp
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ascd.basis import b_matrix
from ascd.problems import Problem
from ascd.sampling import coord_at
from ascd.schedule import Schedule
from ascd.seq_engine import (
    EfficientState,
    _commit_direction,
    _record_steps,
    efficient_iterates,
    warn_if_beyond_horizon,
)
from ascd.trace import RunTrace, potential_value

#: tolerance for the start-order accumulation identity checks
ACCUMULATION_TOL = 1e-10


@dataclass(frozen=True)
class AsyncConfig:
    """Run parameters for the asynchronous solver.

    ``q_throttle`` caps in-flight overlap (None disables gating);
    ``counter_batch`` claims that many ranks per counter touch;
    ``work_delay_ns`` busy-waits inside each update (test hook for
    forcing overlap); ``race_check`` enables commit-time lock-discipline
    assertions (counts write-write conflicts on the shared entries).
    """

    workers: int
    T: int
    seed: int = 0
    q_throttle: Optional[int] = None
    counter_batch: Optional[int] = None
    record_stride: Optional[int] = None
    work_delay_ns: int = 0
    race_check: bool = False
    gate_poll_s: float = 0.02

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"need at least one worker, got {self.workers}")
        if self.T < 0:
            raise ValueError(f"update count must be nonnegative, got {self.T}")
        if self.q_throttle is not None and self.q_throttle < 0:
            raise ValueError(f"q_throttle must be nonnegative, got {self.q_throttle}")
        if self.counter_batch is not None and self.counter_batch < 1:
            raise ValueError(f"counter_batch must be positive, got {self.counter_batch}")


@dataclass
class CommitLog:
    """Per-update records indexed by rank (start order)."""

    coord: np.ndarray
    start_ns: np.ndarray
    commit_ns: np.ndarray
    worker: np.ndarray
    delta_z: np.ndarray

    def __len__(self) -> int:
        return len(self.coord)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("rank,coord,start_ns,commit_ns,worker,delta_z\n")
            for t in range(len(self.coord)):
                fh.write(
                    f"{t},{self.coord[t]},{self.start_ns[t]},{self.commit_ns[t]},"
                    f"{self.worker[t]},{float(self.delta_z[t])!r}\n"
                )

    @classmethod
    def from_csv(cls, path) -> "CommitLog":
        rows = np.genfromtxt(
            path, delimiter=",", skip_header=1, dtype=None, encoding="utf-8"
        )
        rows = np.atleast_1d(rows)
        return cls(
            coord=np.array([r[1] for r in rows], dtype=np.int64),
            start_ns=np.array([r[2] for r in rows], dtype=np.int64),
            commit_ns=np.array([r[3] for r in rows], dtype=np.int64),
            worker=np.array([r[4] for r in rows], dtype=np.int32),
            delta_z=np.array([r[5] for r in rows], dtype=np.float64),
        )


class _SharedRun:
    """Everything the forked workers share; built once in the parent."""

    def __init__(self, p: Problem, sched: Schedule, cfg: AsyncConfig, x0: np.ndarray):
        ctx = mp.get_context("fork")
        n = p.n
        self.problem = p
        self.sched = sched
        self.cfg = cfg
        self.u_raw = ctx.RawArray("d", n)
        self.v_raw = ctx.RawArray("d", n)
        np.frombuffer(self.u_raw)[:] = x0
        np.frombuffer(self.v_raw)[:] = x0
        self.locks_u = [ctx.Lock() for _ in range(n)]
        self.locks_v = [ctx.Lock() for _ in range(n)]
        self.counter = ctx.RawValue("q", 0)
        self.counter_lock = ctx.Lock()
        # rank-indexed log slots; commit_ns == 0 marks a missing commit
        self.log_coord = ctx.RawArray("q", max(cfg.T, 1))
        self.log_start = ctx.RawArray("q", max(cfg.T, 1))
        self.log_commit = ctx.RawArray("q", max(cfg.T, 1))
        self.log_worker = ctx.RawArray("i", max(cfg.T, 1))
        self.log_dz = ctx.RawArray("d", max(cfg.T, 1))
        self.gate = ctx.Condition() if cfg.q_throttle is not None else None
        self.committed = ctx.RawValue("q", 0)
        if cfg.race_check:
            self.claim_u = ctx.RawArray("i", n)
            self.claim_v = ctx.RawArray("i", n)
            np.frombuffer(self.claim_u, dtype=np.int32)[:] = -1
            np.frombuffer(self.claim_v, dtype=np.int32)[:] = -1
            self.race_violations = ctx.RawValue("q", 0)
        self.ctx = ctx


def _claim_ranks(run: "_SharedRun", batch: int) -> int:
    with run.counter_lock:
        first = run.counter.value
        run.counter.value = first + batch
    return first


def _gate_wait(run: "_SharedRun", t: int, gen_size: int, poll: float) -> None:
    gen_start = (t // gen_size) * gen_size
    with run.gate:
        while run.committed.value < gen_start:
            run.gate.wait(poll)


def _worker_loop(run: "_SharedRun", wid: int) -> None:
    p = run.problem
    sched = run.sched
    cfg = run.cfg
    n = p.n
    u = np.frombuffer(run.u_raw)
    v = np.frombuffer(run.v_raw)
    batch = cfg.counter_batch or 1
    gen_size = (cfg.q_throttle + 1) if cfg.q_throttle is not None else 0
    seed = cfg.seed
    delay = cfg.work_delay_ns

    while True:
        first = _claim_ranks(run, batch)
        if first >= cfg.T:
            return
        for t in range(first, min(first + batch, cfg.T)):
            if gen_size:
                _gate_wait(run, t, gen_size, cfg.gate_poll_s)
            start_ns = time.monotonic_ns()
            k = coord_at(seed, t, n)
            b = b_matrix(t, sched)
            idx = p.support(k)
            y_support = b.a11 * u[idx] + b.a12 * v[idx]  # unlocked reads
            g = p.grad_from_support(k, y_support)
            dz = -g / sched.params(t).gamma
            du, dv = _commit_direction(t, sched, dz)
            if delay:
                target = time.monotonic_ns() + delay
                while time.monotonic_ns() < target:
                    pass
            if cfg.race_check:
                _commit_checked(run, u, v, k, du, dv, wid)
            else:
                with run.locks_u[k]:
                    u[k] = u[k] + du
                with run.locks_v[k]:
                    v[k] = v[k] + dv
            commit_ns = time.monotonic_ns()
            run.log_coord[t] = k
            run.log_start[t] = start_ns
            run.log_commit[t] = commit_ns
            run.log_worker[t] = wid
            run.log_dz[t] = dz
            if gen_size:
                with run.gate:
                    run.committed.value += 1
                    run.gate.notify_all()


def _commit_checked(run, u, v, k, du, dv, wid) -> None:
    """Read-modify-write under the locks, recording any concurrent claimant."""
    claim_u = np.frombuffer(run.claim_u, dtype=np.int32)
    claim_v = np.frombuffer(run.claim_v, dtype=np.int32)
    with run.locks_u[k]:
        if claim_u[k] != -1:
            run.race_violations.value += 1
        claim_u[k] = wid
        u[k] = u[k] + du
        claim_u[k] = -1
    with run.locks_v[k]:
        if claim_v[k] != -1:
            run.race_violations.value += 1
        claim_v[k] = wid
        v[k] = v[k] + dv
        claim_v[k] = -1


def run_async(
    p: Problem,
    sched: Schedule,
    cfg: AsyncConfig,
    x0: Optional[np.ndarray] = None,
) -> Tuple[EfficientState, RunTrace]:
    """Run ``cfg.T`` asynchronous updates over ``cfg.workers`` processes.

    Returns the final shared state and the trace rebuilt from the
    commit log in start order (``trace.q_obs`` holds the measured
    maximum overlap, ``trace.commit_log`` the raw log).  A worker crash
    or a missing commit raises ``RuntimeError``.
    """
    if not p.is_unit_diagonal:
        raise ValueError("problem must be rescaled to unit diagonal before solving")
    if p.n != sched.n:
        raise ValueError(f"problem dimension {p.n} != schedule dimension {sched.n}")
    warn_if_beyond_horizon(sched, cfg.T)
    if x0 is None:
        x0 = np.zeros(p.n)
    x0 = np.asarray(x0, dtype=np.float64)

    run = _SharedRun(p, sched, cfg, x0)
    if cfg.T > 0:
        procs = [
            run.ctx.Process(target=_worker_loop, args=(run, wid), daemon=True)
            for wid in range(cfg.workers)
        ]
        for proc in procs:
            proc.start()
        for proc in procs:
            proc.join()
        crashed = [proc.exitcode for proc in procs if proc.exitcode != 0]
        if crashed:
            raise RuntimeError(f"{len(crashed)} worker(s) exited abnormally: {crashed}")

    log = CommitLog(
        coord=np.frombuffer(run.log_coord, dtype=np.int64)[: cfg.T].copy(),
        start_ns=np.frombuffer(run.log_start, dtype=np.int64)[: cfg.T].copy(),
        commit_ns=np.frombuffer(run.log_commit, dtype=np.int64)[: cfg.T].copy(),
        worker=np.frombuffer(run.log_worker, dtype=np.int32)[: cfg.T].copy(),
        delta_z=np.frombuffer(run.log_dz, dtype=np.float64)[: cfg.T].copy(),
    )
    if cfg.T > 0 and not np.all(log.commit_ns > 0):
        missing = int(np.sum(log.commit_ns == 0))
        raise RuntimeError(f"incomplete run: {missing} of {cfg.T} ranks never committed")
    if cfg.race_check and run.race_violations.value:
        raise RuntimeError(
            f"detected {run.race_violations.value} unsynchronized write-write conflicts"
        )

    final = EfficientState(
        u=np.frombuffer(run.u_raw).copy(),
        v=np.frombuffer(run.v_raw).copy(),
        t=cfg.T,
    )
    trace = replay_trace(p, sched, cfg, log, x0)
    return final, trace


def replay_trace(
    p: Problem,
    sched: Schedule,
    cfg: AsyncConfig,
    log: CommitLog,
    x0: np.ndarray,
) -> RunTrace:
    """Rebuild the start-order trajectory from the commit log.

    Accumulates the logged updates rank by rank; the state after rank
    ``t-1`` mapped through the basis at ``t`` is the analyzed iterate.
    Wall times are the latest commit among the accumulated prefix,
    relative to the earliest start.
    """
    T = len(log)
    stride = cfg.record_stride or max(1, T // 256)
    record_at = _record_steps(T, stride) if T else frozenset()
    trace = RunTrace(q_obs=measure_overlap(log) if T else 0, commit_log=log)

    u = x0.copy()
    v = x0.copy()
    t_ref = int(log.start_ns.min()) if T else 0
    gap0 = p.value(x0)
    trace.record(0, gap0, potential_value(gap0, x0, p.minimizer, sched.potential_weight(0)), 0)
    prefix_commit = 0
    for t in range(T):
        k = int(log.coord[t])
        du, dv = _commit_direction(t, sched, float(log.delta_z[t]))
        u[k] += du
        v[k] += dv
        prefix_commit = max(prefix_commit, int(log.commit_ns[t]))
        if (t + 1) in record_at:
            state = EfficientState(u=u, v=v, t=t + 1)
            x, _, z = efficient_iterates(state, sched)
            gap = p.value(x)
            pot = potential_value(gap, z, p.minimizer, sched.potential_weight(t + 1))
            trace.record(t + 1, gap, pot, prefix_commit - t_ref)
    final_state = EfficientState(u=u, v=v, t=T)
    trace.final_x = efficient_iterates(final_state, sched)[0].copy() if T else x0.copy()
    return trace


def measure_overlap(log: CommitLog) -> int:
    """Maximum, over updates, of how many other updates' computation
    intervals intersect that update's ``[start, commit]`` interval."""
    T = len(log)
    if T == 0:
        raise ValueError("cannot measure overlap of an empty log")
    if np.any(log.commit_ns < log.start_ns):
        raise ValueError("malformed log: commit precedes start")
    starts = np.sort(log.start_ns)
    commits = np.sort(log.commit_ns)
    began_by_commit = np.searchsorted(starts, log.commit_ns, side="right")
    ended_before_start = np.searchsorted(commits, log.start_ns, side="left")
    return int(np.max(began_by_commit - ended_before_start - 1))


def finalize(final: EfficientState, sched: Schedule) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map the final shared state to the iterate triple ``(x, y, z)``."""
    return efficient_iterates(final, sched)


def accumulate_log(
    log: CommitLog, sched: Schedule, x0: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Start-order accumulation of all logged updates onto ``(u, v)``.

    Up to commutation of float additions this reproduces the final
    shared-memory state (within ``ACCUMULATION_TOL`` per entry).
    """
    u = np.asarray(x0, dtype=np.float64).copy()
    v = u.copy()
    for t in range(len(log)):
        k = int(log.coord[t])
        du, dv = _commit_direction(t, sched, float(log.delta_z[t]))
        u[k] += du
        v[k] += dv
    return u, v
