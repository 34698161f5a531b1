"""Sequential solvers: the full-vector reference iteration and the
single-coordinate change-of-basis iteration.

The basic iteration keeps the three iterate vectors ``(x, y, z)``
explicitly and mixes all of them every step (O(n) per step); it is the
readable reference and test oracle.  The efficient iteration keeps
``(u, v)`` with ``(y_k, z_k) = B_t (u_k, v_k)`` and touches a single
coordinate per step (O(s + 1) for s-sparse gradients); driven by the
same coordinate and gradient streams, its reconstructed trajectory
coincides with the basic one.

One basic step at time ``t`` (coordinate ``k``, gradient ``g``):

    w       = varphi_t z + (1 - varphi_t) y
    z'      = w,  except  z'_k = w_k - g / gamma_t
    x'      = y,  except  x'_k = y_k + n phi_t (z'_k - w_k)
    y'      = psi_{t+1} x' + (1 - psi_{t+1}) z'

``g_override`` lets callers drive either engine with an externally
chosen (possibly stale) gradient value, which is how the equivalence
tests pin both engines to one gradient stream.

Numerical envelope: the stored ``(u, v)`` grow like ``1 / det(B_t)``
(``((1+phi)/(1-phi))**t`` in the strongly convex regimes), so the
reconstruction loses about ``eps / det(B_t)`` of absolute accuracy.
Keep ``2 phi t`` a few dozen at most; at the dimensions the rate
guarantees cover (``phi <= 0.02``) this is no restriction in practice.
"""

import time
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ascd.basis import b_inverse, b_matrix, d_vector
from ascd.problems import Problem
from ascd.sampling import coord_at
from ascd.schedule import Schedule
from ascd.trace import RunTrace, potential_value

MODES = ("basic", "efficient")


@dataclass
class BasicState:
    """Full iterate triple; steps return fresh states."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: int = 0

    @classmethod
    def from_point(cls, x0: np.ndarray) -> "BasicState":
        x0 = np.asarray(x0, dtype=np.float64)
        return cls(x=x0.copy(), y=x0.copy(), z=x0.copy(), t=0)


@dataclass
class EfficientState:
    """Change-of-basis iterate pair; steps update it in place."""

    u: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def from_point(cls, x0: np.ndarray) -> "EfficientState":
        x0 = np.asarray(x0, dtype=np.float64)
        return cls(u=x0.copy(), v=x0.copy(), t=0)


def step_basic(
    state: BasicState,
    p: Problem,
    sched: Schedule,
    k: int,
    g_override: Optional[float] = None,
) -> BasicState:
    """One reference step on coordinate ``k``; pure (returns a new state)."""
    pr = sched.params(state.t)
    pr_next = sched.params(state.t + 1)
    w = pr.varphi * state.z + (1.0 - pr.varphi) * state.y
    g = p.grad_coord(state.y, k) if g_override is None else g_override
    dz = -g / pr.gamma
    z_new = w
    z_new[k] = z_new[k] + dz
    x_new = state.y.copy()
    x_new[k] += sched.n * pr.phi * dz
    y_new = pr_next.psi * x_new + (1.0 - pr_next.psi) * z_new
    return BasicState(x=x_new, y=y_new, z=z_new, t=state.t + 1)


def step_efficient(
    state: EfficientState,
    p: Problem,
    sched: Schedule,
    k: int,
    g_override: Optional[float] = None,
) -> EfficientState:
    """One change-of-basis step on coordinate ``k``; updates ``state`` in place.

    Reconstructs the working iterate lazily on the gradient's support,
    so only ``u_k``/``v_k`` entries on that support are read and only
    coordinate ``k`` is written.
    """
    t = state.t
    b = b_matrix(t, sched)
    if g_override is None:
        idx = p.support(k)
        y_support = b.a11 * state.u[idx] + b.a12 * state.v[idx]
        g = p.grad_from_support(k, y_support)
    else:
        g = g_override
    dz = -g / sched.params(t).gamma
    du, dv = _commit_direction(t, sched, dz)
    state.u[k] += du
    state.v[k] += dv
    state.t = t + 1
    return state


def _commit_direction(t: int, sched: Schedule, dz: float) -> Tuple[float, float]:
    """Shared-coordinate increment ``inverse(B_{t+1}) D_t dz``."""
    binv = b_inverse(t + 1, sched)
    d = d_vector(t, sched)
    return (
        (binv.a11 * d.d1 + binv.a12 * d.d2) * dz,
        (binv.a21 * d.d1 + binv.a22 * d.d2) * dz,
    )


def reconstruct_yz(state: EfficientState, sched: Schedule) -> Tuple[np.ndarray, np.ndarray]:
    """Working iterates ``(y, z) = B_t (u, v)`` coordinate by coordinate."""
    b = b_matrix(state.t, sched)
    y = b.a11 * state.u + b.a12 * state.v
    z = b.a21 * state.u + b.a22 * state.v
    return y, z


def recover_x(y: np.ndarray, z: np.ndarray, psi: float) -> np.ndarray:
    """Invert ``y = psi x + (1 - psi) z`` for ``x`` (requires ``psi > 0``)."""
    if psi <= 0.0:
        raise ValueError(f"averaging weight must be positive to recover x, got {psi}")
    return (y - (1.0 - psi) * z) / psi


def basic_iterates(state: BasicState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return state.x, state.y, state.z


def efficient_iterates(
    state: EfficientState, sched: Schedule
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(x, y, z)`` reconstructed from the change-of-basis state."""
    y, z = reconstruct_yz(state, sched)
    x = recover_x(y, z, sched.params(state.t).psi)
    return x, y, z


def run_sequential(
    p: Problem,
    sched: Schedule,
    T: int,
    seed: int,
    mode: str = "efficient",
    x0: Optional[np.ndarray] = None,
    record_stride: int = 1,
    grad_source: Optional[Callable[[int, int], float]] = None,
) -> RunTrace:
    """Run ``T`` steps with rank-keyed uniform coordinate draws.

    Records the gap and potential at step 0, every ``record_stride``
    steps, and at step ``T``.  ``grad_source(t, k)``, when given,
    replaces the problem's gradient oracle (stale-gradient replays).
    The final iterate is exposed as ``trace.final_x``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if T < 0:
        raise ValueError(f"step count must be nonnegative, got {T}")
    if not p.is_unit_diagonal:
        raise ValueError("problem must be rescaled to unit diagonal before solving")
    if p.n != sched.n:
        raise ValueError(f"problem dimension {p.n} != schedule dimension {sched.n}")
    if mode == "efficient":
        warn_if_beyond_horizon(sched, T)
    if x0 is None:
        x0 = np.zeros(p.n)

    trace = RunTrace()
    start = time.perf_counter_ns()

    def record(t: int, x: np.ndarray, z: np.ndarray) -> None:
        gap = p.value(x)
        pot = potential_value(gap, z, p.minimizer, sched.potential_weight(t))
        trace.record(t, gap, pot, time.perf_counter_ns() - start)

    record_at = _record_steps(T, record_stride)
    if mode == "basic":
        state_b = BasicState.from_point(x0)
        record(0, state_b.x, state_b.z)
        for t in range(T):
            k = coord_at(seed, t, p.n)
            g = grad_source(t, k) if grad_source is not None else None
            state_b = step_basic(state_b, p, sched, k, g_override=g)
            if state_b.t in record_at:
                record(state_b.t, state_b.x, state_b.z)
        trace.final_x = state_b.x.copy()
        return trace

    state_e = EfficientState.from_point(x0)
    record(0, x0, x0)
    for t in range(T):
        k = coord_at(seed, t, p.n)
        g = grad_source(t, k) if grad_source is not None else None
        step_efficient(state_e, p, sched, k, g_override=g)
        if state_e.t in record_at:
            x, _, z = efficient_iterates(state_e, sched)
            record(state_e.t, x, z)
    x, _, _ = efficient_iterates(state_e, sched)
    trace.final_x = x.copy()
    return trace


def _record_steps(T: int, stride: int) -> frozenset:
    if stride < 1:
        raise ValueError(f"record stride must be positive, got {stride}")
    steps = set(range(stride, T + 1, stride))
    steps.add(T)
    steps.discard(0)
    return frozenset(steps)


def warn_if_beyond_horizon(sched: Schedule, T: int) -> None:
    """Warn when a run is long enough for basis rounding noise to dominate."""
    horizon = sched.conditioning_horizon()
    if T > horizon:
        warnings.warn(
            f"T={T} exceeds the change-of-basis conditioning horizon "
            f"(~{horizon:.0f} steps at this step weight); late iterates will be "
            f"dominated by rounding noise",
            RuntimeWarning,
            stacklevel=3,
        )
