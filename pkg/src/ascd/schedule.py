"""Per-step parameter schedules for the accelerated coordinate solver.

Each solver step mixes three iterate sequences using four scalars,
here called ``phi`` (step weight), ``psi`` (averaging weight),
``varphi`` (pull weight) and ``gamma`` (proximal coefficient).  Three
regimes are supported:

* ``sc_linear``    -- strongly convex, linear rate, constant weights
                      built from ``sqrt(mu)``;
* ``sc_sublinear`` -- strongly convex, sublinear rate, constant
                      weights built from ``mu**(2/3)`` (admits more
                      asynchrony);
* ``convex``       -- merely convex, diminishing step weight
                      ``2 / (t + t0)``.

``Regime`` carries the hypotheses under which the convergence-rate
guarantees are stated (dimension at least 19 among them); ``Schedule``
itself only validates the weight algebra, so the engines can be
exercised at any dimension.  ``q_bound`` computes the admissible
staleness budget for the asynchronous solver in each regime.

All functions are pure; a :class:`Schedule` is immutable after
construction and safe to share across threads and processes.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

SC_LINEAR = "sc_linear"
SC_SUBLINEAR = "sc_sublinear"
CONVEX = "convex"
REGIME_TAGS = frozenset({SC_LINEAR, SC_SUBLINEAR, CONVEX})

#: Smallest dimension for which the rate guarantees are stated.
MIN_DIMENSION = 19

#: Default slack parameter for the sublinear/convex staleness bounds.
DEFAULT_EPSILON = 0.1

#: Basis determinants below this leave too few float64 digits for the
#: change-of-basis state to be meaningful (see ``conditioning_horizon``).
CONDITIONING_DET_FLOOR = 1e-14


@dataclass(frozen=True)
class StepParams:
    """Scalar weights driving one solver step; all lie in [0, 1] except gamma."""

    phi: float
    psi: float
    varphi: float
    gamma: float


@dataclass(frozen=True)
class Regime:
    """Rate-guarantee regime: tag, strong-convexity parameter, dimension, slack.

    ``mu`` must lie in (0, 1] for the strongly convex tags and equal 0
    for ``convex``; the dimension must be at least :data:`MIN_DIMENSION`.
    ``epsilon`` (slack in the sublinear/convex staleness bounds and rate
    exponents) must lie in (0, 1/3).
    """

    tag: str
    n: int
    mu: float = 0.0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.tag not in REGIME_TAGS:
            raise ValueError(f"unknown regime tag {self.tag!r}")
        if self.n < MIN_DIMENSION:
            raise ValueError(f"dimension n={self.n} below minimum {MIN_DIMENSION}")
        if self.tag == CONVEX:
            if self.mu != 0.0:
                raise ValueError("convex regime requires mu = 0")
        else:
            if not 0.0 < self.mu <= 1.0:
                raise ValueError(f"strongly convex regime requires 0 < mu <= 1, got {self.mu}")
        if not 0.0 < self.epsilon < 1.0 / 3.0:
            raise ValueError(f"epsilon must lie in (0, 1/3), got {self.epsilon}")


def sc_linear_params(n: int, mu: float) -> StepParams:
    """Constant weights for the linear-rate strongly convex regime.

    phi = sqrt(3 mu) / (sqrt(20) n), gamma = sqrt(20 mu / 3),
    varphi = 1 - phi, psi = 1 / (1 + phi).
    """
    _check_sc(n, mu)
    return _sc_linear_weights(n, mu)


def sc_sublinear_params(n: int, mu: float) -> StepParams:
    """Constant weights for the sublinear strongly convex regime.

    phi = (3 mu / 20)**(2/3) / n and gamma = (20/3) sqrt(n phi).
    """
    _check_sc(n, mu)
    return _sc_sublinear_weights(n, mu)


def convex_params(n: int, t: int, t0: Optional[int] = None) -> StepParams:
    """Diminishing weights for the merely convex regime at step ``t``.

    phi_t = 2 / (t + t0) with t0 = 2n + 2 unless overridden
    (any t0 >= 2(n + 1) is admissible), psi_t = 1 - phi_t, varphi = 1,
    gamma_t = (20/3) sqrt(n phi_t).
    """
    if t < 0:
        raise ValueError(f"step index must be nonnegative, got {t}")
    t0 = _convex_t0(n, t0)
    return _convex_weights(n, t, t0)


def q_bound(regime: Regime, l_res_bar: float) -> float:
    """Admissible staleness budget (real-valued; callers floor it).

    For ``sc_linear`` the bound is
    ``min{ sqrt(n) mu^(1/4) / (38 L), sqrt(n) / (37 L), sqrt(n)/17, n/50 }``
    with ``L = l_res_bar``; the other regimes replace the first term by
    ``sqrt(epsilon n) / (17 L)``.
    """
    if l_res_bar <= 0.0:
        raise ValueError(f"l_res_bar must be positive, got {l_res_bar}")
    rn = math.sqrt(regime.n)
    if regime.tag == SC_LINEAR:
        first = rn * regime.mu ** 0.25 / (38.0 * l_res_bar)
    else:
        first = math.sqrt(regime.epsilon * regime.n) / (17.0 * l_res_bar)
    return min(first, rn / (37.0 * l_res_bar), rn / 17.0, regime.n / 50.0)


@dataclass(frozen=True)
class Schedule:
    """Step-parameter sequence for one regime, indexed by step ``t``.

    The strongly convex regimes are constant in ``t``; the convex
    regime diminishes.  Constructing a ``Schedule`` directly validates
    only the weight algebra (any ``n >= 1``); use :meth:`from_regime`
    to additionally enforce the rate-guarantee hypotheses.
    ``convex_t0`` overrides the convex offset (default ``2n + 2``).
    """

    tag: str
    n: int
    mu: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    convex_t0: Optional[int] = None
    _constant: Optional[StepParams] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.tag not in REGIME_TAGS:
            raise ValueError(f"unknown regime tag {self.tag!r}")
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if self.tag == SC_LINEAR:
            _check_mu(self.mu)
            p = _sc_linear_weights(self.n, self.mu)
        elif self.tag == SC_SUBLINEAR:
            _check_mu(self.mu)
            p = _sc_sublinear_weights(self.n, self.mu)
        else:
            p = None
            _convex_t0(self.n, self.convex_t0)  # validate the override now
        object.__setattr__(self, "_constant", p)

    @classmethod
    def from_regime(cls, regime: Regime, convex_t0: Optional[int] = None) -> "Schedule":
        """Schedule for a validated :class:`Regime`."""
        return cls(
            tag=regime.tag,
            n=regime.n,
            mu=regime.mu,
            epsilon=regime.epsilon,
            convex_t0=convex_t0,
        )

    @property
    def regime(self) -> Regime:
        """The validated regime (requires the rate-guarantee hypotheses)."""
        return Regime(tag=self.tag, n=self.n, mu=self.mu, epsilon=self.epsilon)

    def params(self, t: int) -> StepParams:
        """Weights for step ``t``."""
        if self._constant is not None:
            if t < 0:
                raise ValueError(f"step index must be nonnegative, got {t}")
            return self._constant
        return convex_params(self.n, t, self.convex_t0)

    def potential_weight(self, t: int) -> float:
        """Coefficient ``zeta_t`` of the distance term in the decay diagnostic.

        ``zeta_{t+1} = (n phi_t gamma_t / 2)(1 - n phi_t / 6)``, the
        half-damped form used for run traces; ``zeta_0`` reuses the
        step-0 weights.
        """
        p = self.params(max(t - 1, 0))
        nphi = self.n * p.phi
        return 0.5 * nphi * p.gamma * (1.0 - nphi / 6.0)

    def conditioning_horizon(self) -> float:
        """Step count beyond which the change-of-basis state is untrustworthy.

        The basis determinant decays like ``lam**t`` in the strongly
        convex regimes, and the stored iterates amplify rounding error
        by its inverse; this returns the step at which the determinant
        reaches :data:`CONDITIONING_DET_FLOOR`.  The convex regime
        decays only polynomially and is unconstrained in practice.
        """
        if self.tag == CONVEX:
            return math.inf
        phi = self.params(0).phi
        lam = (1.0 - phi) / (1.0 + phi)
        return math.log(CONDITIONING_DET_FLOOR) / math.log(lam)


def _sc_linear_weights(n: int, mu: float) -> StepParams:
    phi = math.sqrt(3.0 * mu) / (math.sqrt(20.0) * n)
    return StepParams(
        phi=phi,
        psi=1.0 / (1.0 + phi),
        varphi=1.0 - phi,
        gamma=math.sqrt(20.0 * mu / 3.0),
    )


def _sc_sublinear_weights(n: int, mu: float) -> StepParams:
    phi = (3.0 * mu / 20.0) ** (2.0 / 3.0) / n
    return StepParams(
        phi=phi,
        psi=1.0 / (1.0 + phi),
        varphi=1.0 - phi,
        gamma=(20.0 / 3.0) * math.sqrt(n * phi),
    )


def _convex_weights(n: int, t: int, t0: int) -> StepParams:
    phi = 2.0 / (t + t0)
    return StepParams(
        phi=phi,
        psi=1.0 - phi,
        varphi=1.0,
        gamma=(20.0 / 3.0) * math.sqrt(n * phi),
    )


def _convex_t0(n: int, t0: Optional[int]) -> int:
    if t0 is None:
        return 2 * n + 2
    if t0 < 2 * (n + 1):
        raise ValueError(f"t0 must be at least 2(n+1) = {2 * (n + 1)}, got {t0}")
    return t0


def _check_mu(mu: float) -> None:
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"strongly convex weight formulas require 0 < mu <= 1, got {mu}")


def _check_sc(n: int, mu: float) -> None:
    _check_mu(mu)
    if n < MIN_DIMENSION:
        raise ValueError(f"dimension n={n} below minimum {MIN_DIMENSION}")
