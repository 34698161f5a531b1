import math

import pytest

from ascd.schedule import (
    CONVEX,
    SC_LINEAR,
    SC_SUBLINEAR,
    Regime,
    Schedule,
    convex_params,
    q_bound,
    sc_linear_params,
    sc_sublinear_params,
)


def test_sc_linear_values():
    p = sc_linear_params(100, 0.01)
    assert p.phi == pytest.approx(3.8729833462074170e-04, rel=1e-14)
    assert p.gamma == pytest.approx(0.2581988897471611, rel=1e-14)
    assert p.psi == pytest.approx(1.0 / (1.0 + p.phi), rel=1e-15)
    assert p.varphi == 1.0 - p.phi


@pytest.mark.parametrize("n", [19, 100, 1000])
@pytest.mark.parametrize("mu", [1e-4, 0.01, 0.3, 1.0])
def test_sc_linear_step_over_gamma_identity(n, mu):
    # n * phi / gamma collapses to the constant 3/20 for every valid input
    p = sc_linear_params(n, mu)
    assert n * p.phi / p.gamma == pytest.approx(3.0 / 20.0, rel=1e-12)


def test_sc_sublinear_values():
    p = sc_sublinear_params(100, 0.01)
    assert p.phi == pytest.approx(1.3103706971044485e-04, rel=1e-13)
    assert p.gamma == pytest.approx(20.0 / 3.0 * math.sqrt(100 * p.phi), rel=1e-14)


@pytest.mark.parametrize("n", [19, 100, 1000])
@pytest.mark.parametrize("mu", [1e-4, 0.01, 0.3, 1.0])
def test_sc_sublinear_gamma_and_step_bound(n, mu):
    p = sc_sublinear_params(n, mu)
    assert p.gamma == pytest.approx(20.0 / 3.0 * math.sqrt(n * p.phi), rel=1e-12)
    assert n * p.phi <= 1.0


def test_convex_first_step():
    p = convex_params(10, 0)
    assert p.phi == pytest.approx(1.0 / 11.0, rel=1e-15)
    assert p.psi == pytest.approx(10.0 / 11.0, rel=1e-15)
    assert p.varphi == 1.0


def test_convex_step_weight_vanishes():
    n = 19
    values = [convex_params(n, t).phi for t in [0, 10, 100, 10_000, 1_000_000]]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-5


@pytest.mark.parametrize("n", [19, 100, 1000])
def test_convex_step_ratio_lower_bound(n):
    for t in [0, 1, 5, 50, 500, 5000]:
        phi_t = convex_params(n, t).phi
        phi_next = convex_params(n, t + 1).phi
        assert phi_next / phi_t >= 1.0 - phi_t / 2.0 - 1e-15


@pytest.mark.parametrize(
    "make",
    [
        lambda n: Schedule(SC_LINEAR, n, mu=0.05),
        lambda n: Schedule(SC_SUBLINEAR, n, mu=0.05),
        lambda n: Schedule(CONVEX, n),
    ],
)
@pytest.mark.parametrize("n", [19, 100, 1000])
def test_weight_ranges_and_monotonicity(make, n):
    sched = make(n)
    prev_phi = None
    for t in list(range(0, 200)) + [1000, 10_000, 100_000]:
        p = sched.params(t)
        assert 0.0 <= p.phi <= 1.0 / (n + 1)
        assert 0.0 <= p.psi <= 1.0
        assert 0.0 <= p.varphi <= 1.0
        if prev_phi is not None:
            assert p.phi <= prev_phi
        prev_phi = p.phi


@pytest.mark.parametrize("tag", [SC_LINEAR, SC_SUBLINEAR])
@pytest.mark.parametrize("n", [19, 100, 1000])
@pytest.mark.parametrize("mu", [0.01, 0.5, 1.0])
def test_sc_proximal_constraints(tag, n, mu):
    sched = Schedule(tag, n, mu=mu)
    p = sched.params(0)
    assert n * p.phi * p.gamma <= mu + 1e-12
    assert (3.0 / 20.0) * p.gamma >= n * p.phi - 1e-12


@pytest.mark.parametrize("n", [19, 100, 1000])
def test_convex_proximal_constraint(n):
    sched = Schedule(CONVEX, n)
    for t in [0, 1, 10, 1000, 100_000]:
        p = sched.params(t)
        assert (3.0 / 20.0) * p.gamma >= n * p.phi - 1e-12


def test_q_bound_sc_linear_value():
    regime = Regime(SC_LINEAR, n=400, mu=1.0)
    assert q_bound(regime, 1.0) == pytest.approx(20.0 / 38.0, rel=1e-15)


def test_q_bound_vanishes_with_epsilon():
    values = [
        q_bound(Regime(CONVEX, n=400, epsilon=eps), 1.0) for eps in [0.3, 0.1, 1e-4, 1e-10]
    ]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-4


@pytest.mark.parametrize(
    "regime",
    [
        Regime(SC_LINEAR, n=100, mu=0.2),
        Regime(SC_SUBLINEAR, n=100, mu=0.2),
        Regime(CONVEX, n=100),
        Regime(SC_LINEAR, n=5000, mu=1.0),
    ],
)
@pytest.mark.parametrize("l_res_bar", [0.1, 1.0, 10.0])
def test_q_bound_never_exceeds_n_over_50(regime, l_res_bar):
    assert q_bound(regime, l_res_bar) <= regime.n / 50.0


def test_regime_validation():
    with pytest.raises(ValueError):
        Regime(SC_LINEAR, n=18, mu=0.5)
    with pytest.raises(ValueError):
        Regime(SC_LINEAR, n=100, mu=0.0)
    with pytest.raises(ValueError):
        Regime(SC_LINEAR, n=100, mu=1.5)
    with pytest.raises(ValueError):
        Regime(CONVEX, n=100, mu=0.5)
    with pytest.raises(ValueError):
        Regime(CONVEX, n=100, epsilon=0.5)
    with pytest.raises(ValueError):
        Regime("unknown", n=100)


def test_params_factory_validation():
    with pytest.raises(ValueError):
        sc_linear_params(18, 0.5)
    with pytest.raises(ValueError):
        sc_linear_params(100, -0.1)
    with pytest.raises(ValueError):
        sc_sublinear_params(100, 0.0)
    with pytest.raises(ValueError):
        convex_params(100, -1)
    with pytest.raises(ValueError):
        convex_params(100, 0, t0=100)


def test_convex_t0_override():
    sched = Schedule(CONVEX, 19, convex_t0=100)
    assert sched.params(0).phi == pytest.approx(2.0 / 100.0, rel=1e-15)
    # default offset is 2n + 2
    assert Schedule(CONVEX, 19).params(0).phi == pytest.approx(2.0 / 40.0, rel=1e-15)


def test_from_regime_round_trip():
    regime = Regime(SC_SUBLINEAR, n=50, mu=0.3, epsilon=0.2)
    sched = Schedule.from_regime(regime)
    assert sched.regime == regime
