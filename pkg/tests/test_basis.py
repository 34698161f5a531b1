import math

import pytest

from ascd.basis import (
    ALGEBRA_TOL,
    INVERSE_TOL,
    Mat2,
    a_matrix,
    b_inverse,
    b_matrix,
    check_goodness,
    d_vector,
    mat2_pow,
    windowed_b_transfer,
)
from ascd.schedule import CONVEX, SC_LINEAR, SC_SUBLINEAR, Schedule

SCHEDULES = [
    Schedule(SC_LINEAR, 100, mu=0.01),
    Schedule(SC_LINEAR, 19, mu=1.0),
    Schedule(SC_SUBLINEAR, 50, mu=0.3),
    Schedule(CONVEX, 10),
    Schedule(CONVEX, 200),
]


def brute_b(t, sched):
    """Oracle: accumulate the per-step product factor by factor."""
    acc = Mat2.identity()
    for s in range(t):
        acc = a_matrix(s, sched) @ acc
    return acc


# ---------------------------------------------------------------- a_matrix


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t", [0, 1, 7, 100, 9999])
def test_a_matrix_rows_sum_to_one(sched, t):
    a = a_matrix(t, sched)
    assert abs(a.a11 + a.a12 - 1.0) < ALGEBRA_TOL
    assert abs(a.a21 + a.a22 - 1.0) < ALGEBRA_TOL


def test_a_matrix_convex_value():
    a = a_matrix(0, Schedule(CONVEX, 10))
    assert a.a11 == pytest.approx(21.0 / 23.0, rel=1e-14)
    assert a.a12 == pytest.approx(2.0 / 23.0, rel=1e-14)
    assert a.a21 == 0.0
    assert a.a22 == 1.0


def test_a_matrix_sc_closed_form():
    sched = Schedule(SC_LINEAR, 100, mu=0.01)
    phi = sched.params(0).phi
    a = a_matrix(0, sched)
    assert a.a11 == pytest.approx((1 + phi**2) / (1 + phi), rel=1e-14)
    assert a.a21 == pytest.approx(phi, rel=1e-14)
    assert a.a22 == pytest.approx(1 - phi, rel=1e-14)


def test_a_matrix_zero_step_weight_is_identity():
    # mu -> 0 sends phi -> 0 and the mixing matrix to the identity
    sched = Schedule(SC_LINEAR, 100, mu=1e-30)
    a = a_matrix(0, sched)
    assert a.max_abs_diff(Mat2.identity()) < 1e-14


@pytest.mark.parametrize("sched", SCHEDULES)
def test_convex_second_row_exact(sched):
    if sched.tag != CONVEX:
        pytest.skip("convex-only structure")
    for t in [0, 3, 77, 5000]:
        a = a_matrix(t, sched)
        b = b_matrix(t, sched)
        assert (a.a21, a.a22) == (0.0, 1.0)
        assert (b.a21, b.a22) == (0.0, 1.0)


# ---------------------------------------------------------------- d_vector


def test_d_vector_sc_closed_form():
    sched = Schedule(SC_LINEAR, 100, mu=0.01)
    phi = sched.params(0).phi
    d = d_vector(5, sched)
    assert d.d1 == pytest.approx(101 * phi / (1 + phi), rel=1e-13)
    assert d.d2 == 1.0


def test_d_vector_convex_value():
    # n psi_1 phi_0 + (1 - psi_1) with psi_1 = 21/23, phi_0 = 1/11
    d = d_vector(0, Schedule(CONVEX, 10))
    assert d.d1 == pytest.approx(232.0 / 253.0, rel=1e-14)
    assert d.d2 == 1.0


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t", [0, 1, 10, 1000])
def test_d_vector_range(sched, t):
    d = d_vector(t, sched)
    phi = sched.params(t).phi
    n = sched.n
    assert n * phi - 1e-12 <= d.d1 <= (n + 1) * phi + 1e-12


# ---------------------------------------------------------------- b_matrix


@pytest.mark.parametrize("sched", SCHEDULES)
def test_b_matrix_t0_identity(sched):
    assert b_matrix(0, sched).max_abs_diff(Mat2.identity()) == 0.0


def test_b_matrix_sc_against_brute_force():
    sched = Schedule(SC_LINEAR, 100, mu=0.01)
    assert b_matrix(5, sched).max_abs_diff(brute_b(5, sched)) < ALGEBRA_TOL


def test_b_matrix_convex_closed_form_value():
    sched = Schedule(CONVEX, 10)
    b = b_matrix(3, sched)
    assert b.a11 == pytest.approx(0.77, rel=1e-14)
    assert b.max_abs_diff(brute_b(3, sched)) < ALGEBRA_TOL


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t", [0, 1, 2, 17, 101, 1234, 9999])
def test_b_recurrence_identity(sched, t):
    lhs = b_matrix(t + 1, sched)
    rhs = a_matrix(t, sched) @ b_matrix(t, sched)
    assert lhs.max_abs_diff(rhs) < ALGEBRA_TOL


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t", [3, 10, 64, 500])
def test_b_matrix_matches_brute_force(sched, t):
    assert b_matrix(t, sched).max_abs_diff(brute_b(t, sched)) < 1e-11


@pytest.mark.parametrize("tag,mu", [(SC_LINEAR, 0.01), (SC_LINEAR, 1.0), (SC_SUBLINEAR, 0.3)])
@pytest.mark.parametrize("t", [1, 10, 1000, 100_000])
def test_sc_eigen_form_matches_squaring(tag, mu, t):
    sched = Schedule(tag, 100, mu=mu)
    assert b_matrix(t, sched).max_abs_diff(mat2_pow(a_matrix(0, sched), t)) < 1e-11


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t", [0, 2, 40, 3000])
def test_b_rows_sum_to_one(sched, t):
    b = b_matrix(t, sched)
    assert abs(b.a11 + b.a12 - 1.0) < ALGEBRA_TOL
    assert abs(b.a21 + b.a22 - 1.0) < ALGEBRA_TOL


def test_b_matrix_rejects_negative_t():
    with pytest.raises(ValueError):
        b_matrix(-1, SCHEDULES[0])


# ---------------------------------------------------------------- b_inverse


@pytest.mark.parametrize("sched", SCHEDULES)
def test_b_inverse_identity_at_zero(sched):
    assert b_inverse(0, sched).max_abs_diff(Mat2.identity()) == 0.0


@pytest.mark.parametrize(
    "sched,ts",
    [
        (Schedule(SC_LINEAR, 100, mu=0.01), [1, 10, 1000, 10_000]),
        (Schedule(SC_LINEAR, 10_000, mu=0.01), [1000, 1_000_000]),
        (Schedule(SC_SUBLINEAR, 100, mu=0.3), [1, 5000]),
        (Schedule(CONVEX, 100), [1, 10, 1000, 1_000_000]),
    ],
)
def test_b_inverse_round_trip(sched, ts):
    for t in ts:
        prod = b_matrix(t, sched) @ b_inverse(t, sched)
        assert prod.max_abs_diff(Mat2.identity()) < INVERSE_TOL


def test_b_inverse_convex_closed_form():
    sched = Schedule(CONVEX, 10)
    t = 7
    p = b_matrix(t, sched).a11
    inv = b_inverse(t, sched)
    assert inv.a11 == pytest.approx(1.0 / p, rel=1e-13)
    assert inv.a12 == pytest.approx(1.0 - 1.0 / p, rel=1e-13)
    assert (inv.a21, inv.a22) == (0.0, 1.0)


def test_b_inverse_underflow_raises():
    # lam**t underflows long before t reaches 10**7 at this step weight
    sched = Schedule(SC_LINEAR, 19, mu=1.0)
    with pytest.raises(ValueError):
        b_inverse(10_000_000, sched)


# ------------------------------------------------------- windowed transfer


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t", [1, 5, 321, 4000])
def test_transfer_identity_when_adjacent(sched, t):
    w = windowed_b_transfer(t, t - 1, sched)
    assert w.max_abs_diff(Mat2.identity()) < ALGEBRA_TOL


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("s", [0, 3, 99, 998])
def test_transfer_single_factor(sched, s):
    w = windowed_b_transfer(s + 2, s, sched)
    assert w.max_abs_diff(a_matrix(s + 1, sched)) < ALGEBRA_TOL


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t,s", [(10, 14), (100, 110), (7, 7), (2000, 2010)])
def test_transfer_backward_window_against_product_oracle(sched, t, s):
    # B_t inverse(B_{s+1}) with t <= s is the inverse of A_s ... A_t
    acc = Mat2.identity()
    for l in range(t, s + 1):
        acc = a_matrix(l, sched) @ acc
    w = windowed_b_transfer(t, s, sched)
    assert w.max_abs_diff(acc.inverse()) < 1e-10


@pytest.mark.parametrize("sched", SCHEDULES)
@pytest.mark.parametrize("t,s", [(14, 10), (110, 100), (2010, 2000)])
def test_transfer_forward_window_against_product_oracle(sched, t, s):
    acc = Mat2.identity()
    for l in range(s + 1, t):
        acc = a_matrix(l, sched) @ acc
    w = windowed_b_transfer(t, s, sched)
    assert w.max_abs_diff(acc) < 1e-10


# ------------------------------------------------------------ check_goodness


@pytest.mark.parametrize("n", [19, 50, 200])
@pytest.mark.parametrize(
    "make",
    [
        lambda n: Schedule(SC_LINEAR, n, mu=1.0),
        lambda n: Schedule(SC_LINEAR, n, mu=0.01),
        lambda n: Schedule(SC_SUBLINEAR, n, mu=0.5),
        lambda n: Schedule(CONVEX, n),
    ],
)
def test_goodness_within_admissible_window(make, n):
    sched = make(n)
    q = math.floor(min((n - 8) / 12.0, (2 * n - 4) / 10.0, n / 20.0))
    window = 2 * q
    for t in [0, 1, q, 4 * q + 2, 250, 1111, 5000]:
        for s in range(max(t - window, 0), t + window + 1):
            assert check_goodness(t, s, sched), (t, s, sched.tag, n)


def test_goodness_adjacent_always_true():
    for sched in SCHEDULES:
        for t in [1, 2, 50]:
            assert check_goodness(t, t - 1, sched)


def test_goodness_fails_far_outside_window():
    # two convex steps very far apart shrink the step-weight bound while
    # the transfer keeps an O(1) entry, so the condition must break
    sched = Schedule(CONVEX, 19)
    assert not check_goodness(100_000, 0, sched)
