"""2x2 recurrence matrices for the efficient change-of-basis iteration.

The efficient solver stores iterates ``(u, v)`` such that the working
pair ``(y_k, z_k)`` equals ``B_t (u_k, v_k)`` for every coordinate
``k``, where ``B_t`` accumulates the per-step mixing matrices
``A_t`` (``B_0 = I``, ``B_{t+1} = A_t B_t``).  Closed forms keep every
operation O(1):

* strongly convex regimes: ``A`` is constant with eigenvalues ``1`` and
  ``lam = (1 - phi)/(1 + phi)``, so ``B_t = A**t`` has an explicit
  eigen form (exponentiation by squaring is kept as a cross-check);
* convex regime: ``A_t`` is upper triangular and the product telescopes
  to ``B_t = [[p_t, 1 - p_t], [0, 1]]`` with
  ``p_t = (t0 - 1) t0 / ((t0 + t - 1)(t0 + t))``.

``windowed_b_transfer`` forms ``B_t B_{s+1}^{-1}`` for nearby ``s, t``
as a short A-factor quotient, never through the (ill-conditioned)
inverse at large ``t``; ``check_goodness`` verifies the boundedness
conditions under which stale updates have bounded influence.

All operations are pure and safe for concurrent use.
"""

from dataclasses import dataclass
from typing import NamedTuple

from ascd.schedule import CONVEX, Schedule

#: Tolerance for exact algebraic identities (row sums, product identities).
ALGEBRA_TOL = 1e-12

#: Tolerance for inverse round trips ``B_t @ inv(B_t) = I``.
INVERSE_TOL = 1e-10

#: Determinants below this are treated as numerically singular.
DET_FLOOR = 1e-300


@dataclass(frozen=True)
class Mat2:
    """Row-major 2x2 float matrix."""

    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def apply(self, d1: float, d2: float) -> tuple:
        """Matrix-vector product ``self @ (d1, d2)``."""
        return (self.a11 * d1 + self.a12 * d2, self.a21 * d1 + self.a22 * d2)

    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def inverse(self) -> "Mat2":
        d = self.det()
        if abs(d) < DET_FLOOR:
            raise ValueError(f"2x2 matrix numerically singular (det={d!r})")
        return Mat2(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d)

    def max_abs_diff(self, other: "Mat2") -> float:
        return max(
            abs(self.a11 - other.a11),
            abs(self.a12 - other.a12),
            abs(self.a21 - other.a21),
            abs(self.a22 - other.a22),
        )


class Vec2(NamedTuple):
    d1: float
    d2: float


def mat2_pow(m: Mat2, e: int) -> Mat2:
    """``m**e`` by exponentiation by squaring, O(log e) multiplies; e >= 0."""
    if e < 0:
        raise ValueError(f"exponent must be nonnegative, got {e}")
    acc = Mat2.identity()
    base = m
    while e:
        if e & 1:
            acc = acc @ base
        base = base @ base
        e >>= 1
    return acc


def a_matrix(t: int, sched: Schedule) -> Mat2:
    """Per-step mixing matrix ``A_t``; rows sum to 1.

    ``A_t = [[1 - varphi_t (1 - psi_{t+1}), varphi_t (1 - psi_{t+1})],
             [1 - varphi_t,                 varphi_t]]``.
    """
    varphi = sched.params(t).varphi
    psi_next = sched.params(t + 1).psi
    e = varphi * (1.0 - psi_next)
    return Mat2(1.0 - e, e, 1.0 - varphi, varphi)


def d_vector(t: int, sched: Schedule) -> Vec2:
    """Update direction ``D_t = (n psi_{t+1} phi_t + (1 - psi_{t+1}), 1)``.

    The first component lies in ``[n phi_t, (n+1) phi_t]``.
    """
    phi = sched.params(t).phi
    psi_next = sched.params(t + 1).psi
    return Vec2(sched.n * psi_next * phi + (1.0 - psi_next), 1.0)


def b_matrix(t: int, sched: Schedule) -> Mat2:
    """Accumulated basis ``B_t = A_{t-1} ... A_0`` (``B_0 = I``), in O(1)."""
    if t < 0:
        raise ValueError(f"step index must be nonnegative, got {t}")
    if sched.tag == CONVEX:
        p = _convex_p_ratio(t, 0, sched)
        return Mat2(p, 1.0 - p, 0.0, 1.0)
    return _sc_power(sched.params(0).phi, t)


def b_inverse(t: int, sched: Schedule) -> Mat2:
    """Analytic inverse of ``b_matrix(t)``.

    Raises ``ValueError`` once the determinant (``lam**t`` in the
    strongly convex regimes, ``p_t`` in the convex regime) underflows
    ``DET_FLOOR``.
    """
    if t < 0:
        raise ValueError(f"step index must be nonnegative, got {t}")
    if sched.tag == CONVEX:
        p = _convex_p_ratio(t, 0, sched)
        if p < DET_FLOOR:
            raise ValueError(f"basis determinant underflow at t={t} (p_t={p!r})")
        return Mat2(1.0 / p, 1.0 - 1.0 / p, 0.0, 1.0)
    lam = _sc_lambda(sched.params(0).phi)
    if lam ** t < DET_FLOOR:
        raise ValueError(f"basis determinant underflow at t={t}")
    return _sc_power(sched.params(0).phi, -t)


def windowed_b_transfer(t: int, s: int, sched: Schedule) -> Mat2:
    """Transfer matrix ``B_t @ inverse(B_{s+1})`` for nearby ``s`` and ``t``.

    Equal to the A-factor product ``A_{t-1} ... A_{s+1}`` when
    ``t > s + 1`` and to ``inverse(A_s ... A_t)`` when ``t < s + 1``;
    both collapse to closed forms, so the large-``t`` inverse is never
    formed and the result stays well conditioned over the staleness
    window.
    """
    if t < 0 or s + 1 < 0:
        raise ValueError("step indices must be nonnegative")
    if sched.tag == CONVEX:
        p = _convex_p_ratio(t, s + 1, sched)
        return Mat2(p, 1.0 - p, 0.0, 1.0)
    return _sc_power(sched.params(0).phi, t - (s + 1))


def check_goodness(t: int, s: int, sched: Schedule) -> bool:
    """Boundedness of the stale-update transfer over a window.

    True iff the first components of ``W (c, 1)``, ``W (c, 0)``,
    ``W (0, 1)`` and ``W (0, 0)`` all have absolute value at most
    ``(3/2) n phi_t``, and the second component of ``W (c, 1)`` has
    absolute value at most 2, where ``W = windowed_b_transfer(t, s)``
    and ``c`` is the first component of ``d_vector(s)``.  (The
    ``(0, 0)`` input is trivially bounded; it is checked literally for
    completeness.)
    """
    w = windowed_b_transfer(t, s, sched)
    c = d_vector(s, sched).d1
    bound = 1.5 * sched.n * sched.params(t).phi
    first_components = (
        w.apply(c, 1.0)[0],
        w.apply(c, 0.0)[0],
        w.apply(0.0, 1.0)[0],
        w.apply(0.0, 0.0)[0],
    )
    if any(abs(x) > bound for x in first_components):
        return False
    return abs(w.apply(c, 1.0)[1]) <= 2.0


def _sc_lambda(phi: float) -> float:
    """Second eigenvalue of the constant strongly convex mixing matrix."""
    return (1.0 - phi) / (1.0 + phi)


def _sc_power(phi: float, e: int) -> Mat2:
    """Eigen closed form of ``A**e`` for the constant strongly convex ``A``.

    ``A`` has eigenvalues ``{1, lam}`` with eigenvectors ``(1, 1)`` and
    ``(lam, -1)``, giving

    ``A**e = [[1 + lam**(e+1), lam - lam**(e+1)],
              [1 - lam**e,     lam + lam**e]] / (1 + lam)``.

    Valid for negative ``e`` (inverse powers) as long as ``lam**e``
    stays finite.
    """
    lam = _sc_lambda(phi)
    le = lam ** e
    le1 = le * lam
    den = 1.0 + lam
    return Mat2(
        (1.0 + le1) / den,
        (lam - le1) / den,
        (1.0 - le) / den,
        (lam + le) / den,
    )


def _convex_p_ratio(t: int, s: int, sched: Schedule) -> float:
    """Top-left entry of ``B_t @ inverse(B_s)`` in the convex regime.

    The telescoped product gives ``p_t / p_s`` with
    ``p_t = (t0 - 1) t0 / ((t0 + t - 1)(t0 + t))``.
    """
    t0 = sched.convex_t0 if sched.convex_t0 is not None else 2 * sched.n + 2
    return ((t0 + s - 1.0) * (t0 + s)) / ((t0 + t - 1.0) * (t0 + t))
