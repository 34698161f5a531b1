"""Objective oracles with per-coordinate gradients and smoothness metadata.

Problems expose ``value``, ``grad_coord`` and per-coordinate support so
solvers touch only the entries a partial derivative depends on.  All
solver-facing problems have unit diagonal smoothness (``L_kk = 1`` for
every ``k``); :func:`rescale_to_unit_diagonal` converts anything else.
When the minimizer is known the objective is translated so its minimum
value is 0 and ``value`` returns the optimality gap directly.

Quadratics are the workhorse: their pairwise smoothness constants equal
the matrix entry magnitudes exactly, which makes every bound testable
against direct matrix computations.  A logistic-loss benchmark is
included with (conservative) smoothness upper bounds.

Problem oracles are read-only after construction and safe to call
concurrently.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

#: Diagonal entries within this of 1.0 count as unit (rescaling skipped).
UNIT_DIAG_TOL = 1e-12


@dataclass(frozen=True)
class LipschitzInfo:
    """Smoothness summary: max pairwise constant, residual constants, sparsity.

    ``l_max <= l_res <= l_res_bar`` always, and ``l_res_bar <= sqrt(s) * l_max``
    when every partial derivative depends on at most ``s`` variables.
    """

    l_max: float
    l_res: float
    l_res_bar: float
    sparsity: int


class Problem:
    """Base class for smooth convex objectives.

    Attributes
    ----------
    n : int
        Dimension.
    mu : float
        Strong-convexity parameter in the unit-diagonal metric
        (0 when merely convex or unknown).
    minimizer : ndarray or None
        A minimum point, when known; implies ``value`` returns the gap
        ``f - f*``.
    """

    n: int
    mu: float
    minimizer: Optional[np.ndarray]

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_coord(self, x: np.ndarray, k: int) -> float:
        """Partial derivative along coordinate ``k``; reads only ``support(k)``."""
        raise NotImplementedError

    def support(self, k: int) -> np.ndarray:
        """Indices of the variables the ``k``-th partial derivative depends on."""
        raise NotImplementedError

    def grad_from_support(self, k: int, x_support: np.ndarray) -> float:
        """Partial derivative along ``k`` given values on ``support(k)`` only."""
        raise NotImplementedError

    def pair_lipschitz(self) -> sp.csr_matrix:
        """Matrix of pairwise smoothness constants ``L_jk`` (upper bounds)."""
        raise NotImplementedError

    def diag_lipschitz(self) -> np.ndarray:
        return np.asarray(self.pair_lipschitz().diagonal()).ravel()

    @property
    def is_unit_diagonal(self) -> bool:
        return bool(np.max(np.abs(self.diag_lipschitz() - 1.0)) <= UNIT_DIAG_TOL)


class Quadratic(Problem):
    """Centered quadratic ``f(x) = (1/2) (x - x*)' M (x - x*)`` with ``f* = 0``.

    ``M`` must be symmetric positive definite.  Pairwise smoothness
    constants are exactly ``|M_jk|``.
    """

    def __init__(self, matrix, x_star: np.ndarray, mu: float = 0.0):
        m = sp.csr_matrix(matrix, dtype=np.float64)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        self.matrix = m
        self.n = m.shape[0]
        self.minimizer = np.asarray(x_star, dtype=np.float64).copy()
        if self.minimizer.shape != (self.n,):
            raise ValueError("minimizer shape does not match the matrix")
        self.mu = float(mu)
        # per-row views for O(s) coordinate gradients
        indptr, indices, data = m.indptr, m.indices, m.data
        self._row_idx = [indices[indptr[k]:indptr[k + 1]] for k in range(self.n)]
        self._row_val = [data[indptr[k]:indptr[k + 1]] for k in range(self.n)]

    def value(self, x: np.ndarray) -> float:
        d = x - self.minimizer
        return 0.5 * float(d @ (self.matrix @ d))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ (x - self.minimizer)

    def grad_coord(self, x: np.ndarray, k: int) -> float:
        idx = self._row_idx[k]
        return float(self._row_val[k] @ (x[idx] - self.minimizer[idx]))

    def support(self, k: int) -> np.ndarray:
        return self._row_idx[k]

    def grad_from_support(self, k: int, x_support: np.ndarray) -> float:
        return float(self._row_val[k] @ (x_support - self.minimizer[self._row_idx[k]]))

    def pair_lipschitz(self) -> sp.csr_matrix:
        out = self.matrix.copy()
        out.data = np.abs(out.data)
        return out


class Logistic(Problem):
    """Logistic loss ``sum_i log(1 + exp(-y_i a_i' x))`` (merely convex).

    The minimizer and minimum value are unknown, so ``value`` returns
    the raw objective.  Pairwise smoothness constants are the upper
    bounds ``(1/4) sum_i |A_ij| |A_ik|``; they are not tight.
    """

    def __init__(self, design: np.ndarray, labels: np.ndarray):
        a = np.asarray(design, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64)
        if set(np.unique(y)) - {-1.0, 1.0}:
            raise ValueError("labels must be +-1")
        if a.shape[0] != y.shape[0]:
            raise ValueError("design and labels disagree on sample count")
        self.design = a
        self.labels = y
        self.n = a.shape[1]
        self.mu = 0.0
        self.minimizer = None
        self._ya = y[:, None] * a
        self._all = np.arange(self.n)

    def value(self, x: np.ndarray) -> float:
        margins = self._ya @ x
        return float(np.sum(np.logaddexp(0.0, -margins)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        margins = self._ya @ x
        sig = _sigmoid(-margins)
        return -(self._ya.T @ sig)

    def grad_coord(self, x: np.ndarray, k: int) -> float:
        margins = self._ya @ x
        sig = _sigmoid(-margins)
        return float(-(self._ya[:, k] @ sig))

    def support(self, k: int) -> np.ndarray:
        # every sample couples all features: dense support
        return self._all

    def grad_from_support(self, k: int, x_support: np.ndarray) -> float:
        return self.grad_coord(x_support, k)

    def pair_lipschitz(self) -> sp.csr_matrix:
        aa = np.abs(self.design)
        return sp.csr_matrix(0.25 * (aa.T @ aa))


def grad_coord(p: Problem, x: np.ndarray, k: int) -> float:
    """Partial derivative of ``p`` at ``x`` along coordinate ``k``."""
    if not 0 <= k < p.n:
        raise IndexError(f"coordinate {k} out of range for dimension {p.n}")
    return p.grad_coord(x, k)


def lipschitz_params(p: Problem) -> LipschitzInfo:
    """Smoothness summary computed from the pairwise constant matrix."""
    pairs = p.pair_lipschitz().tocsr()
    sq = pairs.multiply(pairs)
    row_norms = np.sqrt(np.asarray(sq.sum(axis=1)).ravel())
    col_norms = np.sqrt(np.asarray(sq.sum(axis=0)).ravel())
    nnz_per_row = np.diff(pairs.indptr)
    return LipschitzInfo(
        l_max=float(pairs.data.max()) if pairs.nnz else 0.0,
        l_res=float(col_norms.max()),
        l_res_bar=float(row_norms.max()),
        sparsity=int(nnz_per_row.max()) if pairs.nnz else 0,
    )


def rescale_to_unit_diagonal(p: Problem) -> Problem:
    """Change variables ``x_j -> sqrt(L_jj) x_j`` so every ``L_jj`` is 1.

    Leaves the strong-convexity parameter unchanged (it is defined in
    the diagonal-weighted metric, which the rescaling maps onto the
    Euclidean one).  Problems that already have unit diagonal are
    returned as-is.
    """
    diag = p.diag_lipschitz()
    if np.any(diag <= 0.0):
        raise ValueError("zero or negative diagonal smoothness; cannot rescale")
    if p.is_unit_diagonal:
        return p
    root = np.sqrt(diag)
    if isinstance(p, Quadratic):
        inv = 1.0 / root
        scaled = sp.csr_matrix(p.matrix.multiply(np.outer(inv, inv)))
        return Quadratic(scaled, root * p.minimizer, mu=p.mu)
    if isinstance(p, Logistic):
        return Logistic(p.design / root[None, :], p.labels)
    raise TypeError(f"cannot rescale problems of type {type(p).__name__}")


def make_sparse_quadratic(n: int, s: int, seed: int, mu_target: float) -> Quadratic:
    """Random s-sparse SPD quadratic with unit diagonal and known minimizer.

    Each row of the matrix holds at most ``s`` nonzeros (diagonal
    included).  Off-diagonal magnitudes are sized so every Gershgorin
    disc keeps the smallest eigenvalue at or above ``mu_target``.
    ``s = 1`` degenerates to the identity metric.
    """
    if not 0.0 < mu_target <= 1.0:
        raise ValueError(f"mu_target must lie in (0, 1], got {mu_target}")
    if not 1 <= s <= n:
        raise ValueError(f"sparsity must satisfy 1 <= s <= n, got s={s}, n={n}")
    rng = np.random.default_rng(seed)
    x_star = rng.standard_normal(n) / math.sqrt(n)
    if s == 1 or mu_target == 1.0:
        return Quadratic(sp.identity(n, format="csr"), x_star, mu=1.0)

    max_degree = s - 1
    target_edges = (n * max_degree) // 2
    degree = np.zeros(n, dtype=np.int64)
    edges = set()
    attempts = 0
    attempt_cap = 40 * target_edges + 1000
    while len(edges) < target_edges and attempts < attempt_cap:
        attempts += 1
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        if i > j:
            i, j = j, i
        if (i, j) in edges or degree[i] >= max_degree or degree[j] >= max_degree:
            continue
        edges.add((i, j))
        degree[i] += 1
        degree[j] += 1
    if not edges:
        raise RuntimeError(f"could not realize an off-diagonal pattern for (n={n}, s={s})")

    magnitude = (1.0 - mu_target) / max_degree
    rows, cols, vals = [], [], []
    for i, j in edges:
        v = magnitude * (1.0 if rng.random() < 0.5 else -1.0)
        rows += [i, j]
        cols += [j, i]
        vals += [v, v]
    rows += list(range(n))
    cols += list(range(n))
    vals += [1.0] * n
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return Quadratic(m, x_star, mu=mu_target)


def make_least_squares(design, targets, ridge: float = 0.0) -> Quadratic:
    """Least squares ``(1/2)|A x - b|^2 + (ridge/2)|x|^2`` as a unit-diagonal quadratic.

    The curvature matrix ``A'A + ridge I`` is formed densely, the
    minimizer solved directly, and the whole problem rescaled to unit
    diagonal; the returned quadratic lives in the rescaled coordinates
    with its exact smallest eigenvalue recorded as ``mu``.
    """
    a = np.asarray(design, dtype=np.float64)
    b = np.asarray(targets, dtype=np.float64)
    if ridge < 0.0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    n = a.shape[1]
    m = a.T @ a + ridge * np.eye(n)
    diag = np.diag(m)
    if np.any(diag <= 0.0):
        raise ValueError("design has a zero column; diagonal smoothness vanishes")
    if ridge == 0.0 and np.linalg.matrix_rank(a) < n:
        raise np.linalg.LinAlgError("rank-deficient design with no ridge: minimizer not unique")
    x_star = np.linalg.solve(m, a.T @ b)
    root = np.sqrt(diag)
    scaled = m / np.outer(root, root)
    mu = float(np.linalg.eigvalsh(scaled)[0])
    return Quadratic(sp.csr_matrix(scaled), root * x_star, mu=max(mu, 0.0))


def make_logistic(design, labels) -> Logistic:
    """Unit-diagonal logistic benchmark (convex, smoothness via upper bounds)."""
    return rescale_to_unit_diagonal(Logistic(design, labels))


def save_problem(p: Quadratic, path) -> None:
    """Write a quadratic as a text file: header, minimizer, entry triplets."""
    if not isinstance(p, Quadratic):
        raise TypeError("only quadratic problems serialize")
    coo = p.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"ascd-quadratic {p.n} {float(p.mu)!r}\n")
        fh.write("xstar " + " ".join(repr(float(v)) for v in p.minimizer) + "\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {float(v)!r}\n")


def load_problem(path) -> Quadratic:
    """Read a quadratic written by :func:`save_problem`."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[0] != "ascd-quadratic":
            raise ValueError(f"{path}: not a serialized quadratic problem")
        n, mu = int(head[1]), float(head[2])
        star_line = fh.readline().split()
        if star_line[0] != "xstar" or len(star_line) != n + 1:
            raise ValueError(f"{path}: malformed minimizer line")
        x_star = np.array([float(v) for v in star_line[1:]])
        rows, cols, vals = [], [], []
        for line in fh:
            i, j, v = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return Quadratic(m, x_star, mu=mu)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
