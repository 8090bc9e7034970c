"""Discrete gradient, edge weights and the regularized normal-equations action.

Images are vectorized column-major (columns stacked), so pixel ``(r, c)`` of an
``n_v x n_h`` image sits at index ``r + c * n_v``.  With that convention the
block ``I (x) L_v`` differences along columns and ``L_h (x) I`` along rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sparse
from .sparse import SparseMatrix

__all__ = [
    "GradientOperator",
    "WeightState",
    "RegularizedSystem",
    "build_gradient",
    "difference_matrix",
    "initial_weights",
    "update_weights",
    "weighted_gradient",
    "normal_apply",
    "residual_norms",
]


def difference_matrix(n: int) -> SparseMatrix:
    """Forward difference ``(n-1) x n`` matrix with rows ``[-1, 1]``."""
    return sparse.from_scipy(sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)))


@dataclass(frozen=True)
class GradientOperator:
    n_v: int
    n_h: int
    matrix: SparseMatrix

    @property
    def n_edges(self):
        return self.matrix.n_rows


def build_gradient(n_v: int, n_h: int) -> GradientOperator:
    """Stacked gradient ``[I (x) L_v ; L_h (x) I]`` for an ``n_v x n_h`` image."""
    if n_v < 2 or n_h < 2:
        raise ValueError(f"image must be at least 2x2, got {n_v}x{n_h}")
    vert = sparse.kron(sparse.identity(n_h), difference_matrix(n_v))
    horiz = sparse.kron(difference_matrix(n_h), sparse.identity(n_v))
    mat = sparse.from_scipy(sp.vstack([vert.csr, horiz.csr], format="csr"))
    return GradientOperator(n_v, n_h, mat)


@dataclass(frozen=True)
class WeightState:
    """Cumulative diagonal of ``D`` after ``outer_index`` updates.

    ``d_current`` is the full product of all weight factors so far, not the
    most recent factor alone (that one is kept in ``last_factor``).
    """

    d_current: np.ndarray
    q_exponent: float = 2.0
    outer_index: int = 0
    last_factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.q_exponent <= 0:
            raise ValueError("q_exponent must be positive")


def initial_weights(n_edges: int, q: float = 2.0) -> WeightState:
    """``D = I``."""
    return WeightState(np.ones(n_edges), q, 0)


def update_weights(state: WeightState, weighted_grad) -> WeightState:
    """Shrink the weights where the weighted gradient of the last solution is large.

    Parameters
    ----------
    state : WeightState
        Current cumulative weights.
    weighted_grad : ndarray
        ``D @ L @ x`` evaluated at the previously selected solution.

    Returns
    -------
    WeightState
        New state with ``d_current = (1 - (|v| / max|v|)**q) * state.d_current``.
    """
    v = np.abs(np.asarray(weighted_grad, dtype=np.float64))
    if v.shape != state.d_current.shape:
        raise ValueError(f"weighted gradient has shape {v.shape}, expected {state.d_current.shape}")
    vmax = v.max() if v.size else 0.0
    if not vmax > 0:
        raise ValueError("weighted gradient is identically zero; no edge information to update from")
    g = v / vmax
    factor = 1.0 - g**state.q_exponent
    # exact zero at the maximizer regardless of q
    factor[v == vmax] = 0.0
    np.clip(factor, 0.0, 1.0, out=factor)
    return WeightState(factor * state.d_current, state.q_exponent, state.outer_index + 1, factor)


def weighted_gradient(weights, grad: GradientOperator | SparseMatrix) -> SparseMatrix:
    """Row-scaled gradient ``M = diag(weights) @ L``."""
    L = grad.matrix if isinstance(grad, GradientOperator) else grad
    d = weights.d_current if isinstance(weights, WeightState) else weights
    return sparse.row_scale(d, L)


@dataclass(frozen=True)
class RegularizedSystem:
    """``min ||A x - b||^2 + lam^2 ||M x||^2`` for one weight state and one lambda."""

    A: SparseMatrix
    M: SparseMatrix
    lam: float
    b: np.ndarray

    def __post_init__(self):
        if self.A.n_cols != self.M.n_cols:
            raise ValueError("A and M must have the same number of columns")
        if len(self.b) != self.A.n_rows:
            raise ValueError("b must have one entry per row of A")

    def rhs(self):
        """``A.T @ b``."""
        return sparse.matvec_transpose(self.A, self.b)


def normal_apply(sys: RegularizedSystem, x) -> np.ndarray:
    """``A.T (A x) + lam^2 M.T (M x)`` without ever forming ``A.T A``."""
    A, M = sys.A, sys.M
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise ValueError(f"x has shape {x.shape}, expected ({A.n_cols},)")
    out = sparse.matvec_transpose(A, sparse.matvec(A, x))
    if sys.lam != 0.0:
        out += sys.lam**2 * sparse.matvec_transpose(M, sparse.matvec(M, x))
    return out


def residual_norms(sys: RegularizedSystem, x) -> tuple[float, float]:
    """Return ``(||A x - b||, ||M x||)``; logarithms are the L-curve's job."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (sys.A.n_cols,):
        raise ValueError(f"x has shape {x.shape}, expected ({sys.A.n_cols},)")
    r = sparse.matvec(sys.A, x) - sys.b
    return float(np.linalg.norm(r)), float(np.linalg.norm(sparse.matvec(sys.M, x)))
