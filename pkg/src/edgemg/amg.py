"""Classical AMG built on the diffusion term, applied to the full normal equations.

The coarse grids and interpolation come from Ruge-Stuben coarsening of
``K = M.T M = L.T D^2 L`` only.  The forward operator enters the hierarchy
one-sidedly: each level stores ``A_k = A_{k-1} P`` and ``M_k = M_{k-1} P``, so
the Galerkin normal operator ``A_k.T A_k + lam^2 M_k.T M_k`` can be applied on
any level without ever forming ``A.T A``.  Nothing in the hierarchy depends on
``lam`` apart from the cached coarsest factorizations, so one setup serves a
whole sweep over regularization parameters.

Relaxation is diagonally preconditioned CG, which needs no damping parameter.
"""

from __future__ import annotations

import heapq
import json
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import sparse
from .krylov import pcg_steps
from .sparse import SparseMatrix

__all__ = [
    "AmgConfig",
    "StrengthGraph",
    "CfSplitting",
    "AmgLevel",
    "AmgHierarchy",
    "strength_filter",
    "cf_split",
    "build_interpolation",
    "setup_hierarchy",
    "cg_relax",
    "vcycle",
    "preconditioner",
    "fine_normal_operator",
    "InterpolationError",
]

C_POINT = 1
F_POINT = 2
_UNASSIGNED = 0


class InterpolationError(ValueError):
    """The C/F splitting does not admit the classical interpolation formula."""


@dataclass(frozen=True)
class AmgConfig:
    theta: float = 0.25
    max_coarse: int = 200
    max_levels: int = 25
    stall_ratio: float = 0.9
    gamma: int = 1  # V-cycles only


# -- strength of connection ---------------------------------------------------


@dataclass(frozen=True)
class StrengthGraph:
    """Strong dependencies in CSR layout: row ``i`` lists the ``j`` that ``i`` depends on."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    def neighbors(self, i):
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    @property
    def strong_neighbors(self):
        return [self.neighbors(i) for i in range(self.n)]

    def as_csr(self):
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


def strength_filter(k: SparseMatrix, theta: float = 0.25) -> StrengthGraph:
    """Keep ``j`` in row ``i`` when ``-k_ij > theta * max_{m != i} (-k_im)``."""
    if k.n_rows != k.n_cols:
        raise ValueError(f"strength_filter needs a square matrix, got {k.shape}")
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    n = k.n_rows
    rows = np.repeat(np.arange(n), np.diff(k.row_offsets))
    cols, vals = k.col_indices, k.values
    off = cols != rows
    neg = np.where(off, -vals, -np.inf)
    row_max = np.full(n, -np.inf)
    np.maximum.at(row_max, rows, neg)
    thresh = theta * row_max[rows]
    strong = off & (vals != 0) & (row_max[rows] > 0) & (-vals > thresh)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows[strong], minlength=n), out=indptr[1:])
    return StrengthGraph(n, indptr, cols[strong].astype(np.int64))


# -- C/F splitting ------------------------------------------------------------


@dataclass(frozen=True)
class CfSplitting:
    labels: np.ndarray  # C_POINT or F_POINT per point
    coarse_index: np.ndarray  # coarse number for C-points, -1 for F-points

    @property
    def n_coarse(self):
        return int(np.count_nonzero(self.labels == C_POINT))

    @property
    def is_coarse(self):
        return self.labels == C_POINT


def cf_split(g: StrengthGraph) -> CfSplitting:
    """Two-pass Ruge-Stuben splitting.

    First pass: greedy maximal independent set on the strong-connection graph,
    highest measure first with ties going to the lowest index.  Points with no
    strong connections in either direction become C-points (injected).
    Second pass: any F-point pair ``(i, m)`` with ``m`` strongly influencing
    ``i`` but sharing no strong C-point gets the larger of the two indices
    promoted to C.
    """
    n = g.n
    S = g.as_csr()
    ST = S.T.tocsr()
    s_ptr, s_idx = S.indptr, S.indices
    st_ptr, st_idx = ST.indptr, ST.indices

    labels = np.full(n, _UNASSIGNED, dtype=np.int8)
    measure = np.diff(st_ptr).astype(np.int64)
    isolated = (np.diff(s_ptr) == 0) & (measure == 0)
    labels[isolated] = C_POINT

    heap = [(-int(measure[i]), i) for i in range(n) if labels[i] == _UNASSIGNED]
    heapq.heapify(heap)
    while heap:
        neg_m, i = heapq.heappop(heap)
        if labels[i] != _UNASSIGNED or -neg_m != measure[i]:
            continue
        labels[i] = C_POINT
        for j in st_idx[st_ptr[i] : st_ptr[i + 1]]:
            if labels[j] != _UNASSIGNED:
                continue
            labels[j] = F_POINT
            for kk in s_idx[s_ptr[j] : s_ptr[j + 1]]:
                if labels[kk] == _UNASSIGNED:
                    measure[kk] += 1
                    heapq.heappush(heap, (-int(measure[kk]), int(kk)))

    for i in range(n):
        if labels[i] != F_POINT:
            continue
        nbrs = s_idx[s_ptr[i] : s_ptr[i + 1]]
        c_i = {int(j) for j in nbrs if labels[j] == C_POINT}
        for m in nbrs:
            if labels[m] != F_POINT:
                continue
            if any(int(l) in c_i for l in s_idx[s_ptr[m] : s_ptr[m + 1]]):
                continue
            promote = max(i, int(m))
            labels[promote] = C_POINT
            if promote == i:
                break
            c_i.add(int(m))

    coarse_index = np.full(n, -1, dtype=np.int64)
    is_c = labels == C_POINT
    coarse_index[is_c] = np.arange(np.count_nonzero(is_c))
    return CfSplitting(labels, coarse_index)


# -- interpolation ------------------------------------------------------------


def _row_dicts(k: SparseMatrix):
    ro, ci, v = k.row_offsets, k.col_indices.tolist(), k.values.tolist()
    return [dict(zip(ci[ro[i] : ro[i + 1]], v[ro[i] : ro[i + 1]])) for i in range(k.n_rows)]


def build_interpolation(k: SparseMatrix, g: StrengthGraph, split: CfSplitting) -> SparseMatrix:
    """Classical direct-plus-strong-F interpolation.

    For an F-point ``i`` with strong C-neighbours ``C_i``, strong F-neighbours
    ``F_s`` and every remaining neighbour in ``F_w``::

        w_ij = -(k_ij + sum_{m in F_s} k_im k_mj / sum_{l in C_i} k_ml)
               / (k_ii + sum_{m in F_w} k_im)

    C-points interpolate from their own coarse index with weight one.
    """
    n = k.n_rows
    rows_kv = _row_dicts(k)
    labels = split.labels
    cidx = split.coarse_index
    p_rows, p_cols, p_vals = [], [], []
    for i in range(n):
        if labels[i] == C_POINT:
            p_rows.append(i)
            p_cols.append(int(cidx[i]))
            p_vals.append(1.0)
            continue
        row = rows_kv[i]
        strong = {int(j) for j in g.neighbors(i)}
        c_i = sorted(j for j in strong if labels[j] == C_POINT)
        if not c_i:
            raise InterpolationError(f"F-point {i} has no strongly connected C-point")
        f_s = [j for j in strong if labels[j] == F_POINT]
        weak_sum = sum(v for j, v in row.items() if j != i and j not in strong)
        denom = row.get(i, 0.0) + weak_sum
        if denom == 0.0:
            raise InterpolationError(f"F-point {i}: vanishing diagonal after lumping weak connections")
        num = {j: row.get(j, 0.0) for j in c_i}
        for m in f_s:
            row_m = rows_kv[m]
            to_c = sum(row_m.get(l, 0.0) for l in c_i)
            if to_c == 0.0:
                raise InterpolationError(
                    f"F-point {i}: strong F-neighbour {m} has zero total coupling to C_{i}"
                )
            k_im = row[m]
            for j in c_i:
                k_mj = row_m.get(j)
                if k_mj is not None:
                    num[j] += k_im * k_mj / to_c
        for j in c_i:
            p_rows.append(i)
            p_cols.append(int(cidx[j]))
            p_vals.append(-num[j] / denom)
    P = sp.csr_matrix((p_vals, (p_rows, p_cols)), shape=(n, split.n_coarse))
    return sparse.from_scipy(P)


# -- hierarchy ----------------------------------------------------------------


def _normal_gram(m: SparseMatrix) -> SparseMatrix:
    return sparse.from_scipy((m.csr.T @ m.csr).tocsr())


@dataclass
class AmgLevel:
    P: SparseMatrix
    K_diff: SparseMatrix
    A_k: SparseMatrix
    M_k: SparseMatrix
    diag_AtA: np.ndarray
    diag_MtM: np.ndarray

    @property
    def size(self):
        return self.A_k.n_cols

    def combined_diagonal(self, lam):
        return self.diag_AtA + lam * lam * self.diag_MtM

    def normal_apply(self, lam, x):
        out = sparse.matvec_transpose(self.A_k, sparse.matvec(self.A_k, x))
        if lam != 0.0:
            out += (lam * lam) * sparse.matvec_transpose(self.M_k, sparse.matvec(self.M_k, x))
        return out


@dataclass
class AmgHierarchy:
    """Fine-to-coarse levels plus the directly solved coarsest level.

    ``levels[k]`` carries the interpolation from level ``k`` to ``k + 1``.
    The coarsest level stores its one-sided operators and the two dense
    Gram matrices; the per-lambda Cholesky factors are cached lazily.
    """

    levels: list
    coarsest_A: SparseMatrix
    coarsest_M: SparseMatrix
    coarsest_K: SparseMatrix
    gram_AtA: np.ndarray = field(repr=False)
    gram_MtM: np.ndarray = field(repr=False)
    config: AmgConfig = field(default_factory=AmgConfig)
    _factor_cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def coarsest_dim(self):
        return self.coarsest_A.n_cols

    @property
    def n_levels(self):
        return len(self.levels) + 1

    def sizes(self):
        return [lvl.size for lvl in self.levels] + [self.coarsest_dim]

    def coarse_factor(self, lam):
        key = float(lam)
        fac = self._factor_cache.get(key)
        if fac is not None:
            return fac
        K = self.gram_AtA + key * key * self.gram_MtM
        try:
            fac = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            n = K.shape[0]
            shift = 1e-12 * np.trace(K) / max(n, 1)
            warnings.warn(
                f"coarsest normal matrix is numerically semidefinite at lambda={key:g}; "
                f"shifting by {shift:.3e}",
                RuntimeWarning,
                stacklevel=3,
            )
            fac = scipy.linalg.cho_factor(K + shift * np.eye(n), lower=True, check_finite=False)
        with self._lock:
            self._factor_cache.setdefault(key, fac)
        return fac

    def coarse_solve(self, lam, rhs):
        if self.coarsest_dim == 0:
            return np.zeros(0)
        return scipy.linalg.cho_solve(self.coarse_factor(lam), rhs, check_finite=False)

    def summary(self):
        """Per-level sizes, nnz and complexities as a JSON-ready dict."""
        k_nnz = [lvl.K_diff.nnz for lvl in self.levels] + [self.coarsest_K.nnz]
        sizes = self.sizes()
        return {
            "levels": [
                {
                    "size": s,
                    "K_nnz": kn,
                    "A_nnz": a.nnz,
                    "M_nnz": m.nnz,
                }
                for s, kn, a, m in zip(
                    sizes,
                    k_nnz,
                    [lvl.A_k for lvl in self.levels] + [self.coarsest_A],
                    [lvl.M_k for lvl in self.levels] + [self.coarsest_M],
                )
            ],
            "grid_complexity": sum(sizes) / sizes[0] if sizes[0] else 1.0,
            "operator_complexity": sum(k_nnz) / k_nnz[0] if k_nnz[0] else 1.0,
        }

    def dump_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2)


def setup_hierarchy(A: SparseMatrix, M: SparseMatrix, config: AmgConfig | None = None) -> AmgHierarchy:
    """Coarsen ``M.T M`` and carry ``A`` and ``M`` along one-sidedly.

    Coarsening stops once a level has at most ``config.max_coarse`` points,
    when a splitting keeps more than ``config.stall_ratio`` of the points, or
    at ``config.max_levels``.
    """
    config = config or AmgConfig()
    if A.n_cols != M.n_cols:
        raise ValueError("A and M must act on the same unknowns")
    K = _normal_gram(M)
    A_k, M_k = A, M
    levels = []
    while K.n_rows > config.max_coarse and len(levels) + 1 < config.max_levels:
        g = strength_filter(K, config.theta)
        split = cf_split(g)
        nc = split.n_coarse
        if nc == 0 or nc > config.stall_ratio * K.n_rows:
            break
        P = build_interpolation(K, g, split)
        levels.append(
            AmgLevel(P, K, A_k, M_k, sparse.column_sumsq(A_k), K.diagonal().copy())
        )
        A_k = sparse.spgemm(A_k, P)
        M_k = sparse.spgemm(M_k, P)
        K = sparse.from_scipy((P.csr.T @ K.csr @ P.csr).tocsr())
    for lvl in levels:
        lvl.A_k.csr_t
        lvl.M_k.csr_t
        lvl.P.csr_t
    gram_AtA = (A_k.csr.T @ A_k.csr).toarray()
    gram_MtM = K.toarray()
    return AmgHierarchy(levels, A_k, M_k, K, gram_AtA, gram_MtM, config)


# -- solve phase --------------------------------------------------------------


def _inverse_diagonal(level: AmgLevel, lam):
    d = level.combined_diagonal(lam)
    if np.any(d == 0):
        bad = int(np.flatnonzero(d == 0)[0])
        raise ZeroDivisionError(f"column {bad} vanishes in both A_k and M_k; diagonal preconditioner undefined")
    return 1.0 / d


def cg_relax(level: AmgLevel, lam, x, b, sweeps):
    """``sweeps`` steps of diagonally preconditioned CG on the level's normal system.

    CG is restarted on every call.
    """
    if sweeps < 0:
        raise ValueError("sweeps must be nonnegative")
    if sweeps == 0:
        return np.asarray(x, dtype=np.float64)
    inv_diag = _inverse_diagonal(level, lam)
    x, _ = pcg_steps(lambda v: level.normal_apply(lam, v), inv_diag, b, x, sweeps)
    return x


def _cycle(h: AmgHierarchy, k, lam, x, b, nu1, nu2):
    # x=None is a zero initial guess, which saves the first residual evaluation
    if k == len(h.levels):
        return h.coarse_solve(lam, b)
    lvl = h.levels[k]
    inv_diag = _inverse_diagonal(lvl, lam)

    def op(v):
        return lvl.normal_apply(lam, v)

    if nu1:
        x, _, r = pcg_steps(op, inv_diag, b, x, nu1, return_residual=True)
    elif x is None:
        x, r = np.zeros(lvl.size), np.array(b, dtype=np.float64)
    else:
        r = b - op(x)
    rc = sparse.matvec_transpose(lvl.P, r)
    ec = None
    for _ in range(h.config.gamma):
        ec = _cycle(h, k + 1, lam, ec, rc, nu1, nu2)
    x = x + sparse.matvec(lvl.P, ec)
    if nu2:
        x, _ = pcg_steps(op, inv_diag, b, x, nu2)
    return x


def vcycle(h: AmgHierarchy, lam, x, b, nu1=2, nu2=1):
    """One V(nu1, nu2)-cycle for ``(A.T A + lam^2 M.T M) x = b`` starting from ``x``."""
    b = np.asarray(b, dtype=np.float64)
    n = h.levels[0].size if h.levels else h.coarsest_dim
    if b.shape != (n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
    x = None if x is None else np.asarray(x, dtype=np.float64)
    if n == 0:
        return np.zeros(0)
    return _cycle(h, 0, lam, x, b, nu1, nu2)


def preconditioner(h: AmgHierarchy, lam, nu1=2, nu2=1):
    """``r -> vcycle(h, lam, 0, r)``, the FGMRES right preconditioner."""

    def apply(r):
        return vcycle(h, lam, None, r, nu1, nu2)

    return apply


def fine_normal_operator(h: AmgHierarchy, lam):
    """Fine-level ``x -> A.T A x + lam^2 M.T M x``."""
    if h.levels:
        lvl = h.levels[0]
        return lambda v: lvl.normal_apply(lam, v)
    A, M = h.coarsest_A, h.coarsest_M

    def apply(v):
        out = sparse.matvec_transpose(A, sparse.matvec(A, v))
        return out + lam * lam * sparse.matvec_transpose(M, sparse.matvec(M, v))

    return apply
