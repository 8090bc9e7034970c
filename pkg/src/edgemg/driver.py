"""Outer iteration: reweight the gradient, sweep lambda, pick the L-curve corner.

Each outer iteration builds one AMG hierarchy for the current weighted
gradient and reuses it for every lambda in the active window.  Lambdas are
visited from largest to smallest; each solve starts from the solution of the
next-larger lambda, and the largest one starts from the previously selected
solution.  The loop ends once the same grid index has been selected three
times in a row.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import amg, sparse
from .krylov import SolveReport, fgmres
from .lcurve import LCurveData, find_corner, make_lambda_grid, trim_window, WINDOW_WIDTH
from .operators import WeightState, build_gradient, initial_weights, update_weights, weighted_gradient

__all__ = ["RunConfig", "SolveRecord", "OuterSummary", "OuterState", "RunResult", "run", "TRIM_MODES"]

log = logging.getLogger(__name__)

TRIM_MODES = ("never", "after_first", "always")
STOP_THREE_EQUAL = "three_equal"
STOP_MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class RunConfig:
    hi_exp: float = 2.0
    lo_exp: float = -3.0
    n_lambdas: int = 30
    q: float = 2.0
    nu1: int = 2
    nu2: int = 1
    theta: float = 0.25
    abs_tol: float = 1e-6
    max_outer: int = 30
    trim_mode: str = "after_first"
    max_inner: int = 300
    max_coarse: int = 200
    warm_start: bool = True

    def __post_init__(self):
        if self.trim_mode not in TRIM_MODES:
            raise ValueError(f"trim_mode must be one of {TRIM_MODES}")
        if self.q <= 0 or self.abs_tol <= 0 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("q, abs_tol, max_outer and max_inner must be positive")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("relaxation sweep counts must be nonnegative")

    def lambda_grid(self):
        return make_lambda_grid(self.hi_exp, self.lo_exp, self.n_lambdas)

    def amg_config(self):
        return amg.AmgConfig(theta=self.theta, max_coarse=self.max_coarse)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SolveRecord:
    ell: int
    index: int  # 1-based grid index
    lam: float
    report: SolveReport
    start: str  # "zero", "previous_outer" or "index:<j>"

    @property
    def iterations(self):
        return self.report.iterations

    @property
    def converged(self):
        return self.report.converged


@dataclass
class OuterSummary:
    ell: int
    window: tuple
    chosen_index: int
    chosen_lambda: float
    rel_error: float | None
    iterations: list
    wall_time: float
    lcurve: LCurveData = field(repr=False)
    nonconverged: int = 0

    @property
    def avg_iterations(self):
        return float(np.mean(self.iterations))


@dataclass
class OuterState:
    ell: int = 0
    chosen_indices: list = field(default_factory=list)
    chosen_lambdas: list = field(default_factory=list)
    current_solution: np.ndarray | None = None
    weight_state: WeightState | None = None
    stopped: bool = False
    stop_reason: str | None = None
    setup_count: int = 0


@dataclass
class RunResult:
    final_image: np.ndarray
    state: OuterState
    records: list
    outer: list
    lambda_grid: np.ndarray
    config: RunConfig

    @property
    def stop_reason(self):
        return self.state.stop_reason

    def total_iterations(self):
        return sum(r.iterations for r in self.records)

    def write_history_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["ell", "chosen_lambda", "chosen_index", "rel_error", "avg_iters", "min_iters", "max_iters"]
            )
            for o in self.outer:
                w.writerow(
                    [
                        o.ell,
                        repr(o.chosen_lambda),
                        o.chosen_index,
                        "" if o.rel_error is None else repr(o.rel_error),
                        repr(o.avg_iterations),
                        min(o.iterations),
                        max(o.iterations),
                    ]
                )


def _active_window(ell, i_prev, m, mode):
    if mode == "never" or m < WINDOW_WIDTH:
        return tuple(range(1, m + 1))
    if ell == 1:
        if mode == "after_first":
            return tuple(range(1, m + 1))
        return tuple(range(1, WINDOW_WIDTH + 1))
    return tuple(trim_window(i_prev, m).indices())


def run(A, b, n_v, n_h=None, config: RunConfig | None = None, x_true=None, on_setup=None, on_solve=None):
    """Edge-preserving reconstruction with automatic lambda selection.

    Parameters
    ----------
    A : SparseMatrix
        Forward operator acting on column-major ``n_v x n_h`` images.
    b : ndarray
        Measured data.
    n_v, n_h : int
        Image height and width (``n_h`` defaults to ``n_v``).
    config : RunConfig, optional
    x_true : ndarray, optional
        Ground truth; only used to report relative errors.
    on_setup : callable, optional
        ``on_setup(ell, hierarchy)`` after each AMG setup.
    on_solve : callable, optional
        ``on_solve(ell, index, x0, x, report)`` after each inner solve.

    Returns
    -------
    RunResult
    """
    config = config or RunConfig()
    n_h = n_v if n_h is None else n_h
    if A.n_cols != n_v * n_h:
        raise ValueError(f"A has {A.n_cols} columns but the image has {n_v * n_h} pixels")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n_rows,):
        raise ValueError(f"b has shape {b.shape}, expected ({A.n_rows},)")

    L = build_gradient(n_v, n_h).matrix
    L.csr_t
    A.csr_t
    grid = config.lambda_grid()
    m = len(grid)
    rhs = sparse.matvec_transpose(A, b)
    truth_norm = None if x_true is None else float(np.linalg.norm(x_true))

    state = OuterState(weight_state=initial_weights(L.n_rows, config.q))
    records, outer = [], []
    x_prev = np.zeros(A.n_cols)
    amg_cfg = config.amg_config()

    for ell in range(1, config.max_outer + 1):
        t0 = time.perf_counter()
        i_prev = state.chosen_indices[-1] if state.chosen_indices else None
        window = _active_window(ell, i_prev, m, config.trim_mode)

        M = weighted_gradient(state.weight_state, L)
        hier = amg.setup_hierarchy(A, M, amg_cfg)
        state.setup_count += 1
        if on_setup is not None:
            on_setup(ell, hier)

        solutions, iters, nonconv = {}, [], 0
        x0 = x_prev.copy() if config.warm_start else np.zeros(A.n_cols)
        start = "previous_outer" if (config.warm_start and ell > 1) else "zero"
        for i in reversed(window):
            lam = grid[i - 1]
            x, rep = fgmres(
                amg.fine_normal_operator(hier, lam),
                amg.preconditioner(hier, lam, config.nu1, config.nu2),
                rhs,
                x0,
                config.abs_tol,
                config.max_inner,
            )
            if not rep.converged:
                nonconv += 1
                log.warning(
                    "ell=%d lambda=%.3e: inner solve stopped at residual %.3e after %d iterations",
                    ell, lam, rep.final_residual_norm, rep.iterations,
                )
            if on_solve is not None:
                on_solve(ell, i, x0, x, rep)
            records.append(SolveRecord(ell, i, float(lam), rep, start))
            iters.append(rep.iterations)
            solutions[i] = x
            if config.warm_start:
                x0 = x
                start = f"index:{i}"

        lams, res, con, idx = [], [], [], []
        for i in window:
            x = solutions[i]
            r = np.linalg.norm(sparse.matvec(A, x) - b)
            c = np.linalg.norm(sparse.matvec(M, x))
            if r > 0 and c > 0:
                lams.append(grid[i - 1])
                res.append(r)
                con.append(c)
                idx.append(i)
        curve = LCurveData.from_arrays(np.array(lams), np.array(res), np.array(con), idx)
        corner = find_corner(curve)
        i_ell = curve.points[corner].grid_index
        x_star = solutions[i_ell]

        state.ell = ell
        state.chosen_indices.append(i_ell)
        state.chosen_lambdas.append(float(grid[i_ell - 1]))
        state.current_solution = x_star
        rel = None if truth_norm is None else float(np.linalg.norm(x_star - x_true) / truth_norm)
        outer.append(
            OuterSummary(
                ell, window, i_ell, float(grid[i_ell - 1]), rel, iters,
                time.perf_counter() - t0, curve, nonconv,
            )
        )
        log.info(
            "ell=%d window=%d..%d chosen index %d (lambda=%.3e) avg inner its %.2f%s",
            ell, window[0], window[-1], i_ell, grid[i_ell - 1], np.mean(iters),
            "" if rel is None else f" rel err {rel:.4f}",
        )

        last3 = state.chosen_indices[-3:]
        if ell >= 3 and last3[0] == last3[1] == last3[2]:
            state.stopped = True
            state.stop_reason = STOP_THREE_EQUAL
            break
        if ell == config.max_outer:
            state.stopped = True
            state.stop_reason = STOP_MAX_ITERATIONS
            break
        state.weight_state = update_weights(state.weight_state, sparse.matvec(M, x_star))
        x_prev = x_star

    return RunResult(state.current_solution, state, records, outer, grid, config)


def with_overrides(config: RunConfig, **kw) -> RunConfig:
    """Copy of ``config`` with the non-``None`` keyword values replaced."""
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
