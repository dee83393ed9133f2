"""Bounded-variable primal simplex on ``row_lo <= A x <= row_hi, lo <= x <= hi``.

Every row gets a logical column ``s`` with ``A x - s = 0`` and the row bounds
moved onto ``s``, so the working system is ``[A  -I] z = 0`` with bounds on
all of ``z``. The basis inverse is held densely and updated with a sparse
rank-one step (only rows with a nonzero pivot-column entry are touched),
refactored from scratch every ``REFACTOR_EVERY`` pivots.

Phase 1 starts from any basis (the all-slack one, or a basis handed back by
an earlier solve) and minimizes the total bound violation of the basic
variables, each infeasible variable being stopped where it turns feasible.
Entering variables are picked by Dantzig pricing with a Harris two-pass
ratio test; after ``DEGENERATE_LIMIT`` consecutive degenerate pivots the
selection switches to Bland's rule until a pivot makes progress.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import LinearArrays, MilpModel, Solution, SolveStats, Status

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_LIMIT = 30

_AT_LO, _AT_HI, _FREE = 0, 1, 2


@dataclass
class LpResult:
    status: Status
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: tuple[np.ndarray, np.ndarray] | None = None
    # column bounds the LP was solved with, when the caller records them
    bounds: tuple[np.ndarray, np.ndarray] | None = None


class _Simplex:
    def __init__(self, A: sp.csc_matrix, c, lo, hi, row_lo, row_hi, max_iter=None, basis=None):
        self.m, self.n = A.shape
        self.A = A
        self.AT = A.T.tocsr()
        self.c = np.asarray(c, dtype=float)
        m, n = self.m, self.n
        self.N = n + m
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n) + 1000
        self.iterations = 0
        self.lo = np.concatenate([lo, row_lo]).astype(float)
        self.hi = np.concatenate([hi, row_hi]).astype(float)
        self.x = np.zeros(self.N)
        self.cost = np.zeros(self.N)
        self.since_refactor = 0
        if basis is None or not self._load_basis(*basis):
            self._slack_basis()

    def _place_nonbasic(self, flag: np.ndarray) -> None:
        lo, hi = self.lo, self.hi
        flag = flag.copy()
        flag[(flag == _AT_LO) & ~np.isfinite(lo)] = _AT_HI
        flag[(flag == _AT_HI) & ~np.isfinite(hi)] = _AT_LO
        flag[(flag == _AT_LO) & ~np.isfinite(lo)] = _FREE
        flag[(flag == _FREE) & np.isfinite(lo)] = _AT_LO
        flag[(flag == _FREE) & np.isfinite(hi)] = _AT_HI
        self.flag = flag
        self.x = np.select([flag == _AT_LO, flag == _AT_HI], [lo, hi], 0.0)

    def _slack_basis(self) -> None:
        n, m = self.n, self.m
        self._place_nonbasic(np.full(self.N, _AT_LO, dtype=np.int8))
        self.head = np.arange(n, n + m)
        self.pos = np.full(self.N, -1, dtype=int)
        self.pos[self.head] = np.arange(m)
        self.Binv = -np.eye(m)
        self.since_refactor = 0
        self.recompute_basics()

    def _load_basis(self, head, flag) -> bool:
        if len(head) != self.m or len(flag) != self.N:
            return False
        self._place_nonbasic(np.asarray(flag, dtype=np.int8))
        self.head = np.array(head, dtype=int)
        self.pos = np.full(self.N, -1, dtype=int)
        self.pos[self.head] = np.arange(self.m)
        return self.refactor()

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        return self.head.copy(), self.flag.copy()

    # columns of [A  -I]
    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if j < self.n:
            a, b = self.A.indptr[j], self.A.indptr[j + 1]
            return self.A.indices[a:b], self.A.data[a:b]
        return np.array([j - self.n]), np.array([-1.0])

    def refactor(self) -> bool:
        """Rebuild the basis inverse.

        Basic slack columns are unit vectors, so only the block of basic
        structural columns on the rows without a basic slack is inverted.
        """
        m, n = self.m, self.n
        if m == 0:
            self.Binv = np.zeros((0, 0))
            return True
        head = self.head
        struct_pos = np.nonzero(head < n)[0]
        slack_pos = np.nonzero(head >= n)[0]
        slack_rows = head[slack_pos] - n
        kernel_rows = np.setdiff1d(np.arange(m), slack_rows)
        if len(kernel_rows) != len(struct_pos):
            return False
        Binv = np.zeros((m, m))
        if len(struct_pos):
            AS = self.A[:, head[struct_pos]].toarray()
            try:
                Kinv = np.linalg.inv(AS[kernel_rows])
            except np.linalg.LinAlgError:
                return False
            if not np.all(np.isfinite(Kinv)):
                return False
            Binv[np.ix_(struct_pos, kernel_rows)] = Kinv
            Binv[np.ix_(slack_pos, kernel_rows)] = AS[slack_rows] @ Kinv
        Binv[slack_pos, slack_rows] = -1.0
        self.Binv = Binv
        self.since_refactor = 0
        self.recompute_basics()
        return True

    def recompute_basics(self) -> None:
        n = self.n
        xs = np.where(self.pos < 0, self.x, 0.0)
        rhs = -(self.A @ xs[:n]) + xs[n:]
        self.x[self.head] = self.Binv @ rhs

    def reduced_costs(self) -> np.ndarray:
        cb = self.cost[self.head]
        nz = np.nonzero(cb)[0]
        if len(nz):
            y = cb[nz] @ self.Binv[nz]
        else:
            y = np.zeros(self.m)
        n = self.n
        d = np.empty(self.N)
        d[:n] = self.cost[:n] - self.AT @ y if self.m else self.cost[:n]
        d[n:] = self.cost[n:] + y
        return d

    def choose_entering(self, d: np.ndarray, bland: bool) -> int:
        nonbasic = self.pos < 0
        movable = self.hi > self.lo
        f = self.flag
        elig = nonbasic & movable & (
            ((f == _AT_LO) & (d < -OPT_TOL))
            | ((f == _AT_HI) & (d > OPT_TOL))
            | ((f == _FREE) & (np.abs(d) > OPT_TOL))
        )
        cand = np.nonzero(elig)[0]
        if not len(cand):
            return -1
        if bland:
            return int(cand[0])
        return int(cand[np.argmax(np.abs(d[cand]))])

    def basic_bounds(self, phase1: bool) -> tuple[np.ndarray, np.ndarray]:
        """Bounds the ratio test respects; in phase 1 an infeasible basic
        variable is only stopped where it becomes feasible."""
        lob = self.lo[self.head].copy()
        hib = self.hi[self.head].copy()
        if phase1:
            xb = self.x[self.head]
            below = xb < lob - FEAS_TOL
            above = xb > hib + FEAS_TOL
            hib[below] = lob[below]
            lob[below] = -np.inf
            lob[above] = hib[above]
            hib[above] = np.inf
        return lob, hib

    def ratio_test(self, q: int, direction: float, alpha: np.ndarray, bland: bool, lob, hib):
        """Return (step, leaving row or -1 for a bound flip, unbounded flag)."""
        delta = -direction * alpha
        xb = self.x[self.head]
        dec = (delta < -PIVOT_TOL) & np.isfinite(lob)
        inc = (delta > PIVOT_TOL) & np.isfinite(hib)
        flip = self.hi[q] - self.lo[q]

        idx_dec = np.nonzero(dec)[0]
        idx_inc = np.nonzero(inc)[0]
        rows = np.concatenate([idx_dec, idx_inc])
        if not len(rows):
            if np.isfinite(flip):
                return flip, -1, False
            return np.inf, -1, True
        slack = np.concatenate([xb[idx_dec] - lob[idx_dec], hib[idx_inc] - xb[idx_inc]])
        rate = np.abs(delta[rows])
        exact = np.maximum(slack, 0.0) / rate

        if bland:
            theta = exact.min()
            ties = rows[exact <= theta + 1e-12]
            r = int(ties[np.argmin(self.head[ties])])
        else:
            relaxed = (np.maximum(slack, 0.0) + FEAS_TOL) / rate
            theta_max = relaxed.min()
            within = exact <= theta_max
            cand = rows[within]
            best = np.argmax(np.abs(alpha[cand]))
            r = int(cand[best])
            theta = float(exact[within][best])
        if np.isfinite(flip) and flip <= theta:
            return flip, -1, False
        return theta, r, False

    def pivot(self, q: int, r: int, alpha: np.ndarray) -> None:
        piv = alpha[r]
        Binv = self.Binv
        Binv[r] /= piv
        nz = np.nonzero(alpha)[0]
        nz = nz[nz != r]
        if len(nz):
            row = Binv[r]
            cols = np.nonzero(row)[0]
            if 3 * len(cols) < len(row):
                Binv[np.ix_(nz, cols)] -= np.outer(alpha[nz], row[cols])
            else:
                Binv[nz] -= np.outer(alpha[nz], row)
        leaving = self.head[r]
        self.head[r] = q
        self.pos[q] = r
        self.pos[leaving] = -1

    def set_phase1_cost(self) -> bool:
        """Gradient of the total bound violation of the basics; False when feasible."""
        xb = self.x[self.head]
        lob = self.lo[self.head]
        hib = self.hi[self.head]
        cb = np.where(xb < lob - FEAS_TOL, -1.0, np.where(xb > hib + FEAS_TOL, 1.0, 0.0))
        self.cost[:] = 0.0
        self.cost[self.head] = cb
        return bool(np.any(cb))

    def run(self, deadline: float | None = None, phase1: bool = False) -> Status:
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                return Status.ERROR
            if deadline is not None and self.iterations % 32 == 0 and time.perf_counter() > deadline:
                return Status.TIME_LIMIT
            if phase1 and not self.set_phase1_cost():
                return Status.OPTIMAL
            bland = degenerate > DEGENERATE_LIMIT
            d = self.reduced_costs()
            q = self.choose_entering(d, bland)
            if q < 0:
                # confirm on a fresh factorization before stopping
                if self.since_refactor == 0:
                    return Status.INFEASIBLE if phase1 else Status.OPTIMAL
                if not self.refactor():
                    return Status.ERROR
                continue
            direction = 1.0 if d[q] < 0 else -1.0
            rows, vals = self.column(q)
            alpha = self.Binv[:, rows] @ vals if self.m else np.zeros(0)
            lob, hib = self.basic_bounds(phase1)
            theta, r, unbounded = self.ratio_test(q, direction, alpha, bland, lob, hib)
            if unbounded:
                return Status.ERROR if phase1 else Status.UNBOUNDED
            self.iterations += 1
            step = direction * theta
            self.x[q] += step
            if self.m:
                self.x[self.head] -= step * alpha
            if r < 0:
                self.flag[q] = _AT_HI if direction > 0 else _AT_LO
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
            else:
                leaving = self.head[r]
                # the leaving variable exits at the bound it hit
                target = lob[r] if -direction * alpha[r] < 0 else hib[r]
                if target == self.lo[leaving]:
                    self.flag[leaving] = _AT_LO
                else:
                    self.flag[leaving] = _AT_HI
                self.x[leaving] = target
                self.pivot(q, r, alpha)
                self.since_refactor += 1
                if self.since_refactor >= REFACTOR_EVERY:
                    if not self.refactor():
                        return Status.ERROR
            degenerate = degenerate + 1 if theta <= 1e-12 else 0

    def infeasibility(self) -> float:
        lo_gap = np.where(np.isfinite(self.lo), self.lo - self.x, 0.0)
        hi_gap = np.where(np.isfinite(self.hi), self.x - self.hi, 0.0)
        return float(max(0.0, lo_gap.max(initial=0.0), hi_gap.max(initial=0.0)))

    def solve(self, deadline: float | None = None) -> LpResult:
        n = self.n
        status = self.run(deadline, phase1=True)
        if status is not Status.OPTIMAL:
            return LpResult(status, None, np.nan, self.iterations)
        self.cost[:] = 0.0
        self.cost[:n] = self.c
        status = self.run(deadline)
        if status is not Status.OPTIMAL:
            return LpResult(status, None, np.nan, self.iterations)
        if self.infeasibility() > 10 * FEAS_TOL:
            return LpResult(Status.ERROR, None, np.nan, self.iterations)
        x = self.x[:n].copy()
        return LpResult(Status.OPTIMAL, x, float(self.c @ x), self.iterations, self.basis())


def solve_arrays(arr: LinearArrays, col_lo=None, col_hi=None, *, basis=None,
                 deadline: float | None = None, max_iter: int | None = None) -> LpResult:
    """Solve the LP given by ``arr`` with optional overriding column bounds.

    Binaries are treated as continuous on their bounds, i.e. the LP relaxation.
    ``basis`` is a ``(head, flags)`` pair from an earlier result on the same
    matrix; the solve starts from it instead of the all-slack basis.
    """
    lo = arr.col_lo if col_lo is None else np.asarray(col_lo, dtype=float)
    hi = arr.col_hi if col_hi is None else np.asarray(col_hi, dtype=float)
    for a, b in ((lo, hi), (arr.row_lo, arr.row_hi)):
        if np.any(a > b + 1e-12) or np.any(a == np.inf) or np.any(b == -np.inf):
            return LpResult(Status.INFEASIBLE, None, np.nan, 0)
    hi = np.maximum(hi, lo)
    spx = _Simplex(arr.A, arr.c, lo, hi, arr.row_lo, arr.row_hi, max_iter=max_iter, basis=basis)
    res = spx.solve(deadline)
    if res.status is Status.OPTIMAL:
        res.objective += arr.obj_const
    return res


def solve_lp(model: MilpModel, *, max_iter: int | None = None) -> Solution:
    """Solve the LP relaxation of ``model`` (binaries relaxed to ``[0, 1]``)."""
    t0 = time.perf_counter()
    arr = model.to_arrays()
    res = solve_arrays(arr, max_iter=max_iter)
    stats = SolveStats(nodes=1, lp_iterations=res.iterations, wall_time=time.perf_counter() - t0)
    if res.status is Status.OPTIMAL:
        return Solution(Status.OPTIMAL, res.x, res.objective, res.objective, stats)
    msg = "iteration limit or numerical breakdown" if res.status is Status.ERROR else ""
    return Solution(res.status, None, np.nan, np.nan, stats, msg)
