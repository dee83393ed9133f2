"""Branch-and-bound over binary variables, plus an exhaustive oracle for small models."""

from __future__ import annotations

import heapq
import logging
import itertools
import math
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .model import LinearArrays, MilpModel, Solution, SolveStats, Status
from .propagate import Propagator
from .simplex import LpResult, solve_arrays

log = logging.getLogger(__name__)

INT_TOL = 1e-6
LOG_EVERY = 500
DEFAULT_GAP = 1e-6
MAX_BRUTE_FORCE_BINARIES = 20
# an integral objective's cutoff sits this far above the next lower integer
CUTOFF_SLACK = 1e-6


class TooManyBinaries(ValueError):
    pass


def _integral_objective(arr: LinearArrays) -> bool:
    """True when every feasible objective value is an integer.

    Holds when only binaries carry (integer) objective weight, which lets a
    node bound be rounded up.
    """
    nz = np.nonzero(arr.c)[0]
    if not len(nz) or not np.all(arr.binary[nz]):
        return False
    coefs = np.append(arr.c[nz], arr.obj_const)
    return bool(np.all(coefs == np.round(coefs)))


@dataclass
class _Search:
    arr: LinearArrays
    c: np.ndarray
    gap: float
    deadline: float | None
    max_nodes: int | None
    priority: np.ndarray | None = None
    propagate: bool = True
    eager: np.ndarray = ()

    def __post_init__(self):
        self.bin_idx = np.nonzero(self.arr.binary)[0]
        self.round_bound = _integral_objective(self.arr) and np.array_equal(self.c, self.arr.c)
        if self.priority is None:
            self.priority = np.zeros(len(self.arr.c))
        self.bin_prio = self.priority[self.bin_idx]
        self.eager = np.asarray(self.eager, dtype=int)
        self.nodes = 0
        self.lp_iterations = 0
        self.failures = 0
        self.incumbent: np.ndarray | None = None
        self.inc_obj = math.inf
        arr = self.arr
        if self.round_bound:
            # objective cutoff row, tightened whenever the incumbent improves
            A = sp.vstack([arr.A, sp.csr_matrix(arr.c)]).tocsc()
            self.work = LinearArrays(arr.c, arr.obj_const, A, np.append(arr.row_lo, -np.inf),
                                     np.append(arr.row_hi, np.inf), arr.col_lo, arr.col_hi, arr.binary)
        elif self.c is arr.c:
            self.work = arr
        else:
            self.work = LinearArrays(self.c, 0.0, arr.A, arr.row_lo, arr.row_hi,
                                     arr.col_lo, arr.col_hi, arr.binary)
        self.propagator = None
        if self.propagate and len(self.bin_idx):
            w = self.work
            self.propagator = Propagator(w.A, w.row_lo, w.row_hi, w.binary)

    def lp(self, fixes: tuple, basis=None) -> LpResult:
        lo = self.arr.col_lo.copy()
        hi = self.arr.col_hi.copy()
        for j, v in fixes:
            lo[j] = hi[j] = v
        if self.propagator is not None:
            box = self.propagator.run(lo, hi)
            if box is None:
                self.nodes += 1
                return LpResult(Status.INFEASIBLE, None, math.nan, 0)
            b = self.bin_idx
            lo[b], hi[b] = box[0][b], box[1][b]
        res = solve_arrays(self.work, lo, hi, basis=basis, deadline=self.deadline)
        res.bounds = (lo, hi)
        self.nodes += 1
        self.lp_iterations += res.iterations
        return res

    def node_bound(self, obj: float) -> float:
        if self.round_bound:
            return math.ceil(obj - INT_TOL)
        return obj

    def out_of_time(self) -> bool:
        if self.deadline is not None and time.perf_counter() > self.deadline:
            return True
        return self.max_nodes is not None and self.nodes >= self.max_nodes

    def offer(self, x: np.ndarray, obj: float) -> None:
        if obj < self.inc_obj:
            self.incumbent, self.inc_obj = x, obj
            if self.round_bound:
                self.work.row_hi[-1] = obj - self.arr.obj_const - 1.0 + CUTOFF_SLACK

    def polish(self, x: np.ndarray, basis=None) -> tuple[np.ndarray, float]:
        """Snap binaries to 0/1 and re-solve the continuous part exactly."""
        fixes = tuple((int(j), float(round(x[j]))) for j in self.bin_idx)
        res = self.lp(fixes, basis)
        if res.status is Status.OPTIMAL:
            xs = res.x
            xs[self.bin_idx] = np.round(xs[self.bin_idx])
            return xs, res.objective
        xs = x.copy()
        xs[self.bin_idx] = np.round(xs[self.bin_idx])
        return xs, float(self.c @ xs) + (self.arr.obj_const if self.c is self.arr.c else 0.0)

    def try_start(self, start) -> None:
        """Fix the binaries named by ``start`` and keep the result if it is integral."""
        if isinstance(start, dict):
            fixes = tuple((int(j), float(round(v))) for j, v in start.items() if self.arr.binary[j])
        else:
            start = np.asarray(start, dtype=float)
            fixes = tuple((int(j), float(round(start[j]))) for j in self.bin_idx)
        res = self.lp(fixes)
        if res.status is not Status.OPTIMAL:
            return
        xb = res.x[self.bin_idx]
        if np.all(np.minimum(xb, 1.0 - xb) <= INT_TOL):
            xs = res.x
            xs[self.bin_idx] = np.round(xb)
            self.offer(xs, res.objective)

    def branch_variable(self, x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> int:
        """Next binary to branch on, or -1 when the point is integral.

        Unfixed eager binaries come first, in the order given, then the most
        fractional binary among the highest-priority fractional ones.
        """
        if len(self.eager):
            open_eager = self.eager[lo[self.eager] < hi[self.eager]]
            if len(open_eager):
                return int(open_eager[0])
        xb = x[self.bin_idx]
        frac = np.minimum(xb, 1.0 - xb)
        open_ = frac > INT_TOL
        if not np.any(open_):
            return -1
        top = self.bin_prio[open_].max()
        score = np.where(open_ & (self.bin_prio == top), frac, -1.0)
        return int(self.bin_idx[int(np.argmax(score))])

    def run(self, root: LpResult) -> tuple[Status, float]:
        """Depth-first dives, backtracking to the best open bound.

        Until an incumbent exists the search backtracks to the most recent
        open node instead, which finds a first feasible point sooner.
        Returns the terminal status and the best proven lower bound.
        """
        seq = itertools.count()
        stack: list[tuple[float, int, tuple, object]] = []
        heaped = False
        pending: tuple | None = ()
        pending_lp: LpResult | None = root
        # lower bound of the pending node, inherited from its parent
        pending_bound = self.node_bound(root.objective) if root.status is Status.OPTIMAL else -math.inf
        basis = None
        while True:
            if pending is None:
                if not stack:
                    break
                if self.incumbent is not None and not heaped:
                    heapq.heapify(stack)
                    heaped = True
                bound, _, fixes, basis = heapq.heappop(stack) if heaped else stack.pop()
                if bound >= self.inc_obj - self.gap:
                    if heaped:
                        stack.clear()
                        break
                    continue
                pending, pending_lp, pending_bound = fixes, None, bound
            if self.out_of_time():
                return Status.TIME_LIMIT, min([b for b, *_ in stack] + [pending_bound, self.inc_obj])
            fixes = pending
            if self.nodes % LOG_EVERY == 0:
                log.debug("nodes %d  depth %d  open %d  incumbent %g  best bound %g", self.nodes, len(fixes),
                          len(stack), self.inc_obj, min([b for b, *_ in stack], default=math.inf))
            res = pending_lp if pending_lp is not None else self.lp(fixes, basis)
            pending, pending_lp = None, None
            if res.status is Status.INFEASIBLE:
                continue
            if res.status is Status.TIME_LIMIT:
                return Status.TIME_LIMIT, min([b for b, *_ in stack] + [pending_bound, self.inc_obj])
            if res.status is not Status.OPTIMAL:
                self.failures += 1
                continue
            bound = self.node_bound(res.objective)
            if bound >= self.inc_obj - self.gap:
                continue
            j = self.branch_variable(res.x, *res.bounds)
            if j < 0:
                self.offer(*self.polish(res.x, res.basis))
                continue
            first = 1.0 if res.x[j] >= 0.5 else 0.0
            # among equal bounds the newest node pops first
            node = (bound, -next(seq), fixes + ((j, 1.0 - first),), res.basis)
            if heaped:
                heapq.heappush(stack, node)
            else:
                stack.append(node)
            pending, basis, pending_bound = fixes + ((j, first),), res.basis, bound
        return Status.OPTIMAL, self.inc_obj


def solve_milp(model: MilpModel, time_limit: float | None = None, gap: float = DEFAULT_GAP,
               max_nodes: int | None = None, starts: Sequence = (),
               priority: Mapping[int, int] | None = None, eager: Sequence[int] = ()) -> Solution:
    """Minimize ``model`` exactly over its binaries.

    Branches on the most fractional binary (lowest id on ties), diving
    depth-first toward the nearer integer and backtracking to the open node
    with the smallest bound. Each node's LP starts from its parent's final
    basis. ``gap`` is an absolute optimality tolerance.
    ``starts`` are candidate assignments (full value arrays or ``{binary id:
    value}`` maps) tried before the search; ``priority`` maps binary ids to
    levels, higher levels being branched on first. ``eager`` binaries are
    branched on before anything else, even while the relaxation leaves them
    integral, so that bound propagation can work from their fixed values.
    Hitting ``time_limit`` (seconds) or ``max_nodes`` yields
    ``Status.TIME_LIMIT`` with the incumbent, if any, and the proven bound.
    """
    t0 = time.perf_counter()
    deadline = None if time_limit is None else t0 + time_limit
    arr = model.to_arrays()
    prio = np.zeros(len(arr.c))
    for j, level in (priority or {}).items():
        prio[j] = level
    search = _Search(arr, arr.c, gap, deadline, max_nodes, prio, eager=eager)

    def finish(status, values=None, obj=math.nan, bound=math.nan, msg=""):
        stats = SolveStats(search.nodes, search.lp_iterations, time.perf_counter() - t0)
        return Solution(status, values, obj, bound, stats, msg)

    root = search.lp(())
    if root.status is Status.INFEASIBLE:
        return finish(Status.INFEASIBLE)
    if root.status is Status.TIME_LIMIT:
        return finish(Status.TIME_LIMIT)
    if root.status is Status.ERROR:
        return finish(Status.ERROR, msg="root relaxation failed numerically")
    if root.status is Status.UNBOUNDED:
        # binaries are bounded, so any improving ray of the relaxation is a ray
        # of every integer slice: the MILP is unbounded iff it is feasible
        probe = _Search(arr, np.zeros_like(arr.c), gap, deadline, max_nodes, prio)
        res = probe.lp(())
        status, _ = probe.run(res)
        search.nodes += probe.nodes
        search.lp_iterations += probe.lp_iterations
        if status is Status.TIME_LIMIT:
            return finish(Status.TIME_LIMIT)
        if probe.incumbent is not None:
            return finish(Status.UNBOUNDED, probe.incumbent, -math.inf, -math.inf)
        return finish(Status.INFEASIBLE)

    for start in starts:
        search.try_start(start)
    if search.incumbent is not None and search.round_bound:
        # the cutoff row changed; the root relaxation must see it
        root = search.lp((), root.basis)
        if root.status is Status.INFEASIBLE:
            return finish(Status.OPTIMAL, search.incumbent, search.inc_obj, search.inc_obj)
    status, bound = search.run(root)
    if search.incumbent is None:
        if status is Status.TIME_LIMIT:
            return finish(Status.TIME_LIMIT, bound=bound)
        if search.failures:
            return finish(Status.ERROR, msg=f"{search.failures} node relaxations failed numerically")
        return finish(Status.INFEASIBLE)
    if status is Status.OPTIMAL:
        if search.failures:
            return finish(Status.ERROR, search.incumbent, search.inc_obj, math.nan,
                          f"{search.failures} node relaxations failed numerically; optimality unproven")
        return finish(Status.OPTIMAL, search.incumbent, search.inc_obj, search.inc_obj)
    return finish(status, search.incumbent, search.inc_obj, bound)


def brute_force_solve(model: MilpModel) -> Solution:
    """Enumerate every binary assignment and solve the remaining LP for each.

    Intended as a test oracle; refuses models with more than
    ``MAX_BRUTE_FORCE_BINARIES`` binaries.
    """
    t0 = time.perf_counter()
    arr = model.to_arrays()
    bins = np.nonzero(arr.binary)[0]
    if len(bins) > MAX_BRUTE_FORCE_BINARIES:
        raise TooManyBinaries(f"{len(bins)} binaries exceeds the limit of {MAX_BRUTE_FORCE_BINARIES}")
    best: np.ndarray | None = None
    best_obj = math.inf
    unbounded = False
    iters = 0
    count = 0
    for bits in itertools.product((0.0, 1.0), repeat=len(bins)):
        lo = arr.col_lo.copy()
        hi = arr.col_hi.copy()
        lo[bins] = bits
        hi[bins] = bits
        res = solve_arrays(arr, lo, hi)
        count += 1
        iters += res.iterations
        if res.status is Status.UNBOUNDED:
            unbounded = True
            best = res.x
            break
        if res.status is Status.ERROR:
            raise RuntimeError(f"LP failed numerically at assignment {bits}")
        if res.status is Status.OPTIMAL and res.objective < best_obj - 1e-12:
            best, best_obj = res.x, res.objective
    stats = SolveStats(count, iters, time.perf_counter() - t0)
    if unbounded:
        return Solution(Status.UNBOUNDED, None, -math.inf, -math.inf, stats)
    if best is None:
        return Solution(Status.INFEASIBLE, None, math.nan, math.nan, stats)
    best = best.copy()
    best[bins] = np.round(best[bins])
    return Solution(Status.OPTIMAL, best, best_obj, best_obj, stats)
