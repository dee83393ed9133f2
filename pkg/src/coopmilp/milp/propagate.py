"""Activity-based bound propagation for node preprocessing.

For each row the smallest and largest activity over the current box give a
bound on every variable in it; binaries are rounded. Rounds repeat until
nothing binary changes and continuous bounds settle. Only binary fixings
and infeasibility are reported back, so the LP never sees tightened
continuous bounds that might carry rounding error.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

ROUND_TOL = 1e-6
INFEAS_TOL = 1e-6
MAX_ROUNDS = 40


class Propagator:
    def __init__(self, A: sp.spmatrix, row_lo, row_hi, binary):
        A = sp.coo_matrix(A)
        keep = A.data != 0.0
        self.rows = A.row[keep]
        self.cols = A.col[keep]
        self.vals = A.data[keep]
        self.m, self.n = A.shape
        self.row_lo = np.asarray(row_lo, dtype=float)
        self.row_hi = np.asarray(row_hi, dtype=float)
        self.binary = np.asarray(binary, dtype=bool)
        self.pos = self.vals > 0

    def _activity(self, lo_e, hi_e):
        """Per-row finite part and count of infinite terms of the min and max activity."""
        v = self.vals
        low = np.where(self.pos, v * lo_e, v * hi_e)
        high = np.where(self.pos, v * hi_e, v * lo_e)
        low_inf = ~np.isfinite(low)
        high_inf = ~np.isfinite(high)
        low_f = np.where(low_inf, 0.0, low)
        high_f = np.where(high_inf, 0.0, high)
        m = self.m
        sum_low = np.bincount(self.rows, low_f, m)
        sum_high = np.bincount(self.rows, high_f, m)
        n_low = np.bincount(self.rows, low_inf, m)
        n_high = np.bincount(self.rows, high_inf, m)
        return low_f, high_f, low_inf, high_inf, sum_low, sum_high, n_low, n_high

    def run(self, lo, hi, row_hi=None):
        """Tightened ``(lo, hi)`` copies, or None when the box is empty."""
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        r, c, v = self.rows, self.cols, self.vals
        rlo = self.row_lo
        rhi = self.row_hi if row_hi is None else row_hi
        for _ in range(MAX_ROUNDS):
            low_f, high_f, low_inf, high_inf, sl, sh, nl, nh = self._activity(lo[c], hi[c])
            if np.any(sl[nl == 0] > rhi[nl == 0] + INFEAS_TOL * (1 + np.abs(rhi[nl == 0]))) or \
               np.any(sh[nh == 0] < rlo[nh == 0] - INFEAS_TOL * (1 + np.abs(rlo[nh == 0]))):
                return None
            # activity of the other terms in the row
            res_low = np.where(low_inf, np.where(nl[r] == 1, sl[r], -np.inf),
                               np.where(nl[r] == 0, sl[r] - low_f, -np.inf))
            res_high = np.where(high_inf, np.where(nh[r] == 1, sh[r], np.inf),
                                np.where(nh[r] == 0, sh[r] - high_f, np.inf))
            with np.errstate(invalid="ignore"):
                from_hi = (rhi[r] - res_low) / v
                from_lo = (rlo[r] - res_high) / v
            from_hi = np.where(np.isnan(from_hi), np.where(self.pos, np.inf, -np.inf), from_hi)
            from_lo = np.where(np.isnan(from_lo), np.where(self.pos, -np.inf, np.inf), from_lo)
            ub = np.where(self.pos, from_hi, from_lo)
            lb = np.where(self.pos, from_lo, from_hi)
            new_hi = hi.copy()
            new_lo = lo.copy()
            np.minimum.at(new_hi, c, ub)
            np.maximum.at(new_lo, c, lb)
            b = self.binary
            new_hi[b] = np.floor(new_hi[b] + ROUND_TOL)
            new_lo[b] = np.ceil(new_lo[b] - ROUND_TOL)
            # continuous bounds only move when it matters
            cont = ~b
            with np.errstate(invalid="ignore"):
                small_h = cont & np.isfinite(hi) & (hi - new_hi <= 1e-7 * (1 + np.abs(hi)))
                small_l = cont & np.isfinite(lo) & (new_lo - lo <= 1e-7 * (1 + np.abs(lo)))
            new_hi[small_h] = hi[small_h]
            new_lo[small_l] = lo[small_l]
            if np.any(new_lo > new_hi + INFEAS_TOL * (1 + np.abs(new_hi))):
                return None
            new_hi = np.maximum(new_hi, new_lo)
            changed_bin = np.any((new_lo != lo) & b) or np.any((new_hi != hi) & b)
            changed_cont = np.any((new_lo != lo) & cont) or np.any((new_hi != hi) & cont)
            lo, hi = new_lo, new_hi
            if not changed_bin and not changed_cont:
                break
        return lo, hi
