"""Exact fast scorer for depth-rank proportions against a reference set.

For a candidate curve x and reference curves R, the score is the number of
reference curves strictly below x in the BD-then-MBD-then-index ordering of
the pool {x} u R (the candidate takes index 0, so full depth ties resolve
with the candidate on top and are flagged).

The fast path encodes, per curve, the grid points where another curve sits
strictly above (or below) it as bits of an int64.  A pair of curves fails
to contain a third at some point exactly when both sit strictly on the same
side there, so full containment is two bitmask intersections being empty.
This reproduces the direct O(N^2 T)-per-curve band-depth counts exactly --
including ties and crossings -- while sharing all reference-only work
across candidates.  Grids longer than 62 points fall back to the direct
implementation.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .depth import band_depth_counts, modified_band_depth_counts

__all__ = ["ReferenceScorer", "score_direct"]

_MAX_FAST_GRID = 62


@njit(cache=True)
def _ref_pair_counts(above, below):
    """For each l: number of reference pairs whose band contains curve l throughout."""
    r = above.shape[0]
    out = np.empty(r, np.int64)
    for l in range(r):
        A = above[l]
        B = below[l]
        cnt = 0
        for a in range(r):
            Aa = A[a]
            Ba = B[a]
            for b in range(a + 1, r):
                if (Aa & A[b]) == 0 and (Ba & B[b]) == 0:
                    cnt += 1
        out[l] = cnt
    return out


@njit(cache=True)
def _score_kernel(ref, above_m, below_m, count_r, above_c, below_c, cands):
    r, T = ref.shape
    n_cand = cands.shape[0]
    n_pool = r + 1
    tot = n_pool * (n_pool - 1) // 2
    r_counts = np.empty(n_cand, np.int64)
    ties = np.zeros(n_cand, np.bool_)
    ref_a = np.empty(r, np.int64)
    ref_b = np.empty(r, np.int64)
    above_t = np.empty(T, np.int64)
    below_t = np.empty(T, np.int64)
    bd_ref = np.empty(r, np.int64)
    mbd_ref = np.empty(r, np.int64)
    for c in range(n_cand):
        cand = cands[c]
        for t in range(T):
            above_t[t] = 0
            below_t[t] = 0
        for l in range(r):
            a_bits = 0
            b_bits = 0
            for t in range(T):
                yl = ref[l, t]
                cv = cand[t]
                if yl > cv:
                    a_bits |= 1 << t
                    above_t[t] += 1
                elif yl < cv:
                    b_bits |= 1 << t
                    below_t[t] += 1
            ref_a[l] = a_bits
            ref_b[l] = b_bits
        # candidate band depth: reference pairs containing it, plus its own r pairs
        bd_c = r
        for a in range(r):
            Aa = ref_a[a]
            Ba = ref_b[a]
            for b in range(a + 1, r):
                if (Aa & ref_a[b]) == 0 and (Ba & ref_b[b]) == 0:
                    bd_c += 1
        mbd_c = 0
        for t in range(T):
            au = above_t[t]
            bu = below_t[t]
            mbd_c += tot - au * (au - 1) // 2 - bu * (bu - 1) // 2
        # pool depths of the reference curves: shared pair counts plus pairs with the candidate
        for l in range(r):
            cand_above_l = ref_b[l]  # candidate above l exactly where l is below the candidate
            cand_below_l = ref_a[l]
            cnt = 0
            for j in range(r):
                if (cand_above_l & above_m[l, j]) == 0 and (cand_below_l & below_m[l, j]) == 0:
                    cnt += 1
            bd_ref[l] = count_r[l] + cnt
            acc = 0
            for t in range(T):
                au = above_c[l, t]
                bu = below_c[l, t]
                if cand[t] > ref[l, t]:
                    au += 1
                elif cand[t] < ref[l, t]:
                    bu += 1
                acc += tot - au * (au - 1) // 2 - bu * (bu - 1) // 2
            mbd_ref[l] = acc
        below_cnt = 0
        tie = False
        for l in range(r):
            if bd_ref[l] < bd_c:
                below_cnt += 1
            elif bd_ref[l] == bd_c:
                if mbd_ref[l] < mbd_c:
                    below_cnt += 1
                elif mbd_ref[l] == mbd_c:
                    below_cnt += 1  # index rule: the candidate precedes on full ties
                    tie = True
        r_counts[c] = below_cnt
        ties[c] = tie
    return r_counts, ties


def score_direct(ref_curves: np.ndarray, cand_curves: np.ndarray):
    """Reference implementation via full pool depth computations (exact)."""
    ref = np.asarray(ref_curves, dtype=float)
    cands = np.atleast_2d(np.asarray(cand_curves, dtype=float))
    r = ref.shape[0]
    r_counts = np.empty(cands.shape[0], dtype=np.int64)
    ties = np.zeros(cands.shape[0], dtype=bool)
    for c in range(cands.shape[0]):
        pool = np.vstack([cands[c : c + 1], ref])
        bd_cnt, _ = band_depth_counts(pool)
        mbd_cnt, _ = modified_band_depth_counts(pool)
        below = (bd_cnt[1:] < bd_cnt[0]) | (
            (bd_cnt[1:] == bd_cnt[0]) & (mbd_cnt[1:] <= mbd_cnt[0])
        )
        full_tie = (bd_cnt[1:] == bd_cnt[0]) & (mbd_cnt[1:] == mbd_cnt[0])
        r_counts[c] = int(np.count_nonzero(below))
        ties[c] = bool(full_tie.any())
    return r_counts, ties


class ReferenceScorer:
    """Precomputed scorer for repeated candidate batches against one reference set."""

    def __init__(self, ref_curves: np.ndarray, engine: str = "fast"):
        ref = np.asarray(ref_curves, dtype=float)
        if ref.ndim != 2 or ref.shape[0] < 2:
            raise ValueError("reference must be a 2-D array with at least 2 curves")
        if not np.all(np.isfinite(ref)):
            raise ValueError("reference curves contain non-finite values")
        if engine not in ("fast", "direct"):
            raise ValueError(f"unknown scorer engine {engine!r}")
        self.ref = ref
        self.r, self.T = ref.shape
        self.engine = "direct" if (engine == "fast" and self.T > _MAX_FAST_GRID) else engine
        if self.engine == "fast":
            gt = ref[None, :, :] > ref[:, None, :]  # gt[l, j, t]: curve j above curve l at t
            lt = ref[None, :, :] < ref[:, None, :]
            weights = (1 << np.arange(self.T)).astype(np.int64)
            self._above_m = gt.astype(np.int64) @ weights
            self._below_m = lt.astype(np.int64) @ weights
            self._above_c = gt.sum(axis=1, dtype=np.int64)
            self._below_c = lt.sum(axis=1, dtype=np.int64)
            self._count_r = _ref_pair_counts(self._above_m, self._below_m)

    def scores(self, cand_curves: np.ndarray):
        """Return (proportions, raw counts, tie flags) for each candidate curve."""
        cands = np.atleast_2d(np.asarray(cand_curves, dtype=float))
        if cands.shape[1] != self.T:
            raise ValueError(
                f"candidates have {cands.shape[1]} grid points, reference has {self.T}"
            )
        if not np.all(np.isfinite(cands)):
            raise ValueError("candidate curves contain non-finite values")
        if self.engine == "fast":
            counts, ties = _score_kernel(
                self.ref,
                self._above_m,
                self._below_m,
                self._count_r,
                self._above_c,
                self._below_c,
                cands,
            )
        else:
            counts, ties = score_direct(self.ref, cands)
        return counts / self.r, counts, ties
