"""Band depth and modified band depth for curves on a common grid.

Both depths use bands delimited by pairs of sample curves (J=2), with all
C(N,2) unordered pairs of distinct curves contributing and band boundaries
counting as inside.  Band depth (BD) is the fraction of pairs whose band
contains the curve at every grid point; modified band depth (MBD) averages
the fraction of grid points at which the band contains the curve.  Curves
are ranked deepest first by BD, with MBD breaking ties and the original
index breaking what remains, so the order is a deterministic total order.

Internally depths are exact integer counts over a fixed denominator, which
keeps tie detection exact; the float depths are those counts normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DepthRanking",
    "band_depth",
    "modified_band_depth",
    "band_depth_counts",
    "modified_band_depth_counts",
    "rank_curves",
]


@dataclass(frozen=True)
class DepthRanking:
    """Per-curve depths plus the induced deepest-to-shallowest permutation."""

    bd: np.ndarray
    mbd: np.ndarray
    order: np.ndarray


def _check_curves(curves) -> np.ndarray:
    Y = np.asarray(curves, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"curves must be a 2-D (N, T) array, got shape {Y.shape}")
    N, T = Y.shape
    if N < 3:
        raise ValueError(f"need at least 3 curves, got {N}")
    if T < 1:
        raise ValueError("curves need at least one grid point")
    if not np.all(np.isfinite(Y)):
        raise ValueError("curves contain non-finite values")
    return Y


def band_depth_counts(curves) -> tuple[np.ndarray, int]:
    """Number of curve pairs fully containing each curve, with denominator C(N,2)."""
    Y = _check_curves(curves)
    N = Y.shape[0]
    lo = np.minimum(Y[:, None, :], Y[None, :, :])  # (N, N, T) pairwise band bounds
    hi = np.maximum(Y[:, None, :], Y[None, :, :])
    iu = np.triu_indices(N, k=1)
    counts = np.empty(N, dtype=np.int64)
    for c in range(N):
        inside = ((lo <= Y[c]) & (Y[c] <= hi)).all(axis=2)
        counts[c] = np.count_nonzero(inside[iu])
    return counts, N * (N - 1) // 2


def modified_band_depth_counts(curves) -> tuple[np.ndarray, int]:
    """Total count over grid points of containing pairs, with denominator T*C(N,2).

    At each grid point a pair fails to contain a curve exactly when both its
    members are strictly on the same side, so the per-point count is
    C(N,2) - C(above,2) - C(below,2) from strict above/below counts.
    """
    Y = _check_curves(curves)
    N, T = Y.shape
    below = np.empty((N, T), dtype=np.int64)
    above = np.empty((N, T), dtype=np.int64)
    for t in range(T):
        col = Y[:, t]
        sc = np.sort(col)
        below[:, t] = np.searchsorted(sc, col, side="left")
        above[:, t] = N - np.searchsorted(sc, col, side="right")
    total = N * (N - 1) // 2
    per_point = total - above * (above - 1) // 2 - below * (below - 1) // 2
    return per_point.sum(axis=1), total * T


def band_depth(curves) -> np.ndarray:
    """Band depth of each curve, in [0, 1]."""
    counts, denom = band_depth_counts(curves)
    return counts / denom


def modified_band_depth(curves) -> np.ndarray:
    """Modified band depth of each curve, in [0, 1]; always >= band depth."""
    counts, denom = modified_band_depth_counts(curves)
    return counts / denom


def rank_curves(curves) -> DepthRanking:
    """Depth ranking: BD descending, ties by MBD descending, then by index."""
    bd_cnt, bd_den = band_depth_counts(curves)
    mbd_cnt, mbd_den = modified_band_depth_counts(curves)
    idx = np.arange(bd_cnt.size)
    order = np.lexsort((idx, -mbd_cnt, -bd_cnt))
    return DepthRanking(bd=bd_cnt / bd_den, mbd=mbd_cnt / mbd_den, order=order)
