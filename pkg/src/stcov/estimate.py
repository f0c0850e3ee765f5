"""Sample cross-covariances and empirical test functions per site pair.

The lag-u cross-covariance of two series follows the windowed form

    C_hat(u) = (1/(p-u)) sum_{i=1..p-u} {x_i - mean(x_1..x_{p-u})}
                                        {y_{i+u} - mean(y_{u+1}..y_p)},

with C_hat(x, y, -u) = C_hat(y, x, u).  From these, each unordered site
pair yields one separability curve f_hat(u) on lags 0..U or one symmetry
curve g_hat(u) on lags 1..U, collected into a :class:`CurveSet`.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import SpaceTimeDataset
from .errors import ConfigError, DegeneratePairError
from .rng import Seed

log = logging.getLogger(__name__)

__all__ = [
    "CurveSet",
    "cross_cov_hat",
    "cross_cov_matrices",
    "sep_test_fn_hat",
    "sym_test_fn_hat",
    "all_pairs_test_fns",
    "write_curves_csv",
    "read_curves_csv",
]

KINDS = ("separability", "symmetry")
C0_MODES = ("pair", "global")


@dataclass
class CurveSet:
    """Test-function curves on a shared integer lag grid, one per site pair.

    ``pairs[k]`` gives the two site indices behind ``curves[k]`` in the
    orientation actually used, and ``lag_vectors[k]`` the corresponding
    spatial lag h.  Separability curves start at lag 0 with value exactly 0;
    symmetry curves start at lag 1.
    """

    kind: str
    lags: np.ndarray
    curves: np.ndarray
    pairs: np.ndarray
    lag_vectors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        self.lags = np.asarray(self.lags, dtype=int)
        self.curves = np.asarray(self.curves, dtype=float)
        self.pairs = np.asarray(self.pairs, dtype=int)
        self.lag_vectors = np.asarray(self.lag_vectors, dtype=float)
        if self.curves.ndim != 2 or self.curves.shape[1] != self.lags.size:
            raise ConfigError("curves must be (n_curves, n_lags)")
        if self.pairs.shape != (self.n_curves, 2) or self.lag_vectors.shape != (self.n_curves, 2):
            raise ConfigError("pairs and lag_vectors must be (n_curves, 2)")
        if not np.all(np.isfinite(self.curves)):
            raise ConfigError("curves contain non-finite values")
        if self.kind == "separability":
            if self.lags[0] != 0 or np.any(self.curves[:, 0] != 0.0):
                raise ConfigError("separability curves must start at lag 0 with value 0")
        elif self.lags.size and self.lags[0] != 1:
            raise ConfigError("symmetry curves must start at lag 1")

    @property
    def n_curves(self) -> int:
        return self.curves.shape[0]


def _window_cross_cov(x: np.ndarray, y: np.ndarray, u: int) -> float:
    p = x.size
    xw = x[: p - u]
    yw = y[u:]
    return float(np.dot(xw - xw.mean(), yw - yw.mean()) / (p - u))


def cross_cov_hat(x, y, u: int) -> float:
    """Lag-``u`` sample cross-covariance of the series ``x`` and ``y``.

    Positive ``u`` pairs x at time t with y at time t+u; negative lags use
    the identity C_hat(x, y, -u) = C_hat(y, x, u).  Requires |u| <= p-2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ConfigError(f"series must be equal-length 1-D arrays, got {x.shape}, {y.shape}")
    p = x.size
    if p < 2:
        raise ConfigError("series must have at least 2 observations")
    if abs(u) > p - 2:
        raise ConfigError(f"|u|={abs(u)} exceeds the maximum usable lag p-2={p - 2}")
    if u < 0:
        return _window_cross_cov(y, x, -u)
    return _window_cross_cov(x, y, u)


def cross_cov_matrices(values: np.ndarray, max_lag: int) -> np.ndarray:
    """All-pairs cross-covariances: C[u, i, j] = C_hat(series_i, series_j, u).

    One matrix per lag u = 0..max_lag, computed with the same windowed
    means as :func:`cross_cov_hat` but batched over site pairs.
    """
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    if max_lag > p - 2:
        raise ConfigError(f"max_lag={max_lag} exceeds the maximum usable lag p-2={p - 2}")
    out = np.empty((max_lag + 1, n, n))
    for u in range(max_lag + 1):
        X = values[:, : p - u]
        Y = values[:, u:]
        Xd = X - X.mean(axis=1, keepdims=True)
        Yd = Y - Y.mean(axis=1, keepdims=True)
        out[u] = Xd @ Yd.T / (p - u)
    return out


def _canonical_sym_pair(sites: np.ndarray, i: int, j: int) -> tuple[int, int]:
    """Orient (i, j) so the lag s_j - s_i has positive first nonzero coordinate."""
    h = sites[j] - sites[i]
    first = h[0] if h[0] != 0.0 else h[1]
    return (i, j) if first > 0 else (j, i)


def sep_test_fn_hat(
    dataset: SpaceTimeDataset, pair: tuple[int, int], max_lag: int, c0_mode: str = "pair"
) -> np.ndarray:
    """Estimated separability test function for one site pair, lags 0..max_lag.

    The purely temporal term C_hat(0, u) averages the two sites' own
    autocovariances (``c0_mode="pair"``) or all sites' (``"global"``).
    Raises :class:`DegeneratePairError` when a denominator vanishes.
    """
    i, j = pair
    x, y = dataset.values[i], dataset.values[j]
    ch = np.array([cross_cov_hat(x, y, u) for u in range(max_lag + 1)])
    if c0_mode == "pair":
        own = [dataset.values[k] for k in (i, j)]
    elif c0_mode == "global":
        own = list(dataset.values)
    else:
        raise ConfigError(f"c0_mode must be one of {C0_MODES}, got {c0_mode!r}")
    c0 = np.mean(
        [[cross_cov_hat(s, s, u) for u in range(max_lag + 1)] for s in own], axis=0
    )
    if ch[0] == 0.0 or c0[0] == 0.0:
        raise DegeneratePairError((i, j))
    return ch / ch[0] - c0 / c0[0]


def sym_test_fn_hat(
    dataset: SpaceTimeDataset, pair: tuple[int, int], max_lag: int
) -> np.ndarray:
    """Estimated symmetry test function for one site pair, lags 1..max_lag.

    The pair is first oriented so its spatial lag has a positive leading
    coordinate, fixing the sign convention regardless of input order.
    """
    a, b = _canonical_sym_pair(dataset.sites, *pair)
    x, y = dataset.values[a], dataset.values[b]
    return np.array(
        [cross_cov_hat(x, y, u) - cross_cov_hat(x, y, -u) for u in range(1, max_lag + 1)]
    )


def all_pairs_test_fns(
    dataset: SpaceTimeDataset, kind: str, max_lag: int, c0_mode: str = "pair"
) -> CurveSet:
    """Estimate the test function of ``kind`` for every unordered site pair.

    Curves are ordered lexicographically in the pair indices (i < j).
    Degenerate zero-variance pairs are dropped with a logged warning; fewer
    than two usable sites is an error.
    """
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if c0_mode not in C0_MODES:
        raise ConfigError(f"c0_mode must be one of {C0_MODES}, got {c0_mode!r}")
    n, p = dataset.n_sites, dataset.n_times
    if n < 2:
        raise ConfigError("need at least 2 sites to form pairs")
    if max_lag < 1 or max_lag > p - 2:
        raise ConfigError(f"max_lag must be in [1, p-2] = [1, {p - 2}], got {max_lag}")

    C = cross_cov_matrices(dataset.values, max_lag)
    variances = C[0].diagonal().copy()
    good = variances > 0.0
    auto = C[:, np.arange(n), np.arange(n)]  # (U+1, n): per-site autocovariances
    global_c0 = auto[:, good].mean(axis=1) if good.any() else None

    curves, pairs, lag_vecs, dropped = [], [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            if not (good[i] and good[j]) or C[0, i, j] == 0.0:
                dropped.append((i, j))
                continue
            if kind == "separability":
                c0 = global_c0 if c0_mode == "global" else (auto[:, i] + auto[:, j]) / 2.0
                if c0[0] == 0.0:
                    dropped.append((i, j))
                    continue
                f = C[:, i, j] / C[0, i, j] - c0 / c0[0]
                a, b = i, j
            else:
                a, b = _canonical_sym_pair(dataset.sites, i, j)
                f = C[1:, a, b] - C[1:, b, a]
            curves.append(f)
            pairs.append((a, b))
            lag_vecs.append(dataset.sites[b] - dataset.sites[a])
    if dropped:
        log.warning("dropped %d degenerate site pair(s): %s", len(dropped), dropped)
    if len(curves) < 1:
        raise DegeneratePairError(
            dropped[0] if dropped else (0, 1), "fewer than one usable site pair"
        )
    lags = np.arange(0, max_lag + 1) if kind == "separability" else np.arange(1, max_lag + 1)
    meta = {"max_lag": int(max_lag), "c0_mode": c0_mode, "n_sites": int(n), "p": int(p)}
    if dropped:
        meta["dropped_pairs"] = [list(d) for d in dropped]
    return CurveSet(
        kind=kind,
        lags=lags,
        curves=np.array(curves),
        pairs=np.array(pairs),
        lag_vectors=np.array(lag_vecs),
        meta=meta,
    )


def write_curves_csv(cs: CurveSet, path, write_meta: bool = True) -> Path:
    """Write a CurveSet as CSV (one row per curve) plus a metadata sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "hx", "hy"] + [f"u{int(u)}" for u in cs.lags])
        for k in range(cs.n_curves):
            row = [int(cs.pairs[k, 0]), int(cs.pairs[k, 1])]
            row += [repr(float(v)) for v in cs.lag_vectors[k]]
            row += [repr(float(v)) for v in cs.curves[k]]
            w.writerow(row)
    if write_meta:
        meta = dict(cs.meta)
        meta["kind"] = cs.kind
        meta["lags"] = [int(u) for u in cs.lags]
        with open(path.with_suffix(".meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def read_curves_csv(path) -> CurveSet:
    """Read a CurveSet written by :func:`write_curves_csv`.

    The lag grid comes from the header; the kind comes from the metadata
    sidecar when present, else is inferred from the first lag.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 5 or rows[0][:4] != ["i", "j", "hx", "hy"]:
        raise ConfigError(f"{path}: expected header i,j,hx,hy,u<lag>,...")
    try:
        lags = np.array([int(c[1:]) for c in rows[0][4:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: bad lag column in header: {exc}") from exc
    pairs, lag_vecs, curves = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != 4 + lags.size:
            raise ConfigError(f"{path}: row {ln} has {len(row)} fields, expected {4 + lags.size}")
        pairs.append([int(row[0]), int(row[1])])
        lag_vecs.append([float(row[2]), float(row[3])])
        curves.append([float(v) for v in row[4:]])
    meta = {}
    mp = path.with_suffix(".meta.json")
    if mp.exists():
        with open(mp) as fh:
            meta = json.load(fh)
    kind = meta.get("kind", "separability" if lags.size and lags[0] == 0 else "symmetry")
    return CurveSet(
        kind=kind,
        lags=lags,
        curves=np.array(curves),
        pairs=np.array(pairs),
        lag_vectors=np.array(lag_vecs),
        meta=meta,
    )
