"""Depth-rank two-sample test for separability and full symmetry.

Procedure, per test kind:

1. estimate the observed test-function curves, one per site pair;
2. build a null covariance from the data (a separable product of the
   lag-zero spatial covariance and the site-averaged temporal
   autocovariance, or the time-symmetrized space-time covariance), and
   simulate a null curve set and a reference curve set from it;
3. score every observed curve by the proportion of reference curves ranked
   strictly below it in the BD-then-MBD depth order of candidate+reference;
4. score the null curves the same way;
5. pool the two score vectors, rank ascending with midrank ties, and sum
   the observed scores' ranks into the statistic W.

Small W means the observed curves sit low in the null depth ranking, so
the test rejects in the lower tail.  Critical values come from b bootstrap
repetitions of steps 1-5 on fresh data simulated from the same null
covariance; p = (1 + #{null W <= W}) / (b + 1).
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import multiprocessing
import numpy as np
import scipy.stats
from threadpoolctl import threadpool_limits

from ._scoring import ReferenceScorer
from .dataset import SpaceTimeDataset
from .errors import ConfigError, DegeneratePairError
from .estimate import KINDS, CurveSet, all_pairs_test_fns, cross_cov_matrices
from .models import EmpiricalSeparable, EmpiricalSymmetrized
from .rng import (
    ROLE_H0,
    ROLE_PSEUDO_OBS,
    ROLE_REFERENCE,
    STAGE_BOOTSTRAP,
    STAGE_OBSERVED,
    Seed,
    seed_path,
)
from .simulate import BlockSampler, KronSampler

__all__ = [
    "RankTestConfig",
    "RankTestReport",
    "build_h0_spec",
    "rank_scores",
    "w_statistic",
    "rank_test",
    "write_report_json",
]


@dataclass
class RankTestConfig:
    """Configuration of one rank test run.

    ``m`` and ``r`` count the simulated datasets pooled into the null and
    reference curve sets (each contributes all its site-pair curves).
    ``b`` bootstrap replicates calibrate the critical value; every
    stochastic step derives from ``seed`` alone.  ``frozen_reference``
    reuses the original null/reference sets across bootstrap replicates (a
    cheaper approximation, excluded from acceptance runs).
    """

    kind: str
    seed: Seed = None
    max_lag: int = 10
    m: int = 1
    r: int = 1
    b: int = 100
    alpha: float = 0.05
    c0_mode: str = "pair"
    h0_horizon: int | None = None
    h0_block_len: int | None = None
    frozen_reference: bool = False
    threads: int = 1
    engine: str = "fast"
    progress: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.seed is None:
            raise ConfigError("rank test requires an explicit seed")
        if min(self.m, self.r, self.b) < 1:
            raise ConfigError("m, r and b must all be >= 1")
        if self.max_lag < 1:
            raise ConfigError("max_lag must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")

    def resolved_horizon(self) -> int:
        return self.max_lag if self.h0_horizon is None else int(self.h0_horizon)

    def resolved_block_len(self) -> int:
        return 2 * self.resolved_horizon() if self.h0_block_len is None else int(self.h0_block_len)

    def to_json_dict(self) -> dict:
        out = asdict(self)
        out["seed"] = list(seed_path(self.seed))
        return out


@dataclass
class RankTestReport:
    """Outcome of a rank test with full provenance."""

    kind: str
    W: float
    null_W: np.ndarray
    p_value: float
    r_obs: np.ndarray
    r_h0: np.ndarray
    n_obs: int
    n_h0: int
    n_ref: int
    reject: bool
    alpha: float
    ties_obs: bool
    ties_h0: bool
    h0_spec_meta: dict
    seeds: dict
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "W": self.W,
            "null_W": [float(w) for w in self.null_W],
            "p_value": self.p_value,
            "r_obs": [float(v) for v in self.r_obs],
            "r_h0": [float(v) for v in self.r_h0],
            "n_obs": self.n_obs,
            "n_h0": self.n_h0,
            "n_ref": self.n_ref,
            "reject": self.reject,
            "alpha": self.alpha,
            "ties_obs": self.ties_obs,
            "ties_h0": self.ties_h0,
            "h0_spec_meta": self.h0_spec_meta,
            "seeds": self.seeds,
            "config": self.config,
        }

    def one_line_summary(self) -> str:
        verdict = "reject" if self.reject else "retain"
        return (
            f"W={self.W:.1f} p={self.p_value:.6g} -> {verdict} H0:{self.kind} "
            f"at alpha={self.alpha:g} (n={self.n_obs}, m={self.n_h0}, r={self.n_ref}, "
            f"b={len(self.null_W)})"
        )


def build_h0_spec(dataset: SpaceTimeDataset, kind: str, max_lag: int = 10, horizon: int | None = None):
    """Construct the empirical null covariance for the requested test kind.

    Separability: the lag-zero spatial sample covariance times the
    site-averaged temporal autocovariance (divisor p, global means),
    normalized by the averaged variance so the field variance matches the
    data.  Symmetry: the space-time sample covariance truncated at
    ``horizon`` (default ``max_lag``) with positive and negative temporal
    lags averaged.
    """
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    values = dataset.values
    n, p = values.shape
    if not np.any(values.std(axis=1) > 0):
        raise DegeneratePairError((0, 0), "dataset has zero variance everywhere")
    if kind == "separability":
        demeaned = values - values.mean(axis=1, keepdims=True)
        spatial = demeaned @ demeaned.T / p
        acov = np.zeros(p)
        for xd in demeaned:
            acov += np.correlate(xd, xd, mode="full")[p - 1 :]
        acov /= n * p
        return EmpiricalSeparable(
            sites=dataset.sites, spatial_cov=spatial, temporal_autocov=acov
        )
    hor = max_lag if horizon is None else int(horizon)
    if hor > p - 2:
        raise ConfigError(f"horizon {hor} exceeds the maximum usable lag p-2={p - 2}")
    C = cross_cov_matrices(values, hor)
    kernel = (C + np.swapaxes(C, 1, 2)) / 2.0
    return EmpiricalSymmetrized(sites=dataset.sites, kernel=kernel)


def rank_scores(observed, reference, engine: str = "fast", return_ties: bool = False):
    """Proportion of reference curves ranked strictly below each observed curve.

    Each observed curve is pooled with the full reference set; the pool is
    ordered by band depth, modified band depth, then pool index (candidate
    first); and the curve's score is the fraction of reference curves below
    it.  Inputs are :class:`CurveSet` or plain (N, T) arrays on a common
    grid.
    """
    obs_arr, obs_lags = _curves_and_lags(observed)
    ref_arr, ref_lags = _curves_and_lags(reference)
    if obs_lags is not None and ref_lags is not None and not np.array_equal(obs_lags, ref_lags):
        raise ConfigError(f"lag grids differ: {obs_lags} vs {ref_lags}")
    if ref_arr.shape[0] < 2:
        raise ConfigError("reference set must contain at least 2 curves")
    props, _, ties = ReferenceScorer(ref_arr, engine=engine).scores(obs_arr)
    if return_ties:
        return props, ties
    return props


def _curves_and_lags(obj):
    if isinstance(obj, CurveSet):
        return obj.curves, np.asarray(obj.lags)
    return np.atleast_2d(np.asarray(obj, dtype=float)), None


def w_statistic(r_obs, r_h0) -> float:
    """Rank-sum of the observed scores in the pooled ascending order (midranks)."""
    r_obs = np.atleast_1d(np.asarray(r_obs, dtype=float))
    r_h0 = np.atleast_1d(np.asarray(r_h0, dtype=float))
    if r_obs.size < 1 or r_h0.size < 1:
        raise ConfigError("both score vectors must be non-empty")
    ranks = scipy.stats.rankdata(np.concatenate([r_obs, r_h0]), method="average")
    return float(ranks[: r_obs.size].sum())


class _H0Pipeline:
    """Shared machinery for one rank test: H0 sampler plus curve extraction."""

    def __init__(self, dataset: SpaceTimeDataset, config: RankTestConfig):
        self.config = config
        self.p = dataset.n_times
        self.kind = config.kind
        h0 = build_h0_spec(
            dataset, config.kind, config.max_lag, config.resolved_horizon()
        )
        self.h0_meta = {"family": h0.family}
        if config.kind == "separability":
            c00 = h0.c00
            self.sampler = KronSampler(
                h0.spatial_cov, h0.temporal_autocov / c00, sites=h0.sites
            )
            self.h0_meta.update(
                {"c00": c00, "psd_clip_mass": self.sampler.clip_mass,
                 "jitter": max(self.sampler.f_s.jitter, self.sampler.f_t.jitter)}
            )
            self._draw = lambda seed, *path: self.sampler.dataset(seed, *path)
        else:
            block = config.resolved_block_len()
            if self.p % block != 0:
                block = self._compatible_block(self.p, block)
            self.sampler = BlockSampler(
                h0, h0.sites, block_len=block, psd_repair=True
            )
            self.h0_meta.update(
                {
                    "horizon": config.resolved_horizon(),
                    "block_len": block,
                    "psd_clip_mass": self.sampler.clip_mass,
                    "jitter": max(self.sampler.f11.jitter, self.sampler.f_cond.jitter),
                }
            )
            self._draw = lambda seed, *path: self.sampler.dataset(self.p, seed, *path)

    @staticmethod
    def _compatible_block(p: int, want: int) -> int:
        for cand in range(want, p + 1):
            if p % cand == 0:
                return cand
        return p

    def curves(self, ds: SpaceTimeDataset) -> CurveSet:
        return all_pairs_test_fns(ds, self.kind, self.config.max_lag, self.config.c0_mode)

    def simulate_curves(self, seed, stage, rep, role, k) -> CurveSet:
        return self.curves(self._draw(seed, stage, rep, role, k))

    def curve_matrix(self, seed, stage, rep, role, count) -> np.ndarray:
        sets = [self.simulate_curves(seed, stage, rep, role, k).curves for k in range(count)]
        return np.vstack(sets)


def _steps_3_to_5(pipeline: _H0Pipeline, obs_curves: np.ndarray, stage: int, rep: int):
    cfg = pipeline.config
    ref = pipeline.curve_matrix(cfg.seed, stage, rep, ROLE_REFERENCE, cfg.r)
    h0 = pipeline.curve_matrix(cfg.seed, stage, rep, ROLE_H0, cfg.m)
    scorer = ReferenceScorer(ref, engine=cfg.engine)
    r_obs, _, ties_o = scorer.scores(obs_curves)
    r_h0, _, ties_h = scorer.scores(h0)
    return (
        w_statistic(r_obs, r_h0),
        r_obs,
        r_h0,
        bool(ties_o.any()),
        bool(ties_h.any()),
        ref.shape[0],
    )


def _frozen_replicate_w(pipeline, scorer, r_h0, t):
    cfg = pipeline.config
    pseudo = pipeline.simulate_curves(cfg.seed, STAGE_BOOTSTRAP, t, ROLE_PSEUDO_OBS, 0)
    r_ps, _, _ = scorer.scores(pseudo.curves)
    return w_statistic(r_ps, r_h0)


def _fresh_replicate_w(pipeline, t):
    cfg = pipeline.config
    pseudo = pipeline.simulate_curves(cfg.seed, STAGE_BOOTSTRAP, t, ROLE_PSEUDO_OBS, 0)
    return _steps_3_to_5(pipeline, pseudo.curves, STAGE_BOOTSTRAP, t)[0]


_WORKER_CTX: dict = {}


def _worker_init(limit=1):
    threadpool_limits(limits=limit)


def _worker_replicate(t: int) -> float:
    pipeline = _WORKER_CTX["pipeline"]
    if _WORKER_CTX["frozen"]:
        return _frozen_replicate_w(pipeline, _WORKER_CTX["scorer"], _WORKER_CTX["r_h0"], t)
    return _fresh_replicate_w(pipeline, t)


def rank_test(dataset: SpaceTimeDataset, config: RankTestConfig) -> RankTestReport:
    """Run the full depth-rank bootstrap test; deterministic in (dataset, config).

    Bootstrap replicates may run in parallel (``config.threads``); per-
    replicate random substreams and index-ordered reduction make the output
    independent of the worker count.
    """
    if dataset.n_sites < 2:
        raise ConfigError("rank test needs at least 2 sites")
    if dataset.n_times <= 2 * config.max_lag:
        raise ConfigError(
            f"series length p={dataset.n_times} must exceed 2*max_lag={2 * config.max_lag}"
        )
    with threadpool_limits(limits=1):
        pipeline = _H0Pipeline(dataset, config)
        obs_curves = pipeline.curves(dataset)
        W_obs, r_obs, r_h0, ties_o, ties_h, n_ref = _steps_3_to_5(
            pipeline, obs_curves.curves, STAGE_OBSERVED, 0
        )
        frozen_scorer = None
        if config.frozen_reference:
            ref = pipeline.curve_matrix(config.seed, STAGE_OBSERVED, 0, ROLE_REFERENCE, config.r)
            frozen_scorer = ReferenceScorer(ref, engine=config.engine)

        null_W = np.empty(config.b)
        if config.threads > 1:
            _WORKER_CTX.clear()
            _WORKER_CTX.update(
                {"pipeline": pipeline, "frozen": config.frozen_reference,
                 "scorer": frozen_scorer, "r_h0": r_h0}
            )
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(
                max_workers=config.threads, mp_context=ctx, initializer=_worker_init
            ) as ex:
                for i, w in enumerate(ex.map(_worker_replicate, range(1, config.b + 1))):
                    null_W[i] = w
                    _progress(config, i + 1)
            _WORKER_CTX.clear()
        else:
            for t in range(1, config.b + 1):
                if config.frozen_reference:
                    null_W[t - 1] = _frozen_replicate_w(pipeline, frozen_scorer, r_h0, t)
                else:
                    null_W[t - 1] = _fresh_replicate_w(pipeline, t)
                _progress(config, t)

    p_value = (1.0 + int(np.count_nonzero(null_W <= W_obs))) / (config.b + 1.0)
    return RankTestReport(
        kind=config.kind,
        W=W_obs,
        null_W=null_W,
        p_value=p_value,
        r_obs=r_obs,
        r_h0=r_h0,
        n_obs=r_obs.size,
        n_h0=r_h0.size,
        n_ref=n_ref,
        reject=p_value <= config.alpha,
        alpha=config.alpha,
        ties_obs=ties_o,
        ties_h0=ties_h,
        h0_spec_meta=pipeline.h0_meta,
        seeds={"root": list(seed_path(config.seed)), "scheme": "philox(seed, stage, replicate, role, dataset)"},
        config=config.to_json_dict(),
    )


def _progress(config: RankTestConfig, done: int):
    if config.progress and (done % max(1, config.b // 20) == 0 or done == config.b):
        print(f"[ranktest] bootstrap {done}/{config.b}", file=sys.stderr, flush=True)


def write_report_json(report: RankTestReport, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
