import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stcov
from stcov import (
    GneitingSep,
    SpaceTimeDataset,
    all_pairs_test_fns,
    analytic_sep_test_fn,
    cross_cov_hat,
    sep_test_fn_hat,
    sym_test_fn_hat,
)
from stcov.errors import ConfigError, DegeneratePairError
from stcov.estimate import cross_cov_matrices, read_curves_csv, write_curves_csv
from stcov.rng import substream
from stcov.simulate import BlockSampler


def _dataset(values, sites=None):
    values = np.asarray(values, dtype=float)
    if sites is None:
        n = values.shape[0]
        sites = np.column_stack([np.arange(n, dtype=float), np.zeros(n)])
    return SpaceTimeDataset(np.asarray(sites, dtype=float), values)


# ------------------------------------------------------------ cross_cov_hat

def test_constant_series_zero():
    x = np.ones(30)
    for u in (0, 1, 5, -3):
        assert cross_cov_hat(x, x, u) == 0.0


def test_lag0_is_divisor_p_variance():
    x = np.arange(10.0)
    assert cross_cov_hat(x, x, 0) == pytest.approx(np.var(x), abs=1e-14)


def test_paper_formula_verbatim():
    rng = substream(1)
    x, y = rng.standard_normal(40), rng.standard_normal(40)
    u, p = 7, 40
    xw, yw = x[: p - u], y[u:]
    expected = np.sum((xw - xw.mean()) * (yw - yw.mean())) / (p - u)
    assert cross_cov_hat(x, y, u) == pytest.approx(expected, abs=1e-15)


def test_lag_bounds():
    x = np.zeros(10)
    with pytest.raises(ConfigError):
        cross_cov_hat(x, x, 9)
    with pytest.raises(ConfigError):
        cross_cov_hat(x, x, -9)
    with pytest.raises(ConfigError):
        cross_cov_hat(np.zeros(1), np.zeros(1), 0)


@given(st.integers(0, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_sign_reversal_identity(u, seed):
    rng = substream(seed)
    x, y = rng.standard_normal(12), rng.standard_normal(12)
    assert cross_cov_hat(x, y, -u) == cross_cov_hat(y, x, u)


def test_scale_equivariance_exact():
    rng = substream(2)
    x, y = rng.standard_normal(25), rng.standard_normal(25)
    for u in (0, 1, 4):
        # power-of-two scaling keeps every float operation exact
        assert cross_cov_hat(2 * x, 2 * y, u) == 4 * cross_cov_hat(x, y, u)


def test_white_noise_bound_frequency():
    p, u, n_rep = 2000, 5, 1000
    bound = 2.0 / np.sqrt(p - u)
    hits = 0
    rng = substream(3)
    for _ in range(n_rep):
        x, y = rng.standard_normal(p), rng.standard_normal(p)
        hits += abs(cross_cov_hat(x, y, u)) < bound
    assert hits / n_rep >= 0.95


# -------------------------------------------------------- per-pair test fns

def test_sep_identical_series_zero_curve():
    # identical series at both sites: C(h,u) == C(0,u), ratio terms cancel
    x = substream(4).standard_normal(50)
    ds = _dataset([x, x])
    f = sep_test_fn_hat(ds, (0, 1), 6)
    assert np.allclose(f, 0.0, atol=1e-14)
    assert f[0] == 0.0


def test_sep_zero_at_lag0_any_input():
    rng = substream(5)
    ds = _dataset(rng.standard_normal((3, 40)))
    for pair in ((0, 1), (0, 2), (1, 2)):
        assert sep_test_fn_hat(ds, pair, 5)[0] == 0.0


def test_sep_shift_invariance():
    rng = substream(6)
    vals = rng.standard_normal((2, 60))
    f0 = sep_test_fn_hat(_dataset(vals), (0, 1), 5)
    f1 = sep_test_fn_hat(_dataset(vals + 7.25), (0, 1), 5)
    assert np.allclose(f0, f1, atol=1e-12)


def test_sep_scale_invariance_exact():
    rng = substream(7)
    vals = rng.standard_normal((2, 60))
    f0 = sep_test_fn_hat(_dataset(vals), (0, 1), 5)
    f1 = sep_test_fn_hat(_dataset(2.0 * vals), (0, 1), 5)
    assert np.array_equal(f0, f1)


def test_sep_degenerate_pair_raises():
    vals = np.vstack([np.ones(30), substream(8).standard_normal(30)])
    with pytest.raises(DegeneratePairError):
        sep_test_fn_hat(_dataset(vals), (0, 1), 4)


def test_sym_identical_series_zero():
    x = substream(9).standard_normal(50)
    ds = _dataset([x, x])
    g = sym_test_fn_hat(ds, (0, 1), 6)
    assert np.allclose(g, 0.0, atol=1e-14)


def test_sym_canonicalization_swap_invariant():
    rng = substream(10)
    ds = _dataset(rng.standard_normal((2, 60)))
    g01 = sym_test_fn_hat(ds, (0, 1), 5)
    g10 = sym_test_fn_hat(ds, (1, 0), 5)
    assert np.array_equal(g01, g10)


def test_sym_canonical_direction_flips_sign_with_geometry():
    rng = substream(11)
    vals = rng.standard_normal((2, 60))
    # site order reversed in space: canonical orientation flips, so g negates
    g_fwd = sym_test_fn_hat(_dataset(vals, sites=[(0, 0), (1, 0)]), (0, 1), 5)
    g_rev = sym_test_fn_hat(_dataset(vals, sites=[(1, 0), (0, 0)]), (0, 1), 5)
    assert np.array_equal(g_fwd, -g_rev)


# ------------------------------------------------------------- all pairs

def test_all_pairs_counts():
    rng = substream(12)
    n = 16
    sites = [(i % 4, i // 4) for i in range(n)]
    ds = _dataset(rng.standard_normal((n, 40)), sites=sites)
    cs = all_pairs_test_fns(ds, "separability", 5)
    assert cs.n_curves == n * (n - 1) // 2 == 120
    cs2 = all_pairs_test_fns(_dataset(rng.standard_normal((2, 40))), "separability", 5)
    assert cs2.n_curves == 1


def test_all_pairs_matches_per_pair_ops():
    rng = substream(13)
    ds = _dataset(rng.standard_normal((4, 80)), sites=[(0, 0), (1, 0), (0, 1), (1, 1)])
    cs = all_pairs_test_fns(ds, "separability", 6)
    k = 0
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.allclose(cs.curves[k], sep_test_fn_hat(ds, (i, j), 6), atol=1e-12)
            assert tuple(cs.pairs[k]) == (i, j)
            k += 1
    gs = all_pairs_test_fns(ds, "symmetry", 6)
    k = 0
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.allclose(gs.curves[k], sym_test_fn_hat(ds, (i, j), 6), atol=1e-12)
            k += 1


def test_all_pairs_drops_degenerate_with_warning(caplog):
    rng = substream(14)
    vals = rng.standard_normal((4, 40))
    vals[2] = 5.0  # dead sensor
    ds = _dataset(vals, sites=[(0, 0), (1, 0), (0, 1), (1, 1)])
    with caplog.at_level(logging.WARNING, logger="stcov.estimate"):
        cs = all_pairs_test_fns(ds, "separability", 4)
    assert cs.n_curves == 3  # C(3,2): every pair touching site 2 dropped
    assert any("degenerate" in r.message for r in caplog.records)
    assert cs.meta["dropped_pairs"] == [[0, 2], [1, 2], [2, 3]]


def test_all_pairs_validates_args():
    rng = substream(15)
    ds = _dataset(rng.standard_normal((2, 30)))
    with pytest.raises(ConfigError):
        all_pairs_test_fns(ds, "sep", 4)
    with pytest.raises(ConfigError):
        all_pairs_test_fns(ds, "separability", 29)


def test_cross_cov_matrices_match_scalar():
    rng = substream(16)
    vals = rng.standard_normal((3, 50))
    C = cross_cov_matrices(vals, 4)
    for u in range(5):
        for i in range(3):
            for j in range(3):
                assert C[u, i, j] == pytest.approx(
                    cross_cov_hat(vals[i], vals[j], u), abs=1e-12
                )


# ------------------------------------------------------------- consistency

@pytest.mark.slow
def test_sep_estimator_tracks_analytic_curve():
    spec = GneitingSep(beta=1.0)
    sites = [(0.0, 0.0), (1.0 / 3.0, 0.0)]
    sampler = BlockSampler(spec, sites, block_len=100)
    n_rep, U = 100, 10
    curves = np.stack(
        [
            sep_test_fn_hat(sampler.dataset(2000, (21, k), 0), (0, 1), U)
            for k in range(n_rep)
        ]
    )
    mean = curves.mean(axis=0)
    se = curves.std(axis=0, ddof=1) / np.sqrt(n_rep)
    truth = analytic_sep_test_fn(spec, (1.0 / 3.0, 0.0), U)
    z = np.abs(mean[1:] - truth[1:]) / se[1:]
    assert z.max() <= 3.0


# ------------------------------------------------------------------- IO

def test_curves_csv_round_trip(tmp_path):
    rng = substream(17)
    ds = _dataset(rng.standard_normal((3, 40)), sites=[(0, 0), (1, 0), (0, 1)])
    cs = all_pairs_test_fns(ds, "symmetry", 4)
    path = tmp_path / "curves.csv"
    write_curves_csv(cs, path)
    back = read_curves_csv(path)
    assert back.kind == "symmetry"
    assert np.array_equal(back.lags, cs.lags)
    assert np.array_equal(back.curves, cs.curves)
    assert np.array_equal(back.pairs, cs.pairs)
    assert np.array_equal(back.lag_vectors, cs.lag_vectors)
