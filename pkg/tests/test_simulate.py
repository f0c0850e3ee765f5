import numpy as np
import pytest
import scipy.linalg

import stcov
from stcov import (
    Cov1D,
    GneitingSep,
    SeparableProduct,
    build_covariance_matrix,
    chol_psd,
    repair_psd,
    simulate_block_sequential,
    simulate_exact,
    simulate_separable_kron,
)
from stcov.errors import ConfigError, NotPSDError
from stcov.rng import substream
from stcov.simulate import BlockSampler, KronSampler


def mc_se(C, i, j, n_rep):
    """Standard error of a sample-covariance entry under Gaussian sampling."""
    return np.sqrt((C[i, i] * C[j, j] + C[i, j] ** 2) / n_rep)


# ------------------------------------------------------------------ chol_psd

def test_chol_identity():
    f = chol_psd(np.eye(3))
    assert np.array_equal(f.L, np.eye(3))
    assert f.jitter == 0.0


def test_chol_hand_factorization():
    f = chol_psd(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(f.L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)


def test_chol_indefinite_raises_with_pivot():
    with pytest.raises(NotPSDError) as ei:
        chol_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert ei.value.most_negative_pivot < 0


def test_chol_jitter_recorded_and_reconstructs():
    # rank-deficient PSD matrix: LL' must reproduce A + jitter*I closely
    v = np.array([1.0, 2.0, 3.0])
    A = np.outer(v, v)
    f = chol_psd(A)
    target = A + f.jitter * np.eye(3)
    rel = np.linalg.norm(f.L @ f.L.T - target) / np.linalg.norm(target)
    assert rel <= 1e-8


def test_chol_rejects_asymmetric():
    with pytest.raises(ValueError):
        chol_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_repair_psd_clips_and_reports():
    A = np.array([[1.0, 1.0, -1.0], [1.0, 1.0, 1.0], [-1.0, 1.0, 1.0]])
    R, mass = repair_psd(A)
    w = np.linalg.eigvalsh(R)
    assert w[0] >= 0
    assert mass > 0
    chol_psd(R)  # must factor now


# ------------------------------------------------------------ simulate_exact

def test_exact_single_cell_is_standard_normal_draw():
    ds = simulate_exact(GneitingSep(beta=0.5), [(0.0, 0.0)], 1, seed=99)
    z = substream(99).standard_normal(1)
    assert ds.values[0, 0] == z[0]


def test_exact_deterministic():
    spec = GneitingSep(beta=1.0)
    a = simulate_exact(spec, [(0, 0), (1, 0)], 20, seed=5)
    b = simulate_exact(spec, [(0, 0), (1, 0)], 20, seed=5)
    assert np.array_equal(a.values, b.values)


def test_exact_cap_enforced():
    with pytest.raises(ConfigError):
        simulate_exact(GneitingSep(beta=0.5), [(0, 0), (1, 0)], 2001, seed=1)


@pytest.mark.slow
def test_exact_matches_model_covariance_mc():
    spec = GneitingSep(beta=1.0)
    sites = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    p, n_rep = 12, 4000
    C = build_covariance_matrix(spec, sites, np.arange(float(p)))
    sampler = stcov.simulate.ExactSampler(spec, sites, p)
    draws = np.stack([sampler.draw(substream(1234, k)).ravel() for k in range(n_rep)])
    S = draws.T @ draws / n_rep
    z = np.abs(S - C) / np.array(
        [[mc_se(C, i, j, n_rep) for j in range(C.shape[0])] for i in range(C.shape[0])]
    )
    # a few >3-se excursions are expected among 48^2 entries; none should be extreme
    assert (z <= 3.0).mean() >= 0.98
    assert z.max() <= 6.0


# --------------------------------------------------------- block sequential

def test_block_equals_exact_when_single_block():
    spec = GneitingSep(beta=1.0)
    sites = [(0, 0), (1, 0)]
    a = simulate_exact(spec, sites, 10, seed=42)
    b = simulate_block_sequential(spec, sites, 10, block_len=10, seed=42)
    assert np.array_equal(a.values, b.values)


def test_block_requires_divisibility_and_seed():
    spec = GneitingSep(beta=0.5)
    with pytest.raises(ConfigError):
        simulate_block_sequential(spec, [(0, 0), (1, 0)], 10, block_len=3, seed=1)
    with pytest.raises(ConfigError):
        simulate_block_sequential(spec, [(0, 0), (1, 0)], 10, block_len=5)


def test_block_deterministic_and_finite():
    spec = GneitingSep(beta=0.5)
    a = simulate_block_sequential(spec, [(0, 0), (1, 0)], 60, block_len=20, seed=8)
    b = simulate_block_sequential(spec, [(0, 0), (1, 0)], 60, block_len=20, seed=8)
    assert np.array_equal(a.values, b.values)
    assert np.isfinite(a.values).all()


@pytest.mark.slow
def test_block_two_block_distribution_matches_exact():
    # p = 2 * block_len: conditioning on the full previous block is exact,
    # so sample covariances must match the joint model covariance.
    spec = GneitingSep(beta=1.0)
    sites = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    p, B, n_rep = 20, 10, 2500
    C = build_covariance_matrix(spec, sites, np.arange(float(p)))
    sampler = BlockSampler(spec, sites, block_len=B)
    draws = np.stack([sampler.draw(substream(77, k), p).ravel() for k in range(n_rep)])
    S = draws.T @ draws / n_rep
    se = np.array([[mc_se(C, i, j, n_rep) for j in range(C.shape[0])] for i in range(C.shape[0])])
    z = np.abs(S - C) / se
    assert (z <= 3.0).mean() >= 0.98
    assert z.max() <= 6.0


def test_block_white_noise_autocorrelation():
    spec = SeparableProduct(spatial=Cov1D("white"), temporal=Cov1D("white"))
    p = 1000
    ds = simulate_block_sequential(spec, [(0, 0), (1, 0)], p, block_len=100, seed=3)
    x = ds.values[0]
    xd = x - x.mean()
    r1 = np.dot(xd[:-1], xd[1:]) / np.dot(xd, xd)
    assert abs(r1) <= 2.0 / np.sqrt(p)


# ------------------------------------------------------------ kronecker path

def test_kron_iid_case():
    ds = simulate_separable_kron(np.eye(3), np.array([1.0, 0.0, 0.0, 0.0]), seed=4)
    assert ds.values.shape == (3, 4)
    z = substream(4).standard_normal((3, 4))
    assert np.allclose(ds.values, z, atol=1e-12)


def test_kron_deterministic():
    S = np.array([[1.0, 0.4], [0.4, 1.0]])
    t = 0.8 ** np.arange(6)
    a = simulate_separable_kron(S, t, seed=11)
    b = simulate_separable_kron(S, t, seed=11)
    assert np.array_equal(a.values, b.values)


@pytest.mark.slow
def test_kron_covariance_is_kronecker_product():
    S = np.array([[1.0, 0.6], [0.6, 1.0]])
    t = np.array([1.0, 0.5, 0.25, 0.125])
    target = np.kron(S, scipy.linalg.toeplitz(t))
    sampler = KronSampler(S, t)
    n_rep = 100_000
    rng = substream(2025)
    G = rng.standard_normal((n_rep, 2, 4))
    draws = np.einsum("ij,rjk,lk->ril", sampler.f_s.L, G, sampler.f_t.L).reshape(n_rep, 8)
    Shat = draws.T @ draws / n_rep
    se = np.array(
        [[mc_se(target, i, j, n_rep) for j in range(8)] for i in range(8)]
    )
    assert np.max(np.abs(Shat - target) / se) <= 4.0


def test_kron_clipping_fallback():
    # non-PSD Toeplitz input: must clip, record the mass, and still factor
    t = np.array([1.0, 1.0, -1.0])
    sampler = KronSampler(np.eye(2), t)
    assert sampler.clip_mass > 0
    ds = sampler.dataset(5)
    assert np.isfinite(ds.values).all()


def test_kron_cross_covariance_mc():
    S = np.array([[1.0, 0.7], [0.7, 1.0]])
    t = 0.6 ** np.arange(8)
    sampler = KronSampler(S, t)
    n_rep = 2000
    acc = 0.0
    for k in range(n_rep):
        v = sampler.draw(substream(31, k))
        acc += v[0, 0] * v[1, 3]
    est = acc / n_rep
    truth = 0.7 * t[3]
    se = np.sqrt((1.0 * 1.0 + truth**2) / n_rep)
    assert abs(est - truth) <= 3 * se
