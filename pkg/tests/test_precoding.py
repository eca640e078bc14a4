import numpy as np
import pytest

from cfisac import precoding as pc


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_orthogonal_pilots_when_enough():
    pa = pc.assign_pilots(8, 10)
    assert np.array_equal(pa.pilot_index, np.arange(8))
    assert all(len(g) <= 1 for g in pa.sharing_groups)


def test_greedy_sharing_matches_replay():
    rng = np.random.default_rng(11)
    gains = rng.gamma(1.0, 1.0, size=(12, 16)) * 1e-10
    pa = pc.assign_pilots(12, 10, gains)
    # independent replay of the stated greedy rule
    order = np.argsort(-gains.max(axis=1), kind="stable")
    groups = [[] for _ in range(10)]
    expect = np.empty(12, dtype=int)
    for rank, ue in enumerate(order):
        if rank < 10:
            t = rank
        else:
            k_star = int(np.argmax(gains[ue]))
            t = int(np.argmin([sum(gains[j, k_star] for j in g) for g in groups]))
        expect[ue] = t
        groups[t].append(ue)
    assert np.array_equal(pa.pilot_index, expect)
    counts = np.bincount(pa.pilot_index, minlength=10)
    assert counts.max() == 2 and counts.sum() == 12


def test_sharing_needs_gains():
    with pytest.raises(ValueError):
        pc.assign_pilots(12, 10)


def test_lmmse_estimate_shrinks_and_aligns():
    rng = np.random.default_rng(5)
    M = 4
    X = crandn(rng, M, M)
    R = X @ X.conj().T / M
    E, s2 = 0.5, 1e-2
    err = np.zeros(M, dtype=complex)
    n_mc = 20000
    cross = np.zeros((M, M), dtype=complex)
    for _ in range(n_mc):
        h = np.linalg.cholesky(R) @ crandn(rng, M)
        y = np.sqrt(E) * h + np.sqrt(s2) * crandn(rng, M)
        h_hat = pc.lmmse_estimate(y, R, R, E, s2)
        e = h - h_hat
        err += e / n_mc
        cross += np.outer(e, h_hat.conj()) / n_mc
    # orthogonality of error and estimate
    assert np.abs(cross).max() < 1e-2
    assert np.abs(err).max() < 1e-2


def test_lmmse_noiseless_limit_recovers_channel():
    rng = np.random.default_rng(6)
    M = 3
    X = crandn(rng, M, M)
    R = X @ X.conj().T
    h = np.linalg.cholesky(R) @ crandn(rng, M)
    y = np.sqrt(2.0) * h
    h_hat = pc.lmmse_estimate(y, R, R, 2.0, 1e-14)
    assert np.allclose(h_hat, h, atol=1e-6)


def test_rzf_matches_dense_solve():
    rng = np.random.default_rng(7)
    dim, n = 24, 3
    H = crandn(rng, dim, n)
    delta = 0.37
    W = pc.rzf_precoders(H, delta)
    # independent dense route through the full dim x dim matrix
    A = H @ H.conj().T + delta * np.eye(dim)
    for i in range(n):
        w = np.linalg.solve(A, H[:, i])
        w = w / np.linalg.norm(w)
        # direction match up to the (real, positive) normalization
        assert np.abs(np.vdot(w, W[:, i])) == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(np.linalg.norm(W, axis=0), 1.0)


def test_rzf_batched_agrees_with_single():
    rng = np.random.default_rng(8)
    H = crandn(rng, 5, 24, 4)
    W = pc.rzf_precoders(H, 0.1)
    for b in range(5):
        assert np.allclose(W[b], pc.rzf_precoders(H[b], 0.1), atol=1e-12)


def test_zf_sensing_nulls_and_normalizes():
    rng = np.random.default_rng(9)
    H = crandn(rng, 64, 8)
    h0 = crandn(rng, 64)
    w0 = pc.zf_sensing_precoder(H, h0)
    assert np.linalg.norm(w0) == pytest.approx(1.0, abs=1e-12)
    leak = np.abs(H.conj().T @ w0) / np.linalg.norm(H, axis=0)
    assert leak.max() < 1e-12
    # the projection keeps a positive correlation with the sensing channel
    assert np.real(np.vdot(h0, w0)) > 0.0


def test_zf_sensing_degenerate():
    rng = np.random.default_rng(10)
    H = crandn(rng, 8, 3)
    h0 = H @ crandn(rng, 3)       # inside the UE subspace
    with pytest.raises(pc.DegenerateProjectionError):
        pc.zf_sensing_precoder(H, h0)


def test_rzf_regularizer_value():
    assert pc.rzf_regularizer(8, 4e-15, 0.1) == pytest.approx(8 * 4e-15 / 0.1)
