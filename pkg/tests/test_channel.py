import logging

import numpy as np
import pytest

from finprec.channel import (
    ChannelSample,
    exp_correlation,
    identity_stats,
    load_stats,
    make_rng,
    make_stats,
    read_matrix,
    reduce_equivalent,
    sample_channel,
    write_matrix,
)
from finprec.errors import ConfigError, DimensionError, DomainError

from conftest import random_correlation


def test_exp_correlation_entries():
    a = exp_correlation(3, 0.5)
    np.testing.assert_allclose(a, [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
    np.testing.assert_array_equal(exp_correlation(3, 0.0), np.eye(3))
    with pytest.raises(ConfigError):
        exp_correlation(3, 1.0)


def test_stats_reconstruct_and_order(rng):
    a_t, a_r = random_correlation(rng, 4), random_correlation(rng, 3)
    st = make_stats(a_t, a_r)
    assert np.all(np.diff(st.lambda_t) <= 0)
    np.testing.assert_allclose(st.a_t(), a_t, atol=1e-12)
    np.testing.assert_allclose(st.a_r(), a_r, atol=1e-12)
    assert np.sum(st.lambda_t) == pytest.approx(4.0)
    assert (st.n_t, st.n_r, st.ratio) == (4, 3, 4 / 3)


def test_stats_rejects_bad_matrices():
    with pytest.raises(DomainError):
        make_stats(np.array([[1, 2], [2, 1]]), np.eye(2))  # indefinite
    with pytest.raises(DomainError):
        make_stats(2 * np.eye(2), np.eye(2))  # trace far from n
    with pytest.raises(DomainError):
        make_stats(np.array([[1, 0.5], [0.4, 1]]), np.eye(2))


def test_stats_small_trace_error_rescaled(caplog):
    with caplog.at_level(logging.WARNING):
        st = make_stats(1.004 * np.eye(2), np.eye(2))
    assert np.sum(st.lambda_t) == pytest.approx(2.0, abs=1e-12)
    assert "rescaling" in caplog.text


def test_sampling_is_reproducible(corr4):
    h1 = sample_channel(corr4, make_rng(5, 2), count=3)
    h2 = sample_channel(corr4, make_rng(5, 2), count=3)
    np.testing.assert_array_equal(h1, h2)
    h3 = sample_channel(corr4, make_rng(5, 3), count=3)
    assert not np.allclose(h1, h3)
    one = sample_channel(corr4, make_rng(5, 2))
    assert isinstance(one, ChannelSample) and one.h.shape == (4, 4)


def test_sample_covariance_matches_kronecker(rng):
    a_t = exp_correlation(2, 0.7)
    a_r = random_correlation(rng, 2)
    st = make_stats(a_t, a_r)
    h = sample_channel(st, make_rng(1, 0), count=40000)
    vec = h.transpose(0, 2, 1).reshape(len(h), -1)  # column stacking
    cov = vec.T @ vec.conj() / len(h)
    np.testing.assert_allclose(cov, np.kron(a_t.T, a_r), atol=0.05)


def test_reduce_equivalent_is_rotation(corr4):
    s = sample_channel(corr4, make_rng(0, 0))
    eq = reduce_equivalent(corr4, s)
    np.testing.assert_allclose(eq, corr4.u_r.conj().T @ s.h @ corr4.u_t, atol=1e-10)
    with pytest.raises(DimensionError):
        reduce_equivalent(corr4, np.ones((3, 4)))


def test_reduce_equivalent_singular():
    st = make_stats(np.ones((2, 2)) * 0.999999999 + np.eye(2) * 1e-9, np.eye(2))
    st0 = type(st)(st.u_t, np.array([2.0, 0.0]), st.u_r, st.lambda_r)
    with pytest.raises(DomainError):
        reduce_equivalent(st0, np.ones((2, 2)))


def test_matrix_file_round_trip(tmp_path, rng):
    a = random_correlation(rng, 3)
    p = tmp_path / "a.txt"
    write_matrix(p, a)
    np.testing.assert_array_equal(read_matrix(p, hermitian=True), a)
    text = p.read_text()
    p.write_text("# comment line\n" + text)
    np.testing.assert_array_equal(read_matrix(p), a)


def test_matrix_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2\n1,0,0,0\n")
    with pytest.raises(ConfigError):
        read_matrix(p)
    p.write_text("2\n1,0,0.5,0\n0.4,0,1,0\n")
    with pytest.raises(DomainError):
        read_matrix(p, hermitian=True)
    with pytest.raises(ConfigError):
        read_matrix(tmp_path / "missing.txt")


def test_load_stats(tmp_path):
    write_matrix(tmp_path / "t.txt", exp_correlation(2, 0.3))
    write_matrix(tmp_path / "r.txt", np.eye(3))
    st = load_stats(tmp_path / "t.txt", tmp_path / "r.txt")
    np.testing.assert_allclose(st.lambda_t, [1.3, 0.7])
    assert st.n_r == 3
    np.testing.assert_array_equal(identity_stats(2, 3).lambda_r, np.ones(3))
