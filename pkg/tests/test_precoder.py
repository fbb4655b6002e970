import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finprec.channel import identity_stats, make_rng
from finprec.errors import ConfigError, DimensionError
from finprec.linalg import unitarity_error
from finprec.mi import make_noise_bank
from finprec.precoder import (
    OptimizerConfig,
    RestartRunner,
    StructuredPrecoder,
    block_mask,
    expand,
    gradients,
    optimize,
    pair_subchannels,
    random_precoder,
    scatter,
    uniform_precoder,
    validate_layout,
)

import gradcheck
from conftest import random_unitary


def test_pairing_examples():
    assert pair_subchannels([4, 3, 2, 1], 2) == [0, 3, 1, 2]
    assert pair_subchannels([1.0] * 4, 2) == [0, 3, 1, 2]
    perm = pair_subchannels([8, 7, 6, 5, 4, 3, 2, 1], 4)
    assert sorted(perm[:4]) == [0, 1, 6, 7] and sorted(perm[4:]) == [2, 3, 4, 5]
    assert pair_subchannels([0.1, 5.0, 2.0, 3.0], 2) == [1, 0, 3, 2]
    assert pair_subchannels([3, 1, 2], 1) == [0, 1, 2]


def test_pairing_errors():
    with pytest.raises(ConfigError):
        pair_subchannels([1, 2, 3, 4, 5, 6], 3)
    with pytest.raises(ConfigError):
        pair_subchannels([1, 2, 3], 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.sampled_from([1, 2, 4]), st.integers(0, 2**32 - 1))
def test_pairing_takes_extremes_of_remaining(s, n_s, seed):
    xi = np.random.default_rng(seed).permutation(s * n_s).astype(float)
    perm = pair_subchannels(xi, n_s)
    assert sorted(perm) == list(range(s * n_s))
    remaining = sorted(range(s * n_s), key=lambda i: -xi[i])
    for k in range(s):
        block = set(perm[k * n_s:(k + 1) * n_s])
        if n_s == 1:
            continue
        h = n_s // 2
        assert block == set(remaining[:h] + remaining[-h:])
        remaining = remaining[h:-h]


def test_expand_unstructured_case(rng):
    st_ = identity_stats(3, 3)
    u = random_unitary(rng, 3)
    stats = type(st_)(u, np.array([2.0, 0.7, 0.3]), st_.u_r, st_.lambda_r)
    v = random_unitary(rng, 3)
    pre = StructuredPrecoder.build((0, 1, 2), np.array([[1.0, 0.5, 0.2]]), v[None])
    np.testing.assert_allclose(expand(pre, stats), u @ np.diag([1.0, 0.5, 0.2]) @ v, atol=1e-14)


def test_block_pattern_identity_perm(rng):
    v = np.stack([random_unitary(rng, 2) for _ in range(2)])
    pre = StructuredPrecoder.build((0, 1, 2, 3), np.ones((2, 2)), v)
    _, v_b = scatter(pre)
    assert np.all(v_b[:2, 2:] == 0) and np.all(v_b[2:, :2] == 0)
    assert np.all(v_b[:2, :2] != 0) and np.all(v_b[2:, 2:] != 0)


def test_scatter_bookkeeping():
    pre = StructuredPrecoder.build((1, 0), np.array([[3.0], [5.0]]), np.ones((2, 1, 1)))
    lam_b, v_b = scatter(pre)
    np.testing.assert_array_equal(lam_b, [5.0, 3.0])
    np.testing.assert_array_equal(v_b, np.eye(2))


def test_expand_power_and_errors(corr4, rng):
    pre = random_precoder((0, 3, 1, 2), 2, 2, 5.0, rng)
    b = expand(pre, corr4)
    assert np.real(np.trace(b @ b.conj().T)) == pytest.approx(5.0, abs=1e-9)
    with pytest.raises(DimensionError):
        expand(pre, identity_stats(2, 2))
    with pytest.raises(DimensionError):
        StructuredPrecoder.build((0, 0, 1, 2), np.ones((2, 2)), np.stack([np.eye(2)] * 2))
    with pytest.raises(ConfigError):
        validate_layout(4, 3, 1)
    with pytest.raises(ConfigError):
        validate_layout(6, 2, 3)


def test_gradients_vanish_without_error_or_gain(rng):
    pre = random_precoder((0, 1), 1, 2, 2.0, rng)
    g_lam, g_v = gradients(pre, [np.ones(2)], [np.zeros((2, 2))])
    assert np.all(g_lam[0] == 0) and np.all(g_v[0] == 0)
    g_lam, g_v = gradients(pre, [np.zeros(2)], [np.eye(2)])
    assert np.all(g_lam[0] == 0) and np.all(g_v[0] == 0)
    with pytest.raises(DimensionError):
        gradients(pre, [np.ones(3)], [np.eye(2)])


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_gradients_match_finite_differences(bpsk, seed):
    rng = np.random.default_rng(seed)
    pre, xi = gradcheck.random_instance(rng)
    err_lam, err_v = gradcheck.gradient_errors(pre, xi, bpsk, gradcheck.bank_for(2, seed), rng)
    assert err_lam <= 1e-2 and err_v <= 1e-2


def test_gradients_qpsk_two_streams(qpsk):
    rng = np.random.default_rng(8)
    pre, xi = gradcheck.random_instance(rng, n_t=4, n_s=2)
    err_lam, err_v = gradcheck.gradient_errors(pre, xi, qpsk, gradcheck.bank_for(2, 8, 100000), rng)
    assert err_lam <= 2e-2 and err_v <= 2e-2


def _instance(seed, n_t=4, n_s=2, c_name="QPSK"):
    from finprec.channel import exp_correlation, make_stats
    from finprec.constellation import make_constellation

    rng = np.random.default_rng(seed)
    rho_t, rho_r = rng.uniform(0.0, 0.95, size=2)
    stats = make_stats(exp_correlation(n_t, rho_t), exp_correlation(n_t, rho_r))
    return stats, make_constellation(c_name), 10 ** rng.uniform(-0.5, 1.5)


def test_iterates_keep_constraints_and_structure():
    stats, c, p = _instance(4)
    cfg = OptimizerConfig(max_iter=15, epsilon=0.0, noise_samples=150)
    bank = make_noise_bank(2, 150, 0)
    pre = random_precoder((0, 3, 1, 2), 2, 2, p, make_rng(0, 1000))
    runner = RestartRunner(stats, c, p, bank, cfg)
    state, ev = runner.start(pre)
    mask = block_mask(pre)
    values = [ev.total]
    for _ in range(15):
        pre, state, ev, _, _ = runner.step(pre, state, ev)
        assert abs(np.sum(pre.lambda_sq) - p) <= 1e-9 * max(1.0, p)
        assert max(unitarity_error(v) for v in pre.v) <= 1e-9
        _, v_b = scatter(pre)
        assert np.all(v_b[~mask] == 0.0)
        b = expand(pre, stats)
        in_basis = stats.u_t.conj().T @ b
        assert np.allclose(in_basis[~mask], 0.0, atol=1e-12)
        values.append(ev.total)
    assert all(b >= a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("seed", [0, 1])
def test_trace_monotone_and_stops(seed):
    stats, c, p = _instance(seed)
    cfg = OptimizerConfig(max_iter=25, epsilon=1e-4, restarts=2, noise_samples=150, seed=seed)
    trace = optimize(stats, c, p, 2, 2, cfg)
    for r in trace.restarts:
        vals = [rec.mi_asy for rec in r.records]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert len(r.records) - 1 <= cfg.max_iter
        if r.stop_reason == "max_iter":
            assert len(r.records) - 1 == cfg.max_iter
        else:
            assert r.stop_reason == "epsilon"
            assert vals[-1] - vals[-2] <= cfg.epsilon
    assert trace.mi_asy == max(r.mi_asy for r in trace.restarts)
    assert trace.precoder.is_feasible(p)


def test_scalar_streams_allocate_power_only():
    stats, c, p = _instance(3)
    trace = optimize(stats, c, p, 4, 1, OptimizerConfig(max_iter=20, restarts=1, noise_samples=200))
    np.testing.assert_array_equal(trace.precoder.v, np.ones((4, 1, 1)))
    assert trace.precoder.perm == (0, 1, 2, 3)


def test_larger_search_space_not_worse(qpsk):
    stats, _, p = _instance(5, n_t=2)
    cfg = OptimizerConfig(max_iter=40, restarts=2, noise_samples=400)
    full = optimize(stats, qpsk, p, 1, 2, cfg)
    split = optimize(stats, qpsk, p, 2, 1, cfg)
    assert full.mi_asy >= split.mi_asy - 2 * max(full.std_error, split.std_error)


def test_restarts_reproducible_and_parallel_safe():
    stats, c, p = _instance(6)
    cfg = OptimizerConfig(max_iter=5, restarts=2, noise_samples=100, seed=3)
    a = optimize(stats, c, p, 2, 2, cfg)
    b = optimize(stats, c, p, 2, 2, cfg)
    from dataclasses import replace

    par = optimize(stats, c, p, 2, 2, replace(cfg, workers=2))
    np.testing.assert_array_equal(a.b, b.b)
    np.testing.assert_array_equal(a.b, par.b)
    assert [r.mi_asy for r in a.records] == [r.mi_asy for r in par.records]


def test_optimizer_config_validation():
    for bad in ({"max_iter": 0}, {"epsilon": -1.0}, {"restarts": 0}, {"shrink": 1.0}):
        with pytest.raises(ConfigError):
            OptimizerConfig(**bad)
    stats, c, _ = _instance(0)
    with pytest.raises(ConfigError):
        optimize(stats, c, 0.0, 2, 2)


def test_uniform_precoder():
    pre = uniform_precoder(4, 2, 2, 8.0)
    np.testing.assert_allclose(pre.lambda_sq, 2.0)
    assert pre.is_feasible(8.0)
    dp, dv = pre.violations(8.0)
    assert dp < 1e-12 and dv == 0.0
