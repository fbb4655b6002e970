"""Exact ergodic MI, baseline precoders, SNR sweeps and the per-iteration benchmark."""

import logging
import multiprocessing as mp
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .asymptotic import asymptotic_mi, solve_fixed_point_robust
from .channel import ChannelStats, exp_correlation, make_rng, make_stats, sample_channel
from .constants import ENUMERATION_CAP, N_CHANNELS_EXACT, NOISE_BANK_REPORT
from .constellation import Constellation, enumerate_product, make_constellation
from .errors import ConfigError, FinprecError
from .mi import MiEstimate, NoiseBank, likelihood_moments, make_noise_bank
from .precoder import (
    OptimizerConfig,
    RestartRunner,
    StructuredPrecoder,
    expand,
    initial_permutation,
    optimize,
    random_precoder,
    validate_layout,
)

log = logging.getLogger(__name__)


def exact_ergodic_mi(
    stats: ChannelStats,
    b,
    c: Constellation,
    n_channels: int,
    bank: NoiseBank,
    rng: np.random.Generator,
    noise_per_channel: int = None,
) -> MiEstimate:
    """Monte-Carlo ergodic MI ``E_H[I(d; H B d + n)]`` in bits.

    Every realization is evaluated against the full bank unless
    ``noise_per_channel`` is given, in which case realization ``i`` uses the
    cyclic slice ``[i*k, (i+1)*k)`` of the bank. The standard error is the
    spread of the per-realization estimates, so it carries both channel and
    noise variability.

    Raises:
        CapacityError: ``M**N_t`` exceeds the enumeration cap.
    """
    b = np.asarray(b, dtype=complex)
    if n_channels < 1:
        raise ConfigError("n_channels must be >= 1")
    x = enumerate_product(c, stats.n_t, ENUMERATION_CAP).array()
    if bank.dim != stats.n_r:
        raise ConfigError(f"noise bank dimension {bank.dim} != N_r = {stats.n_r}")
    h = sample_channel(stats, rng, count=n_channels)
    g = h @ b
    k = bank.count if noise_per_channel is None else min(int(noise_per_channel), bank.count)
    if k == bank.count:
        noise = bank.samples
    else:
        rows = (np.arange(n_channels)[:, None] * k + np.arange(k)[None, :]) % bank.count
        noise = bank.samples[rows]
    per_noise, _ = likelihood_moments(g, x, noise, want_mmse=False)
    per_channel = per_noise.mean(axis=1)
    if n_channels > 1:
        se = float(np.std(per_channel, ddof=1) / np.sqrt(n_channels))
    else:
        se = float(np.std(per_noise[0], ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    return MiEstimate(float(per_channel.mean()), se)


def baseline_unprecoded(stats: ChannelStats, p: float) -> np.ndarray:
    if p <= 0:
        raise ConfigError("power must be positive")
    return np.sqrt(p / stats.n_t) * np.eye(stats.n_t, dtype=complex)


def waterfill(gains, p: float) -> np.ndarray:
    """Powers maximizing ``sum log(1 + g_i p_i)`` subject to ``sum p_i = p``."""
    g = np.asarray(gains, dtype=float)
    order = np.argsort(-g, kind="stable")
    gs = g[order]
    alloc = np.zeros_like(g)
    for active in range(g.size, 0, -1):
        if gs[active - 1] <= 0:
            continue
        inv = 1.0 / gs[:active]
        level = (p + inv.sum()) / active
        if level > inv[-1]:
            alloc[order[:active]] = level - inv
            break
    return alloc


def waterfill_powers(stats: ChannelStats, p: float) -> np.ndarray:
    gains = stats.lambda_t * np.sum(stats.lambda_r) / stats.n_r
    return waterfill(gains, p)


def baseline_gaussian_waterfill(stats: ChannelStats, p: float) -> np.ndarray:
    """Gaussian-input statistical beamforming ``U_T diag(sqrt(p_i))``."""
    if p <= 0:
        raise ConfigError("power must be positive")
    return stats.u_t * np.sqrt(waterfill_powers(stats, p))


def waterfill_structured(stats: ChannelStats, p: float) -> StructuredPrecoder:
    """The water-filling baseline as ``N_t`` scalar streams (same ``B``)."""
    n = stats.n_t
    lam = np.sqrt(waterfill_powers(stats, p))[:, None]
    return StructuredPrecoder.build(range(n), lam, np.ones((n, 1, 1), dtype=complex))


@dataclass(frozen=True)
class SweepRecord:
    snr_db: float
    method: str
    mi_asy: float
    mi_exact: float = None
    std_error: float = float("nan")
    iterations: int = 0
    wall_seconds: float = 0.0
    status: str = "ok"


@dataclass
class SweepResult:
    snr_db: list
    records: list = field(default_factory=list)

    def get(self, snr_db, method) -> SweepRecord:
        for r in self.records:
            if r.snr_db == snr_db and r.method == method:
                return r
        raise KeyError((snr_db, method))

    def methods(self):
        return list(dict.fromkeys(r.method for r in self.records))


@dataclass(frozen=True)
class SweepConfig:
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    exact: bool = True
    n_channels: int = N_CHANNELS_EXACT
    exact_noise_samples: int = NOISE_BANK_REPORT
    noise_per_channel: int = None
    report_noise_samples: int = NOISE_BANK_REPORT


def parse_method(name: str):
    """``'optimized:2'`` -> ``('optimized', 2)``; baselines map to ``(name, None)``."""
    head, _, arg = name.partition(":")
    if head == "optimized":
        try:
            return head, int(arg)
        except ValueError:
            raise ConfigError(f"optimized method needs a stream width, e.g. 'optimized:2' (got {name!r})") from None
    if head in ("unprecoded", "gaussian_wf") and not arg:
        return head, None
    raise ConfigError(f"unknown method {name!r}; use optimized:<N_s>, unprecoded or gaussian_wf")


def _report_asy(stats, pre, c, width, cfg, seed):
    bank = make_noise_bank(width, cfg.report_noise_samples, seed, stream=2)
    state = solve_fixed_point_robust(stats, pre, c, bank, cfg.optimizer.fp_tol, cfg.optimizer.fp_max_iter)
    return asymptotic_mi(state, stats, pre, c, bank)


def evaluate_method(stats, c, method, snr_db, cfg: SweepConfig, point_seed, exact_bank=None):
    """Design (if needed) and evaluate one method at one SNR."""
    kind, n_s = parse_method(method)
    p = 10.0 ** (snr_db / 10.0)
    t0 = time.perf_counter()
    iterations = 0
    if kind == "optimized":
        opt_cfg = replace(cfg.optimizer, seed=point_seed)
        trace = optimize(stats, c, p, stats.n_t // n_s, n_s, opt_cfg)
        pre, b, width, iterations = trace.precoder, trace.b, n_s, trace.iterations
    elif kind == "gaussian_wf":
        pre = waterfill_structured(stats, p)
        b, width = expand(pre, stats), 1
    else:
        b = baseline_unprecoded(stats, p)
        pre, width = b, stats.n_t
    asy = _report_asy(stats, pre, c, width, cfg, point_seed)
    exact = None
    se = asy.std_error
    if cfg.exact and c.M**stats.n_t <= ENUMERATION_CAP and exact_bank is not None:
        est = exact_ergodic_mi(stats, b, c, cfg.n_channels, exact_bank, make_rng(point_seed, 3), cfg.noise_per_channel)
        exact, se = est.value, est.std_error
    return SweepRecord(snr_db, method, float(asy.total), exact, float(se), iterations, time.perf_counter() - t0)


def run_sweep(stats: ChannelStats, c: Constellation, snr_grid, methods, cfg: SweepConfig = SweepConfig()) -> SweepResult:
    """Evaluate every method at every SNR (dB, with unit noise so SNR = P).

    Channel draws for the exact MI depend only on the master seed and the SNR
    index, so all methods at one SNR see the same realizations. A point that
    raises is kept as a failed record.
    """
    grid = [float(s) for s in snr_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("SNR grid must be strictly increasing")
    for m in methods:
        kind, n_s = parse_method(m)
        if kind == "optimized":
            validate_layout(stats.n_t, stats.n_t // n_s if n_s else 0, n_s)
    result = SweepResult(grid)
    exact_bank = None
    if methods and cfg.exact:
        exact_bank = make_noise_bank(stats.n_r, cfg.exact_noise_samples, cfg.seed, stream=4)
    for i, snr in enumerate(grid):
        point_seed = cfg.seed * 1000 + i
        for m in methods:
            try:
                rec = evaluate_method(stats, c, m, snr, cfg, point_seed, exact_bank)
            except FinprecError as exc:
                log.warning("sweep point %s dB / %s failed: %s", snr, m, exc)
                rec = SweepRecord(snr, m, float("nan"), status=f"failed: {exc}")
            log.info("%6.1f dB  %-14s I_asy=%.4f I_exact=%s", snr, m, rec.mi_asy, rec.mi_exact)
            result.records.append(rec)
    return result


@dataclass(frozen=True)
class BenchRecord:
    n_t: int
    n_s: int
    modulation: str
    seconds_per_iteration: float
    status: str = "ok"

    @property
    def exceeded(self) -> bool:
        return self.status != "ok"


def _bench_body(n_t, n_s, modulation, repeats, snr_db, rho, noise_samples, seed):
    c = make_constellation(modulation)
    validate_layout(n_t, n_t // n_s, n_s)
    stats = make_stats(exp_correlation(n_t, rho), exp_correlation(n_t, rho))
    p = 10.0 ** (snr_db / 10.0)
    cfg = OptimizerConfig(noise_samples=noise_samples, seed=seed)
    bank = make_noise_bank(n_s, noise_samples, seed)
    perm = initial_permutation(stats, c, p, n_t // n_s, n_s, bank, cfg)
    pre = random_precoder(perm, n_t // n_s, n_s, p, make_rng(seed, 1000))
    runner = RestartRunner(stats, c, p, bank, cfg)
    state, ev = runner.start(pre)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        pre, state, ev, _, _ = runner.step(pre, state, ev)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _bench_child(conn, args):
    try:
        conn.send(("ok", _bench_body(*args)))
    except Exception as exc:  # reported to the parent as a failed cell
        conn.send(("failed", f"{type(exc).__name__}: {exc}"))
    finally:
        conn.close()


def bench_iteration(
    n_t: int,
    n_s: int,
    modulation: str,
    repeats: int = 3,
    timeout: float = 300.0,
    snr_db: float = 10.0,
    rho: float = 0.9,
    noise_samples: int = 500,
    seed: int = 0,
) -> BenchRecord:
    """Median wall-clock seconds of one full optimizer iteration.

    Runs in a child process; a run longer than ``timeout`` seconds (setup
    included) is killed and recorded as ``exceeded``.
    """
    name = make_constellation(modulation).name.value
    ctx = mp.get_context("fork")
    parent, child = ctx.Pipe(duplex=False)
    args = (n_t, n_s, name, repeats, snr_db, rho, noise_samples, seed)
    proc = ctx.Process(target=_bench_child, args=(child, args), daemon=True)
    proc.start()
    child.close()
    ready = parent.poll(timeout)
    if not ready:
        proc.terminate()
        proc.join()
        return BenchRecord(n_t, n_s, name, float("inf"), "exceeded")
    status, value = parent.recv()
    proc.join()
    if status != "ok":
        return BenchRecord(n_t, n_s, name, float("inf"), value)
    return BenchRecord(n_t, n_s, name, max(value, 1e-9))
