"""Gradient ascent on the grouped precoder.

Each iteration takes a projected step on the stream powers ``Λ_s²`` and then a
retracted step on the mixers ``V_s``, both with Armijo backtracking on the
surrogate MI at frozen ``(γ, ψ, Ξ)``, refreshes the fixed point, and
recomputes ``I_asy``. A candidate that lowers the refreshed ``I_asy`` has its
steps halved until it does not (or is dropped), so the recorded objective is
nondecreasing within every restart.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..asymptotic import asymptotic_mi, evaluate_groups, solve_fixed_point_robust, surrogate_channel_gains
from ..channel import ChannelStats, complex_normal, make_rng
from ..constants import NOISE_BANK_OPTIMIZE
from ..constellation import Constellation
from ..errors import ConfigError, ConvergenceError
from ..linalg import polar_retract
from ..mi import NoiseBank, make_noise_bank
from .gradients import gradients
from .structure import StructuredPrecoder, expand, pair_subchannels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 200
    epsilon: float = 1e-4
    restarts: int = 3
    armijo_c1: float = 1e-4
    shrink: float = 0.5
    max_halvings: int = 20
    initial_step: float = 1.0
    seed: int = 0
    noise_samples: int = NOISE_BANK_OPTIMIZE
    fp_tol: float = 1e-9
    fp_max_iter: int = 500
    workers: int = 1

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if not 0 < self.shrink < 1:
            raise ConfigError("shrink must lie in (0, 1)")


@dataclass(frozen=True)
class IterationRecord:
    restart: int
    iteration: int
    mi_asy: float
    step_lambda: float
    step_v: float
    fp_residual: float
    fp_sweeps: int
    wall_seconds: float


@dataclass
class RestartResult:
    restart: int
    records: list
    precoder: StructuredPrecoder
    mi_asy: float
    std_error: float
    stop_reason: str
    state: object = field(default=None, repr=False)


@dataclass
class OptimizationTrace:
    restarts: list
    best_restart: int
    precoder: StructuredPrecoder
    b: np.ndarray
    mi_asy: float
    std_error: float
    power: float

    @property
    def records(self):
        return [rec for r in self.restarts for rec in r.records]

    @property
    def iterations(self) -> int:
        return len(self.restarts[self.best_restart].records) - 1


def validate_layout(n_t, s, n_s):
    if s < 1 or n_s < 1 or s * n_s != n_t:
        raise ConfigError(f"S*N_s must equal N_t (got S={s}, N_s={n_s}, N_t={n_t})")
    if n_s > 1 and n_s % 2:
        raise ConfigError(f"N_s = {n_s} is odd; subchannel pairing is only defined for even N_s")


def uniform_precoder(n_t, s, n_s, power, perm=None):
    perm = tuple(range(n_t)) if perm is None else tuple(perm)
    lam = np.full((s, n_s), np.sqrt(power / n_t))
    v = np.broadcast_to(np.eye(n_s, dtype=complex), (s, n_s, n_s)).copy()
    return StructuredPrecoder.build(perm, lam, v)


def initial_permutation(stats, c, power, s, n_s, bank, cfg):
    """Pairing computed once from the uniform-power fixed point."""
    pre = uniform_precoder(stats.n_t, s, n_s, power)
    state = solve_fixed_point_robust(stats, pre, c, bank, cfg.fp_tol, cfg.fp_max_iter)
    return pair_subchannels(state.xi, n_s)


def random_precoder(perm, s, n_s, power, rng):
    n_t = s * n_s
    p = np.full((s, n_s), power / n_t) * (1.0 + rng.uniform(-0.1, 0.1, size=(s, n_s)))
    p *= power / p.sum()
    if n_s == 1:
        v = np.ones((s, 1, 1), dtype=complex)
    else:
        v = np.stack([polar_retract(complex_normal(rng, (n_s, n_s))) for _ in range(s)])
    return StructuredPrecoder.build(perm, np.sqrt(p), v)


def _normalized_power(p, power):
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total <= 0.0:
        return None
    return p * (power / total)


def _retract_all(v, step):
    return np.stack([polar_retract(m) for m in v + step])


def _surrogate_mi(pre, xi, c, bank, want_mmse=False):
    per_noise, e = evaluate_groups(xi, pre.groups(), c, bank, want_mmse=want_mmse)
    return float(per_noise.sum(axis=0).mean()), e


class RestartRunner:
    def __init__(self, stats, c, power, bank, cfg):
        self.stats, self.c, self.power, self.bank, self.cfg = stats, c, power, bank, cfg

    def refresh(self, pre, init):
        cfg = self.cfg
        state = solve_fixed_point_robust(self.stats, pre, self.c, self.bank, cfg.fp_tol, cfg.fp_max_iter, init=init)
        return state, asymptotic_mi(state, self.stats, pre, self.c, self.bank)

    def lambda_step(self, pre, xi, grad, f0):
        cfg = self.cfg
        p0 = pre.lambda_sq
        t = cfg.initial_step
        for _ in range(cfg.max_halvings + 1):
            p = _normalized_power(p0 + t * grad, self.power)
            if p is not None:
                cand = pre.with_params(lambda_sq=p)
                f, _ = _surrogate_mi(cand, xi, self.c, self.bank)
                if f >= f0 + cfg.armijo_c1 * float(np.sum(grad * (p - p0))):
                    return cand, t
            t *= cfg.shrink
        return pre, 0.0

    def v_step(self, pre, xi, grad, f0):
        if pre.n_s == 1:
            return pre, 0.0
        cfg = self.cfg
        t = cfg.initial_step
        for _ in range(cfg.max_halvings + 1):
            try:
                v = _retract_all(pre.v, t * grad)
            except ValueError:
                v = None
            if v is not None:
                cand = pre.with_params(v=v)
                f, _ = _surrogate_mi(cand, xi, self.c, self.bank)
                if f >= f0 + cfg.armijo_c1 * 2.0 * float(np.real(np.vdot(grad, v - pre.v))):
                    return cand, t
            t *= cfg.shrink
        return pre, 0.0

    def start(self, pre):
        """Fixed point and objective for the initial precoder."""
        return self.refresh(pre, None)

    def step(self, pre, state, ev):
        """One iteration: gradients, both line searches, refresh.

        Returns ``(pre, state, ev, t_lambda, t_v)``; the inputs come back
        unchanged when no ascent step exists."""
        cfg = self.cfg
        xi_s = surrogate_channel_gains(state, pre)
        xi = state.xi
        g_lam, _ = gradients(pre, xi_s, list(ev.stream_mmse))
        g_lam = np.stack(g_lam)
        pre_l, t_l = self.lambda_step(pre, xi, g_lam, ev.term_mi)
        f_l, e_l = _surrogate_mi(pre_l, xi, self.c, self.bank, want_mmse=True)
        _, g_v = gradients(pre_l, xi_s, list(e_l))
        g_v = np.stack(g_v)
        cand, t_v = self.v_step(pre_l, xi, g_v, f_l)

        new_state, new_ev = self.refresh(cand, (state.gamma, state.psi))
        tries = 0
        while new_ev.total < ev.total and (t_l > 0 or t_v > 0) and tries < cfg.max_halvings:
            tries += 1
            t_l *= cfg.shrink
            t_v *= cfg.shrink
            p = _normalized_power(pre.lambda_sq + t_l * g_lam, self.power)
            cand = pre if p is None else pre.with_params(lambda_sq=p)
            if t_v > 0:
                cand = cand.with_params(v=_retract_all(cand.v, t_v * g_v))
            new_state, new_ev = self.refresh(cand, (state.gamma, state.psi))
        if new_ev.total < ev.total:
            return pre, state, ev, 0.0, 0.0
        return cand, new_state, new_ev, t_l, t_v

    def run(self, index, pre):
        cfg = self.cfg
        t_start = time.perf_counter()
        state, ev = self.start(pre)
        records = [IterationRecord(index, 1, ev.total, 0.0, 0.0, state.residual, state.iterations,
                                   time.perf_counter() - t_start)]
        stop = "max_iter"
        for n in range(1, cfg.max_iter + 1):
            t0 = time.perf_counter()
            pre, state, new_ev, t_l, t_v = self.step(pre, state, ev)
            gain = new_ev.total - ev.total
            ev = new_ev
            records.append(IterationRecord(index, n + 1, ev.total, t_l, t_v, state.residual, state.iterations,
                                           time.perf_counter() - t0))
            if gain <= cfg.epsilon:
                stop = "epsilon"
                break
        return RestartResult(index, records, pre, ev.total, ev.std_error, stop, state)


def _run_restart(args):
    stats, c, power, s, n_s, perm, bank, cfg, index = args
    rng = make_rng(cfg.seed, 1000 + index)
    pre = random_precoder(perm, s, n_s, power, rng)
    return RestartRunner(stats, c, power, bank, cfg).run(index, pre)


def optimize(
    stats: ChannelStats,
    c: Constellation,
    power: float,
    s: int,
    n_s: int,
    cfg: OptimizerConfig = OptimizerConfig(),
    bank: NoiseBank = None,
    perm=None,
) -> OptimizationTrace:
    """Maximize the surrogate MI over grouped precoders with ``S`` streams of width ``N_s``.

    Runs ``cfg.restarts`` random initializations and keeps the best.

    Raises:
        ConfigError: ``S * N_s != N_t``, odd ``N_s > 1`` or ``power <= 0``.
        ConvergenceError: a fixed-point refresh failed, with restart context.
    """
    validate_layout(stats.n_t, s, n_s)
    if power <= 0:
        raise ConfigError(f"transmit power must be positive, got {power}")
    if bank is None:
        bank = make_noise_bank(n_s, cfg.noise_samples, cfg.seed)
    if perm is None:
        perm = initial_permutation(stats, c, power, s, n_s, bank, cfg)
    jobs = [(stats, c, power, s, n_s, tuple(perm), bank, cfg, r) for r in range(cfg.restarts)]
    try:
        if cfg.workers > 1 and cfg.restarts > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_run_restart, jobs))
        else:
            results = [_run_restart(job) for job in jobs]
    except ConvergenceError as exc:
        raise ConvergenceError(f"optimization aborted: {exc}", exc.residual, exc.iterations) from exc
    best = max(range(len(results)), key=lambda i: (results[i].mi_asy, -i))
    winner = results[best]
    log.debug("best restart %d: I_asy = %.6f bits", best, winner.mi_asy)
    return OptimizationTrace(results, best, winner.precoder, expand(winner.precoder, stats),
                             winner.mi_asy, winner.std_error, power)
