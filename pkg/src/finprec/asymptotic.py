"""Large-system surrogate of the ergodic mutual information.

For a precoder ``B = U_T Λ_B V_B`` the channel is replaced by the diagonal
surrogate ``z = Ξ^{1/2} x + n`` with ``x = Λ_B V_B d`` and ``Ξ = γ Λ_T``. The
scalars ``γ`` and ``ψ`` solve

    ψ = tr(Ω Λ_T),    γ = tr((I + ψ Λ_R)^{-1} Λ_R),

where ``Ω`` is the MMSE matrix of ``x`` on the surrogate, and the surrogate MI is

    I_asy = I(x; z) + log2 det(I + ψ Λ_R) - γ ψ log2 e.

Precoders enter as *groups*: a list of ``(indices, T)`` pairs where ``T`` maps
the group's data symbols onto the surrogate subchannels ``indices``. A grouped
precoder has one block per stream; a dense ``B`` is one block ``U_T^H B`` over
all subchannels.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelStats
from .constellation import Constellation, enumerate_product
from .errors import ConvergenceError, DimensionError
from .mi import LOG2E, NoiseBank, likelihood_moments


@dataclass(frozen=True)
class FixedPointState:
    gamma: float
    psi: float
    xi: np.ndarray
    r: np.ndarray
    omega: np.ndarray
    iterations: int
    residual: float
    stream_mmse: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class AsymptoticMi:
    total: float
    term_mi: float
    term_logdet: float
    term_correction: float
    std_error: float = 0.0
    stream_mi: np.ndarray = field(default=None, repr=False)
    stream_mmse: np.ndarray = field(default=None, repr=False)


def precoder_groups(pre, stats: ChannelStats):
    """``(indices, T)`` blocks for a grouped precoder or a dense matrix."""
    if hasattr(pre, "groups"):
        return pre.groups()
    b = np.asarray(pre, dtype=complex)
    if b.shape != (stats.n_t, stats.n_t):
        raise DimensionError(f"precoder shape {b.shape} does not match N_t = {stats.n_t}")
    return [(np.arange(stats.n_t), stats.u_t.conj().T @ b)]


def _stack(groups):
    widths = {t.shape[0] for _, t in groups}
    if len(widths) != 1:
        raise DimensionError("all groups must have the same width")
    idx = np.stack([np.asarray(i) for i, _ in groups])
    t = np.stack([np.asarray(t, dtype=complex) for _, t in groups])
    return idx, t


def evaluate_groups(xi, groups, c: Constellation, bank: NoiseBank, want_mmse=True):
    """Per-group MI samples and MMSE matrices on the surrogate channel.

    Returns ``(per_noise, E)`` with ``per_noise`` of shape ``(S, K)`` in bits.
    """
    idx, t = _stack(groups)
    width = t.shape[1]
    if bank.dim != width:
        raise DimensionError(f"noise bank dimension {bank.dim} != group width {width}")
    x = enumerate_product(c, width).array()
    g = np.sqrt(np.asarray(xi)[idx])[:, :, None] * t
    return likelihood_moments(g, x, bank.samples, want_mmse=want_mmse)


def _omega(n_t, groups, idx, t, e):
    omega = np.zeros((n_t, n_t), dtype=complex)
    blocks = t @ e @ np.conj(np.swapaxes(t, 1, 2))
    for s in range(idx.shape[0]):
        omega[np.ix_(idx[s], idx[s])] = 0.5 * (blocks[s] + blocks[s].conj().T)
    return omega


def gamma_of_psi(psi, lambda_r):
    return float(np.sum(lambda_r / (1.0 + psi * lambda_r)))


def psi_map(gamma, stats, groups, c, bank):
    """One half-sweep: ``γ -> (ψ, Ω, E)`` through the surrogate MMSE."""
    idx, t = _stack(groups)
    _, e = evaluate_groups(gamma * stats.lambda_t, groups, c, bank, want_mmse=True)
    omega = _omega(stats.n_t, groups, idx, t, e)
    psi = float(np.real(np.sum(np.diag(omega) * stats.lambda_t)))
    return psi, omega, e


def solve_fixed_point(
    stats: ChannelStats,
    pre,
    c: Constellation,
    bank: NoiseBank,
    tol: float = 1e-9,
    max_iter: int = 500,
    damping: float = 1.0,
    init=None,
) -> FixedPointState:
    """Damped Picard iteration for ``(γ, ψ)``.

    Starts from ``γ = tr(Λ_R), ψ = 0`` unless ``init=(γ, ψ)`` is given. The
    γ-map is monotone increasing, so the default is undamped; the damping
    factor is halved whenever the γ increment has flipped sign three times.

    Raises:
        ConvergenceError: residual still above ``tol`` after ``max_iter`` sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    groups = precoder_groups(pre, stats)
    lam_r = stats.lambda_r
    gamma, psi = (float(np.sum(lam_r)), 0.0) if init is None else map(float, init)
    alpha = damping
    flips, last_step = 0, 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        psi_new, omega, e = psi_map(gamma, stats, groups, c, bank)
        gamma_new = gamma_of_psi(psi_new, lam_r)
        residual = abs(gamma_new - gamma) + abs(psi_new - psi)
        if residual <= tol:
            return FixedPointState(
                gamma, psi_new, gamma * stats.lambda_t, psi_new * lam_r, omega, it, residual, e
            )
        step = gamma_new - gamma
        if step * last_step < 0:
            flips += 1
            if flips >= 3:
                alpha *= 0.5
                flips = 0
        last_step = step
        gamma = (1 - alpha) * gamma + alpha * gamma_new
        psi = (1 - alpha) * psi + alpha * psi_new
    raise ConvergenceError(
        f"fixed point did not converge in {max_iter} sweeps (residual {residual:.3g})",
        residual=residual,
        iterations=max_iter,
    )


def solve_fixed_point_bracketed(
    stats: ChannelStats,
    pre,
    c: Constellation,
    bank: NoiseBank,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> FixedPointState:
    """Illinois regula falsi on ``h(γ) = G(γ) - γ`` over ``[0, tr(Λ_R)]``.

    ``G`` maps ``γ`` through ``ψ`` back to ``γ``. It takes values in
    ``[0, tr(Λ_R)]``, so ``h`` always changes sign on that interval. This
    converges where Picard iteration stalls because the slope of ``G`` is
    close to one.

    Raises:
        ConvergenceError: residual still above ``tol`` after ``max_iter`` evaluations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    groups = precoder_groups(pre, stats)
    lam_r = stats.lambda_r

    def h(gamma):
        psi, omega, e = psi_map(gamma, stats, groups, c, bank)
        return gamma_of_psi(psi, lam_r) - gamma, psi, omega, e

    lo, hi = 0.0, float(np.sum(lam_r))
    h_lo, psi_lo, *_ = h(lo)
    h_hi, psi_hi, *_ = h(hi)
    side, residual = 0, np.inf
    for it in range(1, max_iter + 1):
        gamma = lo if h_lo == h_hi else (lo * h_hi - hi * h_lo) / (h_hi - h_lo)
        gamma = min(max(gamma, lo), hi)
        h_mid, psi, omega, e = h(gamma)
        residual = abs(h_mid) + min(abs(psi - psi_lo), abs(psi - psi_hi))
        if residual <= tol or hi - lo <= tol * 1e-3:
            return FixedPointState(gamma, psi, gamma * stats.lambda_t, psi * lam_r, omega, it, residual, e)
        if h_mid > 0:
            lo, h_lo, psi_lo = gamma, h_mid, psi
            if side == 1:
                h_hi *= 0.5
            side = 1
        else:
            hi, h_hi, psi_hi = gamma, h_mid, psi
            if side == -1:
                h_lo *= 0.5
            side = -1
    raise ConvergenceError(
        f"bracketed fixed point did not converge in {max_iter} evaluations (residual {residual:.3g})",
        residual=residual,
        iterations=max_iter,
    )


def solve_fixed_point_robust(stats, pre, c, bank, tol=1e-9, max_iter=500, init=None) -> FixedPointState:
    """Picard iteration, falling back to the bracketed solver if it stalls.

    ``max_iter`` bounds the map evaluations of each stage separately.
    """
    try:
        return solve_fixed_point(stats, pre, c, bank, tol, max_iter, init=init)
    except ConvergenceError:
        return solve_fixed_point_bracketed(stats, pre, c, bank, tol, max_iter)


def asymptotic_mi(state: FixedPointState, stats: ChannelStats, pre, c: Constellation, bank: NoiseBank) -> AsymptoticMi:
    """Assemble ``I_asy`` at a converged state, in bits per channel use."""
    groups = precoder_groups(pre, stats)
    per_noise, e = evaluate_groups(state.xi, groups, c, bank, want_mmse=True)
    total_samples = per_noise.sum(axis=0)
    k = total_samples.size
    se = float(np.std(total_samples, ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    term_mi = float(total_samples.mean())
    term_logdet = float(np.sum(np.log1p(state.psi * stats.lambda_r)) * LOG2E)
    term_correction = state.gamma * state.psi * LOG2E
    return AsymptoticMi(
        term_mi + term_logdet - term_correction,
        term_mi,
        term_logdet,
        term_correction,
        se,
        per_noise.mean(axis=1),
        e,
    )


def surrogate_channel_gains(state: FixedPointState, pre) -> list:
    """Per-stream diagonal gains ``Ξ_s`` picked from ``Ξ`` by the permutation."""
    perm = np.asarray(pre.perm)
    n_t = state.xi.size
    if perm.size != n_t or sorted(perm.tolist()) != list(range(n_t)):
        raise DimensionError("permutation is not a bijection on the transmit subchannels")
    return [np.diag(state.xi[perm[s * pre.n_s:(s + 1) * pre.n_s]]) for s in range(pre.s)]
