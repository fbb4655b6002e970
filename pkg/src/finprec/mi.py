"""Finite-alphabet mutual information and MMSE for ``z = G d + n``.

The symbol expectation is exhaustive over all ``M**n`` input vectors; only the
noise expectation is sampled, from a :class:`NoiseBank` that callers draw once
and reuse (common random numbers). For transmitted ``d_m`` and noise ``w``,

    log p(z | d_k) / p(z | d_m) = -||a_m - a_k||^2 - 2 Re <w, a_m - a_k>,

with ``a_m = G d_m``. Everything is evaluated in the log domain with
max-subtraction, so high-SNR 16-QAM never overflows.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .channel import complex_normal, make_rng
from .constants import ENUMERATION_CAP, KERNEL_CHUNK, TOL
from .constellation import Constellation, enumerate_product
from .errors import ConfigError, DimensionError, DomainError

LOG2E = 1.0 / np.log(2.0)
_EXP_SAFE = 700.0


class MiMethod(str, enum.Enum):
    MONTE_CARLO = "MonteCarlo"
    QUADRATURE = "ExhaustiveQuadrature"


@dataclass(frozen=True)
class MiEstimate:
    value: float
    std_error: float
    method: MiMethod = MiMethod.MONTE_CARLO


@dataclass(frozen=True)
class NoiseBank:
    """Fixed CN(0, I) samples, shape ``(count, dim)``."""

    samples: np.ndarray
    seed: int = 0

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def make_noise_bank(dim: int, count: int, seed: int, stream: int = 1) -> NoiseBank:
    if count < 1:
        raise ConfigError("noise bank must hold at least one sample")
    return NoiseBank(complex_normal(make_rng(seed, stream), (count, dim)), seed)


def _chunks(total, size):
    for start in range(0, total, size):
        yield slice(start, min(total, start + size))


def likelihood_moments(g, x, noise, want_mmse=True, chunk=KERNEL_CHUNK):
    """Batched kernel behind :func:`mi_discrete` and :func:`mmse_matrix`.

    Work is tiled over channels, transmitted symbols and noise draws so that
    no temporary exceeds about ``chunk`` elements, whatever ``M**n`` is.

    Args:
        g: ``(B, r, n)`` effective channels.
        x: ``(Mn, n)`` enumerated input vectors.
        noise: ``(K, r)`` bank shared by the batch, or ``(B, K, r)``.
        want_mmse: also accumulate the error covariance.

    Returns:
        ``(per_noise, E)`` where ``per_noise[b, k]`` is the MI sample in bits
        for noise draw ``k`` (already averaged over the inputs) and ``E`` is
        ``(B, n, n)`` or ``None``.
    """
    g = np.asarray(g, dtype=complex)
    nb, r, n = g.shape
    mn = x.shape[0]
    shared = noise.ndim == 2
    k_total = noise.shape[-2]
    lse_sum = np.zeros((nb, k_total))
    err = np.zeros((nb, n, n), dtype=complex) if want_mmse else None
    x2 = np.concatenate([x.real, x.imag], axis=1)
    x3 = np.concatenate([x2, np.ones((mn, 1))], axis=1)
    ones_mn = np.ones(mn)

    m_block = max(1, min(mn, chunk // mn))
    b_block = max(1, chunk // (m_block * mn))
    for bs in _chunks(nb, b_block):
        nbb = bs.stop - bs.start
        a = np.einsum("brn,mn->bmr", g[bs], x)
        a_h = np.conj(np.swapaxes(a, -1, -2))
        sq = np.sum(a.real**2 + a.imag**2, axis=-1)
        w_all = noise if shared else noise[bs]
        wn_all = np.sum(w_all.real**2 + w_all.imag**2, axis=-1)
        # proj[b, k, m] = Re <w_k, a_m>
        proj_all = np.real(np.conj(w_all) @ np.swapaxes(a, -1, -2))
        for ms in _chunks(mn, m_block):
            nm = ms.stop - ms.start
            dist = sq[:, ms, None] + sq[:, None, :] - 2.0 * np.real(a[:, ms] @ a_h)
            np.maximum(dist, 0.0, out=dist)
            dist[:, np.arange(nm), np.arange(ms.start, ms.stop)] = 0.0
            k_block = max(1, chunk // (nbb * nm * mn))
            for ks in _chunks(k_total, k_block):
                proj = proj_all[..., ks, :]
                wn = wn_all[..., ks]
                # Exponents are log-likelihood ratios against the transmitted
                # symbol: the self term is exactly 0 and every term is bounded
                # above by ||w||^2, so exp() cannot overflow unless that bound does.
                shift = float(wn.max()) > _EXP_SAFE
                expo = np.subtract(proj[..., None, :], proj[..., ms, None])
                expo *= 2.0
                expo -= dist[:, None, :, :]
                if shift:
                    expo -= np.broadcast_to(wn, proj.shape[:2])[..., None, None]
                np.exp(expo, out=expo)
                # Row sums and posterior-mean numerators as one GEMM; reductions
                # over a short trailing axis are much slower in numpy.
                flat = expo.reshape(-1, mn)
                if want_mmse:
                    mom1 = (flat @ x3).reshape(nbb, -1, nm, 2 * n + 1)
                    z = mom1[..., -1]
                else:
                    z = (flat @ ones_mn).reshape(nbb, -1, nm)
                lse = np.log(z)
                if shift:
                    lse += np.broadcast_to(wn, proj.shape[:2])[..., None]
                lse_sum[bs, ks] += lse @ np.ones(nm)
                if want_mmse:
                    e2 = x2[ms] - mom1[..., :-1] / z[..., None]
                    e2 = e2.reshape(nbb, -1, 2 * n)
                    mom = np.swapaxes(e2, 1, 2) @ e2
                    err[bs] += (mom[:, :n, :n] + mom[:, n:, n:]) + 1j * (mom[:, n:, :n] - mom[:, :n, n:])
    per_noise = (np.log(float(mn)) - lse_sum / mn) * LOG2E
    if want_mmse:
        err /= k_total * mn
        err = 0.5 * (err + np.conj(np.swapaxes(err, -1, -2)))
    return per_noise, err


def _prepare(g, c, n, bank):
    g = np.array(g, dtype=complex)
    if g.ndim != 2:
        raise DimensionError(f"effective channel must be 2-D, got shape {g.shape}")
    if g.shape[1] != n:
        raise DimensionError(f"channel has {g.shape[1]} columns, input dimension is {n}")
    if bank is None or bank.count == 0:
        raise ConfigError("noise bank is empty")
    if bank.dim != g.shape[0]:
        raise DimensionError(f"noise bank dimension {bank.dim} != channel output dimension {g.shape[0]}")
    x = enumerate_product(c, n, ENUMERATION_CAP).array()
    return g, x


def _estimate(per_noise) -> MiEstimate:
    k = per_noise.size
    se = float(np.std(per_noise, ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    return MiEstimate(float(per_noise.mean()), se)


def mi_and_mmse(g, c: Constellation, n: int, bank: NoiseBank):
    """MI estimate and MMSE matrix from one pass over the bank."""
    g, x = _prepare(g, c, n, bank)
    per_noise, err = likelihood_moments(g[None], x, bank.samples, want_mmse=True)
    return _estimate(per_noise[0]), err[0]


def mi_discrete(g, c: Constellation, n: int, bank: NoiseBank) -> MiEstimate:
    """Mutual information ``I(d; G d + n)`` in bits per channel use.

    Raises:
        CapacityError: ``M**n`` exceeds the enumeration cap.
        ConfigError: the bank is empty.
    """
    g, x = _prepare(g, c, n, bank)
    per_noise, _ = likelihood_moments(g[None], x, bank.samples, want_mmse=False)
    return _estimate(per_noise[0])


def mmse_matrix(g, c: Constellation, n: int, bank: NoiseBank) -> np.ndarray:
    """Error covariance ``E[(d - d_hat)(d - d_hat)^H]`` of the conditional-mean estimate."""
    return mi_and_mmse(g, c, n, bank)[1]


def check_mmse_bounds(e, slack=TOL.mmse_slack) -> None:
    """Raise if ``e`` leaves ``[0, I]`` by more than ``slack`` (never clamps)."""
    w = np.linalg.eigvalsh(e)
    if w[0] < -slack or w[-1] > 1.0 + slack:
        raise DomainError(f"MMSE eigenvalues {w[0]:.3g}..{w[-1]:.3g} outside [0, 1]")


def stream_mmse_to_omega(lambda_s, v_s, e_s) -> np.ndarray:
    """Error covariance of ``x_s = Λ_s V_s d_s``: ``Λ_s V_s E_s V_s^H Λ_s^H``."""
    lam = np.asarray(lambda_s)
    if lam.ndim == 1:
        lam = np.diag(lam)
    v_s = np.asarray(v_s, dtype=complex)
    e_s = np.asarray(e_s, dtype=complex)
    n = lam.shape[0]
    if v_s.shape != (n, n) or e_s.shape != (n, n):
        raise DimensionError(f"stream blocks disagree: Λ {lam.shape}, V {v_s.shape}, E {e_s.shape}")
    t = lam @ v_s
    omega = t @ e_s @ t.conj().T
    return 0.5 * (omega + omega.conj().T)


def mi_quadrature(g, c: Constellation, n: int, order: int = 24) -> MiEstimate:
    """Deterministic MI by Gauss-Hermite product quadrature over the noise.

    Only practical for output dimension ``r <= 2`` (``order**(2r)`` nodes).
    """
    g = np.array(g, dtype=complex)
    r = g.shape[0]
    if r > 2:
        raise ConfigError("quadrature MI supports at most 2 output dimensions")
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    # CN(0,1) has variance 1/2 per real part, matching the exp(-t^2) weight
    grids = np.meshgrid(*([nodes] * (2 * r)), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for axis in range(2 * r):
        shape = [1] * (2 * r)
        shape[axis] = order
        wgrid = wgrid * weights.reshape(shape)
    pts = np.stack([gr.ravel() for gr in grids], axis=1)
    w = (pts[:, 0::2] + 1j * pts[:, 1::2])
    wq = wgrid.ravel() / np.pi**r
    x = enumerate_product(c, n).array()
    per_node, _ = likelihood_moments(g[None], x, w, want_mmse=False)
    return MiEstimate(float(per_node[0] @ wq), 0.0, MiMethod.QUADRATURE)
