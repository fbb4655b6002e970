"""Kronecker-correlated Rayleigh channels: statistics, sampling and file I/O.

The channel is ``H = A_R^{1/2} W A_T^{1/2}`` with IID CN(0, 1) entries in
``W``. Random streams come from numpy's Philox-4x64 counter-based generator
keyed by ``SeedSequence((seed, stream))`` so every worker can own a
reproducible, independent stream.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import TOL
from .errors import ConfigError, DimensionError, DomainError
from .linalg import HermitianEig, as_matrix, hermitian_eig, symmetrize

log = logging.getLogger(__name__)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """IID CN(0, 1) samples (variance 1/2 per real dimension)."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelStats:
    u_t: np.ndarray
    lambda_t: np.ndarray
    u_r: np.ndarray
    lambda_r: np.ndarray

    @property
    def n_t(self) -> int:
        return self.lambda_t.size

    @property
    def n_r(self) -> int:
        return self.lambda_r.size

    @property
    def ratio(self) -> float:
        return self.n_t / self.n_r

    def a_t(self) -> np.ndarray:
        return (self.u_t * self.lambda_t) @ self.u_t.conj().T

    def a_r(self) -> np.ndarray:
        return (self.u_r * self.lambda_r) @ self.u_r.conj().T


@dataclass(frozen=True)
class ChannelSample:
    h: np.ndarray
    seed: int
    stream: int
    index: int


def exp_correlation(n: int, rho: float) -> np.ndarray:
    """Exponential correlation matrix with entries ``rho**|i-j|``."""
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"rho must lie in [0, 1), got {rho}")
    if n < 1:
        raise ConfigError(f"matrix size must be >= 1, got {n}")
    i = np.arange(n)
    return (float(rho) ** np.abs(i[:, None] - i[None, :])).astype(complex)


def _decompose(a, name) -> HermitianEig:
    m = symmetrize(a, tol=TOL.file_hermitian, name=name)
    n = m.shape[0]
    diag = np.real(np.diag(m))
    if np.max(np.abs(diag - 1.0)) > TOL.unit_diagonal:
        trace = float(np.sum(diag))
        if abs(trace - n) > TOL.trace_rescale * n:
            raise DomainError(f"{name} has trace {trace:.6g}, expected {n} (unit diagonal)")
        log.warning("%s diagonal is not unit; rescaling trace %.6g -> %d", name, trace, n)
        m = m * (n / trace)
    eig = hermitian_eig(m)
    w = eig.eigenvalues
    if w[-1] < TOL.psd_floor * max(1.0, w[0]):
        raise DomainError(f"{name} is not positive semidefinite (min eigenvalue {w[-1]:.3g})")
    return HermitianEig(np.clip(w, 0.0, None), eig.eigenvectors)


def make_stats(a_t, a_r) -> ChannelStats:
    """Eigendecompose transmit and receive correlation matrices.

    Inputs must be Hermitian PSD with unit diagonal; a trace off by less than
    1% is rescaled to ``n`` with a warning.
    """
    t = _decompose(a_t, "A_T")
    r = _decompose(a_r, "A_R")
    return ChannelStats(t.eigenvectors, t.eigenvalues, r.eigenvectors, r.eigenvalues)


def identity_stats(n_t: int, n_r: int) -> ChannelStats:
    return make_stats(np.eye(n_t), np.eye(n_r))


def sample_channel(stats: ChannelStats, rng: np.random.Generator, count=None, seed=0, stream=0):
    """Draw ``H = U_R Λ_R^{1/2} W Λ_T^{1/2} U_T^H``.

    Returns a single :class:`ChannelSample`, or with ``count`` a
    ``(count, n_r, n_t)`` array of realizations.
    """
    shape = (stats.n_r, stats.n_t) if count is None else (count, stats.n_r, stats.n_t)
    w = complex_normal(rng, shape)
    left = stats.u_r * np.sqrt(stats.lambda_r)
    right = (stats.u_t * np.sqrt(stats.lambda_t)).conj().T
    h = left @ w @ right
    if count is None:
        return ChannelSample(h, seed, stream, 0)
    return h


def reduce_equivalent(stats: ChannelStats, sample) -> np.ndarray:
    """Equivalent diagonal-statistics channel ``Λ_R^{1/2} W~ Λ_T^{1/2}``.

    ``W~ = U_R^H A_R^{-1/2} H A_T^{-1/2} U_T`` recovers the whitened draw, so the
    result equals ``U_R^H H U_T`` exactly. Requires nonsingular correlations.
    """
    h = sample.h if isinstance(sample, ChannelSample) else as_matrix(sample, "H")
    if h.shape != (stats.n_r, stats.n_t):
        raise DimensionError(f"channel shape {h.shape} does not match stats ({stats.n_r}, {stats.n_t})")
    if stats.lambda_t[-1] <= 0.0 or stats.lambda_r[-1] <= 0.0:
        raise DomainError("singular correlation matrix; equivalent channel undefined")
    inv_sqrt_r = (stats.u_r / np.sqrt(stats.lambda_r)) @ stats.u_r.conj().T
    inv_sqrt_t = (stats.u_t / np.sqrt(stats.lambda_t)) @ stats.u_t.conj().T
    w_tilde = stats.u_r.conj().T @ inv_sqrt_r @ h @ inv_sqrt_t @ stats.u_t
    return np.sqrt(stats.lambda_r)[:, None] * w_tilde * np.sqrt(stats.lambda_t)[None, :]


def write_matrix(path, a) -> None:
    """Write a square complex matrix: a line with ``n``, then one row per line
    as comma-separated ``re,im`` pairs."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix file format holds square matrices, got {m.shape}")
    lines = [str(m.shape[0])]
    for row in m:
        lines.append(",".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matrix(path, hermitian=False) -> np.ndarray:
    """Parse the matrix file format of :func:`write_matrix`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ConfigError(f"{path}: empty matrix file")
    try:
        n = int(rows[0])
        body = [[float(x) for x in ln.split(",")] for ln in rows[1:]]
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed number ({exc})") from None
    if n < 1 or len(body) != n or any(len(r) != 2 * n for r in body):
        raise ConfigError(f"{path}: expected {n} rows of {n} re,im pairs")
    vals = np.array(body)
    m = vals[:, 0::2] + 1j * vals[:, 1::2]
    if hermitian:
        scale = max(1.0, np.linalg.norm(m))
        if np.linalg.norm(m - m.conj().T) > TOL.file_hermitian * scale:
            raise DomainError(f"{path}: matrix is not Hermitian within {TOL.file_hermitian:g}")
    return m


def load_stats(a_t_path, a_r_path) -> ChannelStats:
    return make_stats(read_matrix(a_t_path, hermitian=True), read_matrix(a_r_path, hermitian=True))
