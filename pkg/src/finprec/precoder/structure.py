"""Grouped precoder ``B = U_T Λ_B V_B`` with block-diagonal (permuted) ``V_B``."""

from dataclasses import dataclass

import numpy as np

from ..constants import TOL
from ..errors import ConfigError, DimensionError
from ..linalg import unitarity_error


@dataclass(frozen=True)
class StructuredPrecoder:
    """``S`` streams of width ``N_s``; stream ``s`` drives subchannels
    ``perm[s*N_s:(s+1)*N_s]`` (0-based) through ``diag(lam[s]) @ v[s]``."""

    n_t: int
    s: int
    n_s: int
    perm: tuple
    lam: np.ndarray  # (S, N_s) nonnegative amplitudes, Λ_s
    v: np.ndarray  # (S, N_s, N_s) unitary mixers, V_s

    @classmethod
    def build(cls, perm, lam, v):
        lam = np.asarray(lam, dtype=float)
        v = np.asarray(v, dtype=complex)
        s, n_s = lam.shape
        pre = cls(s * n_s, s, n_s, tuple(int(i) for i in perm), lam, v)
        pre.check_shapes()
        return pre

    def check_shapes(self):
        if self.s * self.n_s != self.n_t:
            raise ConfigError(f"S*N_s = {self.s}*{self.n_s} must equal N_t = {self.n_t}")
        if sorted(self.perm) != list(range(self.n_t)):
            raise DimensionError(f"perm {self.perm} is not a permutation of 0..{self.n_t - 1}")
        if self.lam.shape != (self.s, self.n_s) or self.v.shape != (self.s, self.n_s, self.n_s):
            raise DimensionError("Λ_s / V_s shapes do not match (S, N_s)")
        if np.any(self.lam < 0):
            raise DimensionError("Λ_s entries must be nonnegative")

    @property
    def power(self) -> float:
        return float(np.sum(self.lam**2))

    @property
    def lambda_sq(self) -> np.ndarray:
        return self.lam**2

    def stream_indices(self, s):
        return np.asarray(self.perm[s * self.n_s:(s + 1) * self.n_s])

    def groups(self):
        return [(self.stream_indices(s), self.lam[s][:, None] * self.v[s]) for s in range(self.s)]

    def with_params(self, lambda_sq=None, v=None):
        lam = self.lam if lambda_sq is None else np.sqrt(np.clip(lambda_sq, 0.0, None))
        return StructuredPrecoder(self.n_t, self.s, self.n_s, self.perm, lam, self.v if v is None else v)

    def violations(self, power):
        """Constraint residuals: (|Σ tr Λ_s² - P|, max ||V_s^H V_s - I||_F)."""
        return abs(self.power - power), max(unitarity_error(v) for v in self.v)

    def is_feasible(self, power) -> bool:
        dp, dv = self.violations(power)
        return dp <= TOL.power * max(1.0, power) and dv <= TOL.unitary


def scatter(pre: StructuredPrecoder):
    """``(Λ_B diagonal, V_B)`` in antenna coordinates."""
    lam_b = np.zeros(pre.n_t)
    v_b = np.zeros((pre.n_t, pre.n_t), dtype=complex)
    for s in range(pre.s):
        idx = pre.stream_indices(s)
        lam_b[idx] = pre.lam[s]
        v_b[np.ix_(idx, idx)] = pre.v[s]
    return lam_b, v_b


def expand(pre: StructuredPrecoder, stats) -> np.ndarray:
    """Full precoder ``B = U_T Λ_B V_B``."""
    if stats.n_t != pre.n_t:
        raise DimensionError(f"precoder has N_t = {pre.n_t}, channel has {stats.n_t}")
    lam_b, v_b = scatter(pre)
    return (stats.u_t * lam_b) @ v_b


def block_mask(pre: StructuredPrecoder) -> np.ndarray:
    """Boolean mask of entries of ``V_B`` allowed to be nonzero."""
    mask = np.zeros((pre.n_t, pre.n_t), dtype=bool)
    for s in range(pre.s):
        idx = pre.stream_indices(s)
        mask[np.ix_(idx, idx)] = True
    return mask


def pair_subchannels(xi_diag, n_s: int) -> list:
    """Strong/weak subchannel pairing.

    Indices are ranked by gain (descending, ties by index). Each stream in
    turn takes the ``N_s/2`` strongest and ``N_s/2`` weakest remaining
    indices, listed in descending gain order. ``N_s = 1`` needs no pairing and
    returns the identity.
    """
    xi = np.asarray(xi_diag, dtype=float)
    n = xi.size
    if n_s < 1 or n % n_s:
        raise ConfigError(f"{n} subchannels cannot be split into streams of width {n_s}")
    if n_s == 1:
        return list(range(n))
    if n_s % 2:
        raise ConfigError(f"strong/weak pairing needs an even stream width, got N_s = {n_s}")
    order = list(np.argsort(-xi, kind="stable"))
    half = n_s // 2
    perm = []
    while order:
        perm.extend(order[:half] + order[-half:])
        order = order[half:-half]
    return [int(i) for i in perm]
