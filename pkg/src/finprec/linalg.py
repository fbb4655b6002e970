"""Small dense complex linear algebra.

Thin wrappers over LAPACK (via numpy) that add the checks and conventions the
rest of the package relies on: descending, stably ordered eigenvalues, strict
Hermitian validation and a polar retraction onto the unitary group.
"""

from typing import NamedTuple

import numpy as np

from .constants import TOL
from .errors import DimensionError, DomainError


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    return m


def _require_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got {m.shape}")


def symmetrize(a, tol=TOL.hermitian, name="matrix") -> np.ndarray:
    """Check that ``a`` is Hermitian to a relative tolerance and return (A + A^H)/2."""
    m = as_matrix(a, name)
    _require_square(m, name)
    scale = max(1.0, np.linalg.norm(m))
    if np.linalg.norm(m - m.conj().T) > tol * scale:
        raise DomainError(f"{name} is not Hermitian within {tol:g}")
    return 0.5 * (m + m.conj().T)


def hermitian_eig(a, tol=TOL.hermitian) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are returned in descending order; ties keep the order LAPACK
    produced them in, so downstream permutations are deterministic.

    Raises:
        DimensionError: ``a`` is not square.
        DomainError: ``a`` is not Hermitian within ``tol``.
    """
    m = symmetrize(a, tol)
    w, u = np.linalg.eigh(m)
    order = np.argsort(-w, kind="stable")
    return HermitianEig(w[order], u[:, order])


def polar_retract(m) -> np.ndarray:
    """Nearest unitary matrix to ``m`` in Frobenius norm (the polar factor P Q^H)."""
    m = as_matrix(m)
    _require_square(m, "matrix")
    p, s, qh = np.linalg.svd(m)
    if s[-1] <= TOL.rank * max(1.0, s[0]):
        raise DomainError("rank-deficient matrix has no unique unitary polar factor")
    return p @ qh


def logdet_hpd(a, base2=False) -> float:
    """log det of a Hermitian positive-definite matrix, in nats or bits."""
    w = hermitian_eig(a).eigenvalues
    if w[-1] <= 0.0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {w[-1]:.3g})")
    val = float(np.sum(np.log(w)))
    return val / np.log(2.0) if base2 else val


def unitarity_error(v) -> float:
    """Frobenius norm of V^H V - I."""
    v = np.asarray(v)
    return float(np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1])))
