"""Euclidean gradients of the surrogate MI with ``γ, ψ, Ξ`` held fixed.

With ``G_s = Ξ_s^{1/2} Λ_s V_s`` the MI depends on ``G_s^H G_s =
V_s^H Ξ_s Λ_s² V_s``, and ``dI = log2(e) tr(E_s d(G_s^H G_s))``. Hence

    ∂I/∂Λ_s²  = log2(e) diag(V_s E_s V_s^H Ξ_s)
    ∂I/∂V_s*  = log2(e) Ξ_s Λ_s² V_s E_s

The directional derivative along a complex perturbation ``D`` of ``V_s`` is
``2 Re tr(∇^H D)``.
"""

import numpy as np

from ..errors import DimensionError
from ..mi import LOG2E


def gradients(pre, xi_s, e_s):
    """Return ``(grad_lambda_sq, grad_v)`` lists, one entry per stream, in bits."""
    if len(xi_s) != pre.s or len(e_s) != pre.s:
        raise DimensionError(f"expected {pre.s} streams of Ξ_s and E_s")
    g_lam, g_v = [], []
    for s in range(pre.s):
        xi = np.asarray(xi_s[s])
        xi = np.diag(xi) if xi.ndim == 2 else xi
        e = np.asarray(e_s[s])
        v = pre.v[s]
        if xi.shape != (pre.n_s,) or e.shape != (pre.n_s, pre.n_s):
            raise DimensionError(f"stream {s}: Ξ_s {xi.shape} / E_s {e.shape} do not match N_s = {pre.n_s}")
        vev = v @ e @ v.conj().T
        g_lam.append(LOG2E * np.real(np.diag(vev)) * xi)
        g_v.append(LOG2E * (xi * pre.lam[s] ** 2)[:, None] * (v @ e))
    return g_lam, g_v
