"""Vectorized numpy implementations of the local linear hot kernels.

Fallback path used when numba is unavailable or disabled via
``LPRESIM_BACKEND=numpy``. Signatures mirror ``_kernels_numba``.

Conventions (shared by both backends):
  u_i = t_i - z           pairwise offsets of training index values
  K_h(u) = K(u/h)/h       scaled kernel, K selected by integer code
                          (0 = Epanechnikov, 1 = Gaussian)
  S_r = mean(u^r K_h(u))  local moment sums, r = 0, 1, 2
A local 2x2 system is degenerate when S0*S2 - S1^2 <= 1e-12*(1 + S0*S2);
degenerate outputs are NaN with ok=False.
"""

from __future__ import annotations

import numpy as np

_SQRT_2PI = np.sqrt(2.0 * np.pi)
DEGEN_RTOL = 1e-12


def _kvals(u: np.ndarray, code: int) -> np.ndarray:
    if code == 0:
        return 0.75 * np.maximum(0.0, 1.0 - u * u)
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def _moments(t, z, h, code):
    u = t[np.newaxis, :] - z[:, np.newaxis]
    k = _kvals(u / h, code) / h
    s0 = k.mean(axis=1)
    ku = k * u
    s1 = ku.mean(axis=1)
    s2 = (ku * u).mean(axis=1)
    return u, k, s0, s1, s2


def _guard(s0, s2, den):
    return den > DEGEN_RTOL * (1.0 + s0 * s2)


def ll_eval(t, w, z, h, code):
    """Local linear intercept (link value) at each z; returns (g, ok)."""
    n = t.shape[0]
    u, k, s0, s1, s2 = _moments(t, z, h, code)
    den = s0 * s2 - s1 * s1
    ok = _guard(s0, s2, den)
    num = (k * (s2[:, np.newaxis] - u * s1[:, np.newaxis])) @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        g = num / (n * den)
    g = np.where(ok, g, np.nan)
    return g, ok


def ll_deriv(t, w, z, h1, code):
    """Local linear slope (link derivative) at each z; returns (gp, ok)."""
    n = t.shape[0]
    u, k, s0, s1, s2 = _moments(t, z, h1, code)
    den = s0 * s2 - s1 * s1
    ok = _guard(s0, s2, den)
    num = (k * (u * s0[:, np.newaxis] - s1[:, np.newaxis])) @ w
    with np.errstate(divide="ignore", invalid="ignore"):
        gp = num / (n * den)
    gp = np.where(ok, gp, np.nan)
    return gp, ok


def ll_both(t, w, z, h, h1, code):
    """Link value at bandwidth h and slope at bandwidth h1; ok requires both."""
    g, ok_g = ll_eval(t, w, z, h, code)
    gp, ok_d = ll_deriv(t, w, z, h1, code)
    return g, gp, ok_g & ok_d


def ll_fit_diag(t, w, h, code):
    """Fitted values at the training points plus each point's own weight.

    Used for GCV: trace of the smoother matrix is the sum of self weights.
    Returns (fitted, self_weight, ok).
    """
    n = t.shape[0]
    u, k, s0, s1, s2 = _moments(t, t, h, code)
    den = s0 * s2 - s1 * s1
    ok = _guard(s0, s2, den)
    num = (k * (s2[:, np.newaxis] - u * s1[:, np.newaxis])) @ w
    k0 = _kvals(np.zeros(1), code)[0] / h
    with np.errstate(divide="ignore", invalid="ignore"):
        fitted = num / (n * den)
        selfw = k0 * s2 / (n * den)
    fitted = np.where(ok, fitted, np.nan)
    selfw = np.where(ok, selfw, np.nan)
    return fitted, selfw, ok
