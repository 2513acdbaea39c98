"""Numba-compiled local linear hot kernels.

Loop implementations of the same contracts as ``_kernels_numpy`` (see that
module for the shared conventions). Importing this module requires numba;
the backend selector falls back to the numpy path when it is missing or
``LPRESIM_BACKEND=numpy`` is set.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_SQRT_2PI = np.sqrt(2.0 * np.pi)
DEGEN_RTOL = 1e-12


@njit(cache=True)
def _kval(u, code):
    if code == 0:
        a = 1.0 - u * u
        return 0.75 * a if a > 0.0 else 0.0
    return np.exp(-0.5 * u * u) / _SQRT_2PI


@njit(cache=True)
def ll_eval(t, w, z, h, code):
    n = t.shape[0]
    m = z.shape[0]
    g = np.empty(m)
    ok = np.empty(m, dtype=np.bool_)
    for j in range(m):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            u = t[i] - z[j]
            k = _kval(u / h, code) / h
            s0 += k
            s1 += k * u
            s2 += k * u * u
        s0 /= n
        s1 /= n
        s2 /= n
        den = s0 * s2 - s1 * s1
        if den > DEGEN_RTOL * (1.0 + s0 * s2):
            num = 0.0
            for i in range(n):
                u = t[i] - z[j]
                k = _kval(u / h, code) / h
                num += k * (s2 - u * s1) * w[i]
            g[j] = num / (n * den)
            ok[j] = True
        else:
            g[j] = np.nan
            ok[j] = False
    return g, ok


@njit(cache=True)
def ll_deriv(t, w, z, h1, code):
    n = t.shape[0]
    m = z.shape[0]
    gp = np.empty(m)
    ok = np.empty(m, dtype=np.bool_)
    for j in range(m):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            u = t[i] - z[j]
            k = _kval(u / h1, code) / h1
            s0 += k
            s1 += k * u
            s2 += k * u * u
        s0 /= n
        s1 /= n
        s2 /= n
        den = s0 * s2 - s1 * s1
        if den > DEGEN_RTOL * (1.0 + s0 * s2):
            num = 0.0
            for i in range(n):
                u = t[i] - z[j]
                k = _kval(u / h1, code) / h1
                num += k * (u * s0 - s1) * w[i]
            gp[j] = num / (n * den)
            ok[j] = True
        else:
            gp[j] = np.nan
            ok[j] = False
    return gp, ok


@njit(cache=True)
def ll_both(t, w, z, h, h1, code):
    g, ok_g = ll_eval(t, w, z, h, code)
    gp, ok_d = ll_deriv(t, w, z, h1, code)
    return g, gp, ok_g & ok_d


@njit(cache=True)
def ll_fit_diag(t, w, h, code):
    n = t.shape[0]
    fitted = np.empty(n)
    selfw = np.empty(n)
    ok = np.empty(n, dtype=np.bool_)
    k0 = _kval(0.0, code) / h
    for j in range(n):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            u = t[i] - t[j]
            k = _kval(u / h, code) / h
            s0 += k
            s1 += k * u
            s2 += k * u * u
        s0 /= n
        s1 /= n
        s2 /= n
        den = s0 * s2 - s1 * s1
        if den > DEGEN_RTOL * (1.0 + s0 * s2):
            num = 0.0
            for i in range(n):
                u = t[i] - t[j]
                k = _kval(u / h, code) / h
                num += k * (s2 - u * s1) * w[i]
            fitted[j] = num / (n * den)
            selfw[j] = k0 * s2 / (n * den)
            ok[j] = True
        else:
            fitted[j] = np.nan
            selfw[j] = np.nan
            ok[j] = False
    return fitted, selfw, ok
