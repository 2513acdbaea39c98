"""Self-checks runnable from the command line.

Three families: the normalization constant of the gig error density
(adaptive quadrature cross-checked against the Bessel identity
integral = 2 e^2 K0(2)), the moment condition E(eps - 1/eps) = 0 for each
error law, and finite-difference checks of the estimating function and
information matrix on a random instance.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, special

from .fit import Dataset, estimating_fn, info_matrix, lpre_criterion
from .reparam import ReducedCoef, UnitIndexCoef, jacobian, lift, reduce
from .simulation import REPORTED_LAWS, error_moment_diagnostic
from .smoother import Bandwidths, EPANECHNIKOV, LinkFit


def gig_normalization():
    """Quadrature of exp(-x - 1/x + 2 - log x) over (0, inf).

    Returns (integral, bessel_value, c_estimate) where the Bessel identity
    gives the same integral as 2 e^2 K0(2) and c = 1/integral is the
    density's normalization constant (about 0.5941).
    """
    f = lambda x: np.exp(-x - 1.0 / x + 2.0 - np.log(x))
    left, _ = integrate.quad(f, 0.0, 1.0)
    right, _ = integrate.quad(f, 1.0, np.inf)
    total = left + right
    bessel = 2.0 * np.exp(2.0) * special.k0(2.0)
    return total, float(bessel), 1.0 / total


def moment_checks(n_draws=100_000, seed=0):
    """(law name, mean, bound, ok) for each reported error law."""
    out = []
    for law in REPORTED_LAWS:
        mean, bound = error_moment_diagnostic(law, n_draws, seed)
        out.append((law.value, mean, bound, abs(mean) <= bound))
    return out


def _random_instance(rng, n=30, p=4):
    x = rng.standard_normal((n, p))
    coef = UnitIndexCoef.from_vector(rng.standard_normal(p))
    t = x @ coef.beta
    g = 0.3 * t + 0.2 * np.sin(t)
    gp = 0.3 + 0.2 * np.cos(t)
    y = np.exp(g) * np.exp(0.3 * rng.standard_normal(n))
    data = Dataset(X=x, Y=y)
    bw = Bandwidths(h_opt=1.0, h=1.0, h1=1.0)
    link = LinkFit(eval_points=t, g_hat=g, g_deriv_hat=gp, bandwidths=bw, kernel=EPANECHNIKOV)
    return data, coef, link


def _frozen_criterion(data, coef, link, v):
    """Criterion with the link linearized at the current index values and
    the coefficient lifted from reduced coordinates v."""
    beta = lift(ReducedCoef(beta_r=v, pivot=coef.pivot, p=coef.p))
    t_new = data.X @ beta.beta
    g_lin = link.g_hat + link.g_deriv_hat * (t_new - link.eval_points)
    return lpre_criterion(data.Y, g_lin)


def _frozen_criterion_chartfree(data, coef, link, delta):
    """Same, but the chart is linearized too: beta = beta0 + J delta."""
    jac = jacobian(reduce(coef))
    beta = coef.beta + jac @ delta
    t_new = data.X @ beta
    g_lin = link.g_hat + link.g_deriv_hat * (t_new - link.eval_points)
    return lpre_criterion(data.Y, g_lin)


def gradient_selfcheck(seed=0):
    """Max relative errors of (Q vs -FD gradient, B vs FD Hessian)."""
    rng = np.random.default_rng(seed)
    data, coef, link = _random_instance(rng)
    v0 = reduce(coef).beta_r
    k = v0.size

    q = estimating_fn(data, coef, link)
    h = 1e-6
    fd_grad = np.empty(k)
    for j in range(k):
        e = np.zeros(k)
        e[j] = h
        fd_grad[j] = (
            _frozen_criterion(data, coef, link, v0 + e)
            - _frozen_criterion(data, coef, link, v0 - e)
        ) / (2 * h)
    err_q = np.linalg.norm(q + fd_grad) / max(np.linalg.norm(q), 1e-12)

    b = info_matrix(data, coef, link)
    h2 = 1e-4
    fd_hess = np.empty((k, k))
    f0 = _frozen_criterion_chartfree(data, coef, link, np.zeros(k))
    for i in range(k):
        for j in range(k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h2
            ej[j] = h2
            if i == j:
                fd_hess[i, j] = (
                    _frozen_criterion_chartfree(data, coef, link, ei)
                    - 2 * f0
                    + _frozen_criterion_chartfree(data, coef, link, -ei)
                ) / h2**2
            else:
                fd_hess[i, j] = (
                    _frozen_criterion_chartfree(data, coef, link, ei + ej)
                    - _frozen_criterion_chartfree(data, coef, link, ei - ej)
                    - _frozen_criterion_chartfree(data, coef, link, -ei + ej)
                    + _frozen_criterion_chartfree(data, coef, link, -ei - ej)
                ) / (4 * h2**2)
    err_b = np.linalg.norm(fd_hess - b) / max(np.linalg.norm(b), 1e-12)
    return float(err_q), float(err_b)
