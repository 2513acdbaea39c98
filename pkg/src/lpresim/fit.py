"""Product relative error estimation for the multiplicative single index model.

The model is Y = exp{g(X'b)} * e with positive multiplicative error. The
per-observation product relative error expands to

    Y*exp(-g) + (1/Y)*exp(g) - 2,

which is minimized over a unit-norm index coefficient b and an unknown
link g. Fitting alternates two stages: a local linear estimate of (g, g')
at the current index, then a Newton solve of the estimating equation for
the reduced coefficient with the link frozen. A convex linear variant of
the criterion provides the initial direction, and a least-squares-on-logs
fitter with the same architecture serves as a baseline.

All fitting happens on geometric-mean-centered log responses, which makes
the estimated index coefficient invariant under rescaling of Y; results
are reported back on the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateCovariates,
    DegenerateDesign,
    NoDescent,
    SingularInformation,
)
from .reparam import UnitIndexCoef, jacobian, lift, reduce
from .smoother import (
    EPANECHNIKOV,
    Bandwidths,
    KernelSpec,
    LinkFit,
    SmootherLink,
    bandwidth_rule,
    default_gcv_grid,
    gcv_bandwidth,
)

#: re-select the pivot between outer iterations when its entry drops below this
REPIVOT_THRESHOLD = 0.1


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix X (n x p) and strictly positive responses Y (n)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.Y, dtype=float)
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "Y", y)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError("X must be n x p and Y length n")
        if not (x.shape[0] > x.shape[1] >= 1):
            raise ValueError("need n > p >= 1")
        if not np.all(np.isfinite(x)):
            raise ValueError("X has non-finite entries")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise ValueError("Y must be strictly positive and finite")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """Tolerances and caps for the two-stage fit."""

    kernel: KernelSpec = EPANECHNIKOV
    gcv_grid: np.ndarray | None = None
    gcv_grid_size: int = 20
    max_outer: int = 50
    max_inner: int = 50
    tol_beta: float = 1e-8
    tol_grad: float = 1e-8
    ridge: float = 1e-8
    backtrack_factor: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if min(self.tol_beta, self.tol_grad, self.ridge) <= 0:
            raise ValueError("tolerances and ridge must be positive")
        if min(self.max_outer, self.max_inner, self.max_backtracks) < 1:
            raise ValueError("iteration caps must be >= 1")
        if not (0 < self.backtrack_factor < 1):
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass
class FitResult:
    """Fitted index coefficient plus the final link estimate and diagnostics.

    ``link`` holds the link refit at the estimated coefficient, evaluated at
    the training index values (original log scale). ``inner_trace`` and
    ``criterion_trace`` are nested per outer iteration. ``logy_center`` is
    the mean log response absorbed during fitting; ``logy_centered`` are the
    smoother's training responses, so the link can be re-evaluated anywhere.
    """

    beta_hat: UnitIndexCoef
    link: LinkFit
    criterion_value: float
    outer_iters: int
    inner_trace: list
    converged: bool
    bandwidths: Bandwidths
    estimator: str
    criterion_trace: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    train_index: np.ndarray | None = None
    logy_center: float = 0.0
    logy_centered: np.ndarray | None = None


def lpre_criterion(Y, g_at_index) -> float:
    """Mean product relative error of predicting Y by exp(g).

    (1/n) sum{ Y*exp(-g) + (1/Y)*exp(g) - 2 }. Each term is nonnegative and
    zero only at a perfect fit. Evaluated through d = log(Y) - g for
    stability with large responses.
    """
    y = np.asarray(Y, dtype=float)
    g = np.asarray(g_at_index, dtype=float)
    if y.shape != g.shape:
        raise ValueError("Y and g_at_index must have equal length")
    d = np.log(y) - g
    return float(np.mean(np.exp(d) + np.exp(-d) - 2.0))


def _criterion_from_resid(d: np.ndarray) -> float:
    with np.errstate(over="ignore"):
        return float(np.mean(np.exp(d) + np.exp(-d) - 2.0))


class _LpreObjective:
    """Frozen-link product relative error pieces for the Newton solver."""

    name = "lpre"

    @staticmethod
    def value(d):
        return _criterion_from_resid(d)

    @staticmethod
    def q_b(d, gp, jx):
        # Q = mean[(e^d - e^-d) g' J'X];  B = mean[(e^d + e^-d) g'^2 J'X X'J]
        ed, emd = np.exp(d), np.exp(-d)
        q = jx.T @ ((ed - emd) * gp) / d.size
        bw = (ed + emd) * gp * gp
        b = jx.T @ (jx * bw[:, np.newaxis]) / d.size
        return q, b


class _LsObjective:
    """Frozen-link least squares on logs (baseline with the same architecture)."""

    name = "ls"

    @staticmethod
    def value(d):
        return float(np.mean(d * d))

    @staticmethod
    def q_b(d, gp, jx):
        q = 2.0 * (jx.T @ (d * gp)) / d.size
        bw = 2.0 * gp * gp
        b = jx.T @ (jx * bw[:, np.newaxis]) / d.size
        return q, b


def estimating_fn(data: Dataset, coef: UnitIndexCoef, link: LinkFit) -> np.ndarray:
    """Estimating equation value for the reduced coefficient.

    Q = (1/n) sum{ Y exp(-g) - (1/Y) exp(g) } g' J'X_i, with the link values
    taken from ``link`` (which must be evaluated at the observations' own
    index values X'beta). Q is minus the gradient of the frozen-link
    criterion with respect to the reduced coefficient. Length p-1; empty
    when p = 1.
    """
    t = data.X @ coef.beta
    if not np.allclose(link.eval_points, t, atol=1e-8):
        raise ValueError("link must be evaluated at the index values X'beta")
    d = np.log(data.Y) - np.asarray(link.g_hat, dtype=float)
    jx = data.X @ jacobian(reduce(coef))
    q, _ = _LpreObjective.q_b(d, np.asarray(link.g_deriv_hat, dtype=float), jx)
    return q


def info_matrix(data: Dataset, coef: UnitIndexCoef, link: LinkFit) -> np.ndarray:
    """Positive-form information matrix of the frozen-link criterion.

    B = (1/n) sum{ Y exp(-g) + (1/Y) exp(g) } g'^2 J'X_i X_i'J, symmetric
    positive semidefinite by construction (a nonnegative mixture of outer
    products). The Newton update is +solve(B + ridge*I, Q), the descent
    direction.
    """
    t = data.X @ coef.beta
    if not np.allclose(link.eval_points, t, atol=1e-8):
        raise ValueError("link must be evaluated at the index values X'beta")
    d = np.log(data.Y) - np.asarray(link.g_hat, dtype=float)
    jx = data.X @ jacobian(reduce(coef))
    _, b = _LpreObjective.q_b(d, np.asarray(link.g_deriv_hat, dtype=float), jx)
    return b


@dataclass
class _InnerInfo:
    grad_norms: list
    criterion_values: list
    converged: bool


def lift_from(v, pivot, p):
    from .reparam import ReducedCoef

    return lift(ReducedCoef(beta_r=v, pivot=pivot, p=p))


def _newton_inner(X, w, m0, g0, gp0, init: UnitIndexCoef, cfg: FitConfig, objective):
    """Newton iterations with the link frozen at its current estimates.

    During the solve the link is replaced by its first-order expansion
    around the anchor index values m0:  L(m) = g0 + gp0 * (m - m0).  With
    that frozen model the estimating function is exactly minus the
    objective gradient, so backtracking on the objective and driving |Q|
    to tol_grad are the same thing. Steps leaving the unit ball are halved
    past; NoDescent carries the current iterate out when the line search
    exhausts its halvings.
    """
    pivot, p = init.pivot, init.p
    v = reduce(init).beta_r.copy()
    coef = init

    def at(vv):
        c = lift_from(vv, pivot, p)
        d = w - (g0 + gp0 * (X @ c.beta - m0))
        return c, d

    _, d = at(v)
    jx = X @ jacobian(reduce(coef))
    q, b = objective.q_b(d, gp0, jx)
    val = objective.value(d)
    grad_norms = [float(np.linalg.norm(q))]
    crit_values = [val]
    converged = grad_norms[-1] <= cfg.tol_grad

    for _ in range(cfg.max_inner):
        if converged:
            break
        try:
            step = np.linalg.solve(b + cfg.ridge * np.eye(p - 1), q)
        except np.linalg.LinAlgError as exc:
            raise SingularInformation(str(exc)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularInformation("non-finite Newton step")

        # allow a few ulps of slack: near the optimum the true decrease is
        # below the criterion's rounding quantum and a strict gate would
        # reject the final quadratic-convergence steps at random
        slack = 4.0 * np.finfo(float).eps * max(1.0, abs(val))
        s = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks + 1):
            v_try = v + s * step
            if np.linalg.norm(v_try) < 1.0 - 1e-12:
                coef_try, d_try = at(v_try)
                val_try = objective.value(d_try)
                if np.isfinite(val_try) and val_try <= val + slack:
                    accepted = True
                    break
            s *= cfg.backtrack_factor
        if not accepted:
            raise NoDescent(coef, grad_norms[-1])

        v, coef, d, val = v_try, coef_try, d_try, val_try
        jx = X @ jacobian(reduce(coef))
        q, b = objective.q_b(d, gp0, jx)
        grad_norms.append(float(np.linalg.norm(q)))
        crit_values.append(val)
        converged = grad_norms[-1] <= cfg.tol_grad

    return coef, _InnerInfo(grad_norms, crit_values, converged)


def newton_solve(
    data: Dataset, init: UnitIndexCoef, link: LinkFit, cfg: FitConfig | None = None
) -> UnitIndexCoef:
    """Solve the estimating equation with the link frozen at ``link``.

    ``link`` must be evaluated at the observations' index values X'init;
    its values and slopes anchor the frozen first-order link model for the
    whole solve. Returns the lifted coefficient once |Q| <= tol_grad or
    the iteration cap is reached; each accepted step does not increase the
    frozen-link criterion.
    """
    cfg = cfg or FitConfig()
    if data.p == 1:
        return init
    t = data.X @ init.beta
    if not np.allclose(link.eval_points, t, atol=1e-8):
        raise ValueError("link must be evaluated at the index values X'init")
    w = np.log(data.Y)
    coef, _ = _newton_inner(
        data.X,
        w,
        np.asarray(link.eval_points, dtype=float),
        np.asarray(link.g_hat, dtype=float),
        np.asarray(link.g_deriv_hat, dtype=float),
        init,
        cfg,
        _LpreObjective,
    )
    return coef


def _repivot(coef: UnitIndexCoef) -> UnitIndexCoef:
    """Re-select the pivot when its entry became small (between outer steps)."""
    if coef.beta[coef.pivot] >= REPIVOT_THRESHOLD:
        return coef
    return UnitIndexCoef.from_vector(coef.beta)


def _feasible_grid(grid, t, wc, n, kernel):
    """Drop candidates whose induced link bandwidth (h_opt * n^(-2/15)) is
    degenerate at some training point; the undersmoothing rule would
    otherwise select a window that cannot cover isolated index values."""
    from ._backend import kernels as _kern

    shrink = float(n) ** (-2.0 / 15.0)
    keep = []
    for h in np.asarray(grid, dtype=float):
        _, _, ok = _kern.ll_fit_diag(t, wc, h * shrink, kernel.code)
        if ok.all():
            keep.append(h)
    return np.asarray(keep) if keep else np.asarray(grid, dtype=float)


#: bandwidth inflation step used when a frozen bandwidth is singular at some
#: training point of the current index configuration
_INFLATE = 1.3
_MAX_INFLATE = 40


def _self_tables(X, beta, wc, bw, kernel, messages):
    """Link value and slope estimates at the observations' own index values.

    The frozen bandwidths can become singular at an isolated extreme index
    value after the coefficient rotates; the affected bandwidth is then
    inflated by the smallest power of 1.3 that restores a usable local
    design (recorded in messages).
    """
    from ._backend import kernels as _kern

    t = np.ascontiguousarray(X @ beta)
    g = gp = None
    for j in range(_MAX_INFLATE + 1):
        g, ok = _kern.ll_eval(t, wc, t, bw.h * _INFLATE**j, kernel.code)
        if ok.all():
            if j:
                messages.append(f"link bandwidth inflated x{_INFLATE**j:.3g}")
            break
    else:
        raise DegenerateDesign(float(t[np.flatnonzero(~ok)[0]]), detail="link bandwidth")
    for j in range(_MAX_INFLATE + 1):
        gp, ok = _kern.ll_deriv(t, wc, t, bw.h1 * _INFLATE**j, kernel.code)
        if ok.all():
            if j:
                messages.append(f"slope bandwidth inflated x{_INFLATE**j:.3g}")
            break
    else:
        raise DegenerateDesign(float(t[np.flatnonzero(~ok)[0]]), detail="slope bandwidth")
    return t, g, gp


def _two_stage(data: Dataset, init, cfg: FitConfig, objective) -> FitResult:
    w = np.log(data.Y)
    wbar = float(w.mean())
    wc = w - wbar
    n, p = data.n, data.p

    if init == "auto":
        coef = initial_beta(data)
    elif isinstance(init, UnitIndexCoef):
        coef = init
    else:
        coef = UnitIndexCoef.from_vector(np.asarray(init, dtype=float))

    messages = []
    t0 = np.ascontiguousarray(data.X @ coef.beta)
    grid = cfg.gcv_grid
    if grid is None:
        grid = default_gcv_grid(t0, cfg.gcv_grid_size)
        grid = _feasible_grid(grid, t0, wc, n, cfg.kernel)
    h_opt = gcv_bandwidth(t0, wc, cfg.kernel, grid)
    bw = bandwidth_rule(h_opt, n)

    if p == 1:
        beta_hat = UnitIndexCoef(beta=np.array([1.0]), pivot=0)
        return _finalize(data, wc, wbar, beta_hat, bw, cfg, objective, 0, [], [], True, messages)

    beta_t = coef
    inner_trace = []
    crit_trace = []
    outer_iters = 0
    converged_outer = False
    inner_converged = False

    for _ in range(cfg.max_outer):
        try:
            t, g, gp = _self_tables(data.X, beta_t.beta, wc, bw, cfg.kernel, messages)
            beta_new, info = _newton_inner(data.X, wc, t, g, gp, beta_t, cfg, objective)
            inner_trace.append(info.grad_norms)
            crit_trace.append(info.criterion_values)
            inner_converged = info.converged
        except NoDescent as exc:
            beta_new = exc.coef
            messages.append(str(exc))
            inner_converged = False
        except (DegenerateDesign, SingularInformation) as exc:
            messages.append(f"outer iteration {outer_iters + 1} aborted: {exc}")
            break
        outer_iters += 1
        delta = float(np.linalg.norm(beta_new.beta - beta_t.beta))
        beta_t = _repivot(beta_new)
        if delta <= cfg.tol_beta:
            converged_outer = True
            break

    converged = converged_outer and inner_converged
    if not converged_outer:
        messages.append(f"outer loop stopped after {outer_iters} iterations")
    return _finalize(
        data, wc, wbar, beta_t, bw, cfg, objective, outer_iters, inner_trace, crit_trace, converged, messages
    )


def _finalize(
    data, wc, wbar, beta_hat, bw, cfg, objective, outer_iters, inner_trace, crit_trace, converged, messages
):
    t_hat, g_c, gp_c = _self_tables(data.X, beta_hat.beta, wc, bw, cfg.kernel, messages)
    link = LinkFit(
        eval_points=t_hat,
        g_hat=g_c + wbar,
        g_deriv_hat=gp_c,
        bandwidths=bw,
        kernel=cfg.kernel,
    )
    return FitResult(
        beta_hat=beta_hat,
        link=link,
        criterion_value=objective.value(wc - g_c),
        outer_iters=outer_iters,
        inner_trace=inner_trace,
        converged=converged,
        bandwidths=bw,
        estimator=objective.name,
        criterion_trace=crit_trace,
        messages=messages,
        train_index=t_hat,
        logy_center=wbar,
        logy_centered=wc,
    )


def two_stage_fit(data: Dataset, init="auto", cfg: FitConfig | None = None) -> FitResult:
    """Fit the multiplicative single index model by product relative error.

    Alternates link estimation at the current coefficient with a frozen-link
    Newton solve until the coefficient stops moving. The GCV bandwidth is
    selected once at the initial coefficient and frozen. Non-convergence is
    reported through ``converged=False`` with diagnostics in ``messages``
    rather than an exception.
    """
    return _two_stage(data, init, cfg or FitConfig(), _LpreObjective)


def ls_fit(data: Dataset, init="auto", cfg: FitConfig | None = None) -> FitResult:
    """Least squares on logs with the same two-stage architecture."""
    return _two_stage(data, init, cfg or FitConfig(), _LsObjective)


def _linear_lpre_newton(X, Y, b0=None, max_iter=200):
    """Damped Newton on the convex linear product-relative-error criterion.

    C(b) = mean{ Y exp(-X'b) + (1/Y) exp(X'b) - 2 }; its Hessian is a
    nonnegative mixture of covariate outer products, so any stationary
    point is the global minimum.
    """
    n, p = X.shape
    b = np.zeros(p) if b0 is None else np.asarray(b0, dtype=float).copy()

    def pieces(bvec):
        m = X @ bvec
        with np.errstate(over="ignore"):
            a1 = Y * np.exp(-m)
            a2 = np.exp(m) / Y
            val = float(np.mean(a1 + a2) - 2.0)
        return val, a1, a2

    val, a1, a2 = pieces(b)
    if not np.isfinite(val):
        raise SingularInformation("linear criterion not finite at the start")
    for _ in range(max_iter):
        grad = (X.T @ (a2 - a1)) / n
        scale = float(np.mean(a1 + a2))
        if np.linalg.norm(grad, np.inf) <= 1e-11 * max(1.0, scale):
            break
        hess = X.T @ (X * ((a1 + a2) / n)[:, np.newaxis])
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + 1e-8 * scale * np.eye(p), -grad)
        if not np.all(np.isfinite(step)):
            raise SingularInformation("non-finite step in the linear fit")
        s = 1.0
        for _ in range(60):
            val_try, a1_try, a2_try = pieces(b + s * step)
            if np.isfinite(val_try) and val_try <= val:
                break
            s *= 0.5
        else:
            break  # no improving step: already at the float optimum
        if np.linalg.norm(s * step, np.inf) <= 1e-14 * (1.0 + np.linalg.norm(b, np.inf)):
            b = b + s * step
            break
        b = b + s * step
        val, a1, a2 = val_try, a1_try, a2_try
    return b


def linear_lpre_fit(data: Dataset) -> np.ndarray:
    """Global minimizer of the linear product-relative-error criterion.

    The linear predictor replaces the link: minimize over b (unnormalized)
    mean{ Y exp(-X'b) + (1/Y) exp(X'b) - 2 }. Used as the parametric
    baseline estimator.
    """
    return _linear_lpre_newton(data.X, data.Y)


def _check_full_rank(X):
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        raise DegenerateCovariates(int(piv[rank]))


def initial_beta(data: Dataset) -> UnitIndexCoef:
    """Initial unit-norm direction from the convex linear fit.

    The responses are scaled by their geometric mean first (the smoother's
    intercept absorbs the response level later, and the raw linear criterion
    would otherwise tilt the direction by that level and break invariance
    under rescaling of Y). Falls back to least squares of centered log Y on
    centered X if the convex solve fails.

    Raises
    ------
    DegenerateCovariates
        When X is numerically rank deficient (names the offending column).
    """
    _check_full_rank(data.X)
    w = np.log(data.Y)
    y_scaled = np.exp(w - w.mean())
    try:
        b = _linear_lpre_newton(data.X, y_scaled)
    except SingularInformation:
        b = None
    if b is None or np.linalg.norm(b) < 1e-12:
        xc = data.X - data.X.mean(axis=0)
        b, *_ = np.linalg.lstsq(xc, w - w.mean(), rcond=None)
    if np.linalg.norm(b) < 1e-12:
        b = np.zeros(data.p)
        b[0] = 1.0
    return UnitIndexCoef.from_vector(b)


def predict(fit: FitResult, x_new):
    """Predict the response at new covariates: exp of the link at x'beta.

    A single p-vector returns ``(y_hat, extrapolated)``; an m x p matrix
    returns arrays. ``extrapolated`` marks index values outside the training
    range or clamped to the nearest training index value because the local
    design there was degenerate.
    """
    if fit.train_index is None or fit.logy_centered is None:
        raise ValueError("fit does not carry its training data")
    x = np.asarray(x_new, dtype=float)
    single = x.ndim == 1
    xmat = x[np.newaxis, :] if single else x
    if xmat.shape[1] != fit.beta_hat.p:
        raise ValueError("x_new has the wrong number of covariates")
    z = xmat @ fit.beta_hat.beta
    link = SmootherLink(fit.train_index, fit.logy_centered, fit.bandwidths, fit.link.kernel)
    g_c, extrapolated = link.values_clamped(z)
    y_hat = np.exp(g_c + fit.logy_center)
    if single:
        return float(y_hat[0]), bool(extrapolated[0])
    return y_hat, extrapolated
