"""Local linear estimation of a regression link and its derivative.

Fits a kernel-weighted straight line around each evaluation point: the
intercept estimates the link g, the slope estimates g'. Includes GCV
bandwidth selection and the two-bandwidth rule used by the index fitter
(the link is undersmoothed relative to the GCV-optimal bandwidth while the
derivative keeps it).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels as _kern
from .errors import DegenerateDesign, NoValidBandwidth

_SQRT_2PI = np.sqrt(2.0 * np.pi)

#: relative guard on the 2x2 denominator S0*S2 - S1^2 (scale-aware)
DEGEN_RTOL = 1e-12

#: candidates whose GCV values differ by less than this are treated as ties
GCV_TIE_TOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric probability-density kernel used for local weighting.

    ``family`` is 'epanechnikov' (compact support, the default) or
    'gaussian'. ``code`` is the integer tag understood by the compiled
    kernels.
    """

    family: str

    _CODES = {"epanechnikov": 0, "gaussian": 1}

    def __post_init__(self):
        if self.family not in self._CODES:
            raise ValueError(f"unknown kernel family {self.family!r}")

    @property
    def code(self) -> int:
        return self._CODES[self.family]

    def k(self, u):
        """Evaluate K(u) elementwise."""
        u = np.asarray(u, dtype=float)
        if self.family == "epanechnikov":
            return 0.75 * np.maximum(0.0, 1.0 - u * u)
        return np.exp(-0.5 * u * u) / _SQRT_2PI


EPANECHNIKOV = KernelSpec("epanechnikov")
GAUSSIAN = KernelSpec("gaussian")


def kernel_from_name(name: str) -> KernelSpec:
    return KernelSpec(name.strip().lower())


@dataclass(frozen=True)
class Bandwidths:
    """Link bandwidth h, derivative bandwidth h1, and the GCV optimum h_opt."""

    h_opt: float
    h: float
    h1: float

    def __post_init__(self):
        for name in ("h_opt", "h", "h1"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"bandwidth {name}={v!r} must be positive finite")


@dataclass(frozen=True)
class LinkFit:
    """Link and derivative estimates evaluated on a fixed grid of points."""

    eval_points: np.ndarray
    g_hat: np.ndarray
    g_deriv_hat: np.ndarray
    bandwidths: Bandwidths
    kernel: KernelSpec

    def __post_init__(self):
        if not (len(self.eval_points) == len(self.g_hat) == len(self.g_deriv_hat)):
            raise ValueError("eval_points, g_hat, g_deriv_hat must share a length")


def moment_sums(z: float, index_values, h: float, kernel: KernelSpec):
    """Local kernel moments S_r = mean((t_i - z)^r K_h(t_i - z)), r = 0, 1, 2.

    K_h(v) = K(v/h)/h. Sums may be zero for empty windows; degeneracy is the
    caller's concern.
    """
    t = np.asarray(index_values, dtype=float)
    if t.size == 0:
        raise ValueError("index_values must be nonempty")
    if h <= 0:
        raise ValueError("h must be positive")
    u = t - z
    k = kernel.k(u / h) / h
    ku = k * u
    return k.mean(), ku.mean(), (ku * u).mean()


def _weights_at(z, t, h, kernel, slope=False):
    """Intercept or slope weight vector of the local linear fit at z."""
    n = t.shape[0]
    u = t - z
    k = kernel.k(u / h) / h
    s0 = k.mean()
    ku = k * u
    s1 = ku.mean()
    s2 = (ku * u).mean()
    den = s0 * s2 - s1 * s1
    if den <= DEGEN_RTOL * (1.0 + s0 * s2):
        raise DegenerateDesign(z)
    if slope:
        return k * (u * s0 - s1) / (n * den)
    return k * (s2 - u * s1) / (n * den)


def local_linear_at(z: float, index_values, logy, h: float, kernel: KernelSpec):
    """Link estimate at a single point.

    Returns ``(g_hat, weights)`` where ``g_hat = weights @ logy`` is the
    intercept of the kernel-weighted least-squares line of logy on
    ``index_values - z``. Weights sum to one at any non-degenerate point.

    Raises
    ------
    DegenerateDesign
        If the local 2x2 normal-equations system is numerically singular
        (no usable data in the window around z).
    """
    t = np.asarray(index_values, dtype=float)
    y = np.asarray(logy, dtype=float)
    if t.shape != y.shape:
        raise ValueError("index_values and logy must have equal length")
    if h <= 0:
        raise ValueError("h must be positive")
    w = _weights_at(z, t, h, kernel)
    return float(w @ y), w


def local_linear_deriv_at(z: float, index_values, logy, h1: float, kernel: KernelSpec):
    """Link-derivative estimate at a single point: the slope of the local
    weighted least-squares line, computed at bandwidth h1."""
    t = np.asarray(index_values, dtype=float)
    y = np.asarray(logy, dtype=float)
    if t.shape != y.shape:
        raise ValueError("index_values and logy must have equal length")
    if h1 <= 0:
        raise ValueError("h1 must be positive")
    w = _weights_at(z, t, h1, kernel, slope=True)
    return float(w @ y)


def gcv_bandwidth(index_values, logy, kernel: KernelSpec, grid) -> float:
    """Pick a bandwidth from a candidate grid by generalized cross-validation.

    GCV(h) = mean((logy - fitted_h)^2) / (1 - trace(S_h)/n)^2 where S_h is
    the smoother matrix over the training points. Candidates with any
    degenerate evaluation or trace(S_h) >= n are skipped; among candidates
    within ``GCV_TIE_TOL`` of the minimum the largest h wins (smoother fit,
    deterministic).

    Raises
    ------
    NoValidBandwidth
        If every candidate is skipped.
    """
    t = np.ascontiguousarray(index_values, dtype=float)
    y = np.ascontiguousarray(logy, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("grid must be nonempty with positive entries")
    n = t.shape[0]
    if n < 5:
        raise ValueError("need at least 5 observations for GCV")

    best_h = None
    best_score = np.inf
    for h in np.sort(grid):
        fitted, selfw, ok = _kern.ll_fit_diag(t, y, float(h), kernel.code)
        if not ok.all():
            continue
        trace = selfw.sum()
        if trace >= n:
            continue
        rss = np.mean((y - fitted) ** 2)
        score = rss / (1.0 - trace / n) ** 2
        # ">= best - tol" prefers the larger h among ties (grid is ascending)
        if score < best_score - GCV_TIE_TOL or (
            best_h is not None and score <= best_score + GCV_TIE_TOL
        ):
            best_score = min(best_score, score)
            best_h = float(h)
    if best_h is None:
        raise NoValidBandwidth(f"all {grid.size} candidates skipped")
    return best_h


def bandwidth_rule(h_opt: float, n: int) -> Bandwidths:
    """Two-bandwidth rule: undersmooth the link, keep h_opt for the slope.

    h = h_opt * n**(-2/15) and h1 = h_opt.
    """
    if h_opt <= 0:
        raise ValueError("h_opt must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    return Bandwidths(h_opt=h_opt, h=h_opt * float(n) ** (-2.0 / 15.0), h1=h_opt)


def default_gcv_grid(index_values, n_grid: int = 20) -> np.ndarray:
    """Log-spaced candidate bandwidths from 0.1*sd(t)*n^(-1/5) to 2*range(t)."""
    t = np.asarray(index_values, dtype=float)
    n = t.shape[0]
    sd = t.std()
    rng_t = t.max() - t.min()
    lo = 0.1 * sd * n ** (-0.2)
    hi = 2.0 * rng_t
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0 or hi <= lo:
        raise NoValidBandwidth("index values too degenerate to build a grid")
    return np.geomspace(lo, hi, n_grid)


def fit_link(index_values, logy, eval_points, bw: Bandwidths, kernel: KernelSpec) -> LinkFit:
    """Evaluate the link (bandwidth h) and its derivative (bandwidth h1).

    Raises
    ------
    DegenerateDesign
        Identifying the first evaluation point with a singular local design.
    """
    t = np.ascontiguousarray(index_values, dtype=float)
    y = np.ascontiguousarray(logy, dtype=float)
    z = np.ascontiguousarray(eval_points, dtype=float)
    if t.shape != y.shape:
        raise ValueError("index_values and logy must have equal length")
    g, gp, ok = _kern.ll_both(t, y, z, bw.h, bw.h1, kernel.code)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise DegenerateDesign(float(z[bad]), detail=f"eval point #{bad}")
    return LinkFit(eval_points=z, g_hat=g, g_deriv_hat=gp, bandwidths=bw, kernel=kernel)


@dataclass(frozen=True)
class SmootherLink:
    """A trained local linear smoother, evaluable at arbitrary points.

    Freezes the training pairs (index value, log response) and bandwidths;
    the two-stage fitter re-evaluates it at trial index values during the
    Newton iterations.
    """

    train_index: np.ndarray
    logy: np.ndarray
    bw: Bandwidths
    kernel: KernelSpec
    _t: np.ndarray = field(init=False, repr=False)
    _y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_t", np.ascontiguousarray(self.train_index, dtype=float)
        )
        object.__setattr__(self, "_y", np.ascontiguousarray(self.logy, dtype=float))
        if self._t.shape != self._y.shape:
            raise ValueError("train_index and logy must have equal length")

    def values(self, z):
        """Link values at z; returns (g, ok) without raising on degeneracy."""
        z = np.ascontiguousarray(z, dtype=float)
        return _kern.ll_eval(self._t, self._y, z, self.bw.h, self.kernel.code)

    def values_and_derivs(self, z):
        """Link values (bandwidth h) and slopes (bandwidth h1) at z."""
        z = np.ascontiguousarray(z, dtype=float)
        return _kern.ll_both(
            self._t, self._y, z, self.bw.h, self.bw.h1, self.kernel.code
        )

    def values_clamped(self, z):
        """Link values with degenerate points clamped to the nearest
        training index value; returns (g, extrapolated).

        ``extrapolated`` marks points outside the training range or points
        that required clamping. Used for prediction, where an answer is
        always owed.
        """
        z = np.ascontiguousarray(z, dtype=float)
        g, ok = self.values(z)
        lo, hi = self._t.min(), self._t.max()
        extrapolated = (z < lo) | (z > hi)
        if not ok.all():
            bad = np.flatnonzero(~ok)
            # nearest training index value for each degenerate point
            nearest = self._t[
                np.abs(self._t[np.newaxis, :] - z[bad, np.newaxis]).argmin(axis=1)
            ]
            g_fix, ok_fix = self.values(nearest)
            if not ok_fix.all():
                still = int(np.flatnonzero(~ok_fix)[0])
                raise DegenerateDesign(
                    float(nearest[still]), detail="degenerate even at a training point"
                )
            g = g.copy()
            g[bad] = g_fix
            extrapolated = extrapolated.copy()
            extrapolated[bad] = True
        return g, extrapolated

    def to_link_fit(self, z) -> LinkFit:
        """Strict evaluation at z as a LinkFit (raises on degeneracy)."""
        return fit_link(self._t, self._y, z, self.bw, self.kernel)

