"""Monte Carlo benchmarking of the index estimators.

Data generator: X rows are standard multivariate normal and

    Y = exp{ sin(2 X'b0) + 2 exp(X'b0) } * eps

with positive multiplicative errors from one of three laws, each of which
satisfies the moment condition E(eps - 1/eps) = 0:

  lognormal   log(eps) ~ N(0, 1)
  loguniform  log(eps) ~ U(-2, 2)
  gig         density proportional to exp(-x - 1/x)/x on x > 0, the
              generalized inverse Gaussian law GIG(0, 2, 2), under which
              the product-relative-error estimator is efficient

A fourth law, ``constant`` (eps = 1), is a noiseless diagnostic hook.
Replicates derive their seeds by counter, so reports are reproducible and
independent of worker count.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import mix_seed
from .errors import AbortedRun, LpresimError, SamplerFault
from .fit import Dataset, FitConfig, linear_lpre_fit, ls_fit, two_stage_fit
from .reparam import UnitIndexCoef


class ErrorLaw(enum.Enum):
    LOGNORMAL = "lognormal"
    LOGUNIFORM = "loguniform"
    GIG = "gig"
    CONSTANT = "constant"  # eps = 1, diagnostic only

    @classmethod
    def from_name(cls, name: str) -> "ErrorLaw":
        return cls(name.strip().lower())


#: the three laws that satisfy E(eps - 1/eps) = 0 and appear in reports
REPORTED_LAWS = (ErrorLaw.LOGNORMAL, ErrorLaw.LOGUNIFORM, ErrorLaw.GIG)

# Rejection sampler for the gig law. In log coordinates z = log(x) the
# target density is proportional to exp(-2 cosh z), sampled under a
# N(0, 0.6^2) proposal. The log envelope constant is the numerically
# computed supremum of z^2/(2*0.6^2) - 2 cosh z, which is -1.57755 attained
# at |z| = 1.4496; -1.5775 is a valid (slightly loose) bound. Acceptance
# rate is about 0.73.
_GIG_SIGMA = 0.6
_GIG_LOG_ENV = -1.5775
_GIG_MAX_ATTEMPTS = 1_000_000


def sample_gig(rng: np.random.Generator, size: int | None = None):
    """Exact draws from the density c*exp(-x - 1/x)/x on x > 0."""
    scalar = size is None
    want = 1 if scalar else int(size)
    out = np.empty(want)
    filled = 0
    attempts = 0
    while filled < want:
        m = max(64, 2 * (want - filled))
        z = rng.normal(0.0, _GIG_SIGMA, m)
        u = rng.random(m)
        logratio = z * z / (2.0 * _GIG_SIGMA**2) - 2.0 * np.cosh(z) - _GIG_LOG_ENV
        take = z[np.log(u) <= logratio]
        k = min(take.size, want - filled)
        out[filled : filled + k] = np.exp(take[:k])
        filled += k
        attempts += m
        if attempts > _GIG_MAX_ATTEMPTS * want:
            raise SamplerFault("gig rejection sampler exceeded its attempt cap")
    return float(out[0]) if scalar else out


def sample_error(law: ErrorLaw, rng: np.random.Generator, size: int | None = None):
    """Draw multiplicative errors from the given law."""
    if law is ErrorLaw.LOGNORMAL:
        draws = np.exp(rng.standard_normal(size if size is not None else ()))
    elif law is ErrorLaw.LOGUNIFORM:
        draws = np.exp(rng.uniform(-2.0, 2.0, size))
    elif law is ErrorLaw.GIG:
        return sample_gig(rng, size)
    elif law is ErrorLaw.CONSTANT:
        draws = np.ones(size if size is not None else ())
    else:  # pragma: no cover
        raise ValueError(f"unknown error law {law!r}")
    return float(draws) if size is None else draws


def true_link(u):
    """Link function of the simulation design: sin(2u) + 2 exp(u)."""
    u = np.asarray(u, dtype=float)
    return np.sin(2.0 * u) + 2.0 * np.exp(u)


DEFAULT_BETA0 = UnitIndexCoef(beta=np.array([1.0, -1.0, 1.0]) / np.sqrt(3.0), pivot=0)


def gen_data(n: int, beta0: UnitIndexCoef, law: ErrorLaw, seed: int) -> Dataset:
    """Generate one dataset from the simulation design, deterministically.

    Draw order is fixed: the n x p covariate block first, then the n errors.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, beta0.p))
    eps = sample_error(law, rng, n)
    y = np.exp(true_link(x @ beta0.beta)) * eps
    return Dataset(X=x, Y=y)


def _coef_array(b):
    return b.beta if isinstance(b, UnitIndexCoef) else np.asarray(b, dtype=float)


def metric_ee(beta_hat, beta0) -> float:
    """Estimation error sqrt(|1 - beta_hat' beta0|)."""
    bh, b0 = _coef_array(beta_hat), _coef_array(beta0)
    return float(np.sqrt(abs(1.0 - bh @ b0)))


def metric_mse(beta_hat, beta0) -> float:
    """Squared Euclidean error (beta_hat - beta0)'(beta_hat - beta0)."""
    diff = _coef_array(beta_hat) - _coef_array(beta0)
    return float(diff @ diff)


def metric_ase(g_true_at_index, g_hat_at_index) -> float:
    """Mean squared link error along the fitted index.

    The two vectors are evaluated at different index arguments by design:
    the truth at X'beta0, the estimate at X'beta_hat, observation by
    observation.
    """
    gt = np.asarray(g_true_at_index, dtype=float)
    gh = np.asarray(g_hat_at_index, dtype=float)
    if gt.shape != gh.shape:
        raise ValueError("vectors must have equal length")
    return float(np.mean((gt - gh) ** 2))


ESTIMATORS = ("lpre", "ls", "linear")


@dataclass(frozen=True)
class SimConfig:
    """Settings for one simulation study (one or more error laws)."""

    n: int
    reps: int
    beta0: UnitIndexCoef = DEFAULT_BETA0
    error: tuple = (ErrorLaw.LOGNORMAL,)
    estimators: tuple = ESTIMATORS
    seed: int = 0
    fit_cfg: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        laws = self.error
        if isinstance(laws, ErrorLaw):
            laws = (laws,)
        object.__setattr__(self, "error", tuple(laws))
        ests = tuple(e.lower() for e in self.estimators)
        for e in ests:
            if e not in ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}")
        object.__setattr__(self, "estimators", ests)
        if self.n < 20:
            raise ValueError("need n >= 20")
        if self.reps < 1:
            raise ValueError("need reps >= 1")


@dataclass
class CellReport:
    """Aggregates for one (estimator, error law) cell plus raw replicates."""

    estimator: str
    law: ErrorLaw
    reps: int
    n_failed: int
    bias: np.ndarray
    se: np.ndarray
    rmse: np.ndarray
    se_defined: bool
    ee_mean: float
    mse_mean: float
    ase_mean: float | None
    raw_beta_err: np.ndarray
    raw_ee: np.ndarray
    raw_mse: np.ndarray
    raw_ase: np.ndarray | None
    rep_ids: np.ndarray


@dataclass
class SimReport:
    """All cells of a simulation study, keyed by (estimator, law)."""

    config: SimConfig
    cells: list

    def cell(self, estimator: str, law: ErrorLaw) -> CellReport:
        for c in self.cells:
            if c.estimator == estimator and c.law is law:
                return c
        raise KeyError((estimator, law))


def _fit_one(estimator, data, beta0, fit_cfg):
    """Fit one estimator; returns (beta_for_metrics, ase) or None on failure."""
    b0 = beta0.beta
    try:
        if estimator == "linear":
            b = linear_lpre_fit(data)
            if b @ b0 < 0:
                b = -b
            return b, None
        fitfun = two_stage_fit if estimator == "lpre" else ls_fit
        res = fitfun(data, cfg=fit_cfg)
        if not res.converged:
            return None
        bh = res.beta_hat.beta
        if bh @ b0 < 0:
            bh = -bh
        ase = metric_ase(true_link(data.X @ b0), res.link.g_hat)
        return bh, ase
    except (LpresimError, np.linalg.LinAlgError):
        return None


def _sim_one_rep(args):
    law_idx, rep, cfg = args
    law = cfg.error[law_idx]
    seed_r = mix_seed(mix_seed(cfg.seed, law_idx), rep)
    data = gen_data(cfg.n, cfg.beta0, law, seed_r)
    out = {}
    for est in cfg.estimators:
        out[est] = _fit_one(est, data, cfg.beta0, cfg.fit_cfg)
    return law_idx, rep, out


def run_simulation(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Run the replication study and aggregate per-cell metrics.

    Per replicate and estimator: the fitted coefficient is sign-aligned to
    beta0 (flipped when their inner product is negative) before any metric;
    the linear baseline enters unnormalized, exactly as its criterion
    returns it, and has no link error. Failed or non-converged fits are
    excluded and counted. Aggregates are bias = mean error, se = sample
    standard deviation (0 with ``se_defined=False`` when only one replicate
    survives) and rmse = sqrt(bias^2 + se^2), componentwise.

    Raises
    ------
    AbortedRun
        If more than 20% of fits fail in any cell.
    """
    tasks = [
        (law_idx, rep, cfg)
        for law_idx in range(len(cfg.error))
        for rep in range(cfg.reps)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(_sim_one_rep, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
            )
    else:
        results = [_sim_one_rep(t) for t in tasks]

    by_key = {(law_idx, rep): out for law_idx, rep, out in results}
    b0 = cfg.beta0.beta
    cells = []
    for law_idx, law in enumerate(cfg.error):
        for est in cfg.estimators:
            errs, ees, mses, ases, kept = [], [], [], [], []
            for rep in range(cfg.reps):
                fit = by_key[(law_idx, rep)][est]
                if fit is None:
                    continue
                bh, ase = fit
                errs.append(bh - b0)
                ees.append(metric_ee(bh, b0))
                mses.append(metric_mse(bh, b0))
                if ase is not None:
                    ases.append(ase)
                kept.append(rep)
            n_failed = cfg.reps - len(kept)
            if n_failed > 0.2 * cfg.reps:
                raise AbortedRun(est, law.value, n_failed, cfg.reps)
            err_mat = np.asarray(errs)
            bias = err_mat.mean(axis=0)
            se_defined = err_mat.shape[0] >= 2
            se = err_mat.std(axis=0, ddof=1) if se_defined else np.zeros_like(bias)
            cells.append(
                CellReport(
                    estimator=est,
                    law=law,
                    reps=cfg.reps,
                    n_failed=n_failed,
                    bias=bias,
                    se=se,
                    rmse=np.sqrt(bias**2 + se**2),
                    se_defined=se_defined,
                    ee_mean=float(np.mean(ees)),
                    mse_mean=float(np.mean(mses)),
                    ase_mean=float(np.mean(ases)) if ases else None,
                    raw_beta_err=err_mat,
                    raw_ee=np.asarray(ees),
                    raw_mse=np.asarray(mses),
                    raw_ase=np.asarray(ases) if ases else None,
                    rep_ids=np.asarray(kept, dtype=int),
                )
            )
    return SimReport(config=cfg, cells=cells)


def error_moment_diagnostic(law: ErrorLaw, n_draws: int = 100_000, seed: int = 0):
    """Empirical check of E(eps - 1/eps) = 0 for one law.

    Returns (mean, bound) where bound = 4 * sd / sqrt(N); the moment
    condition holds when |mean| <= bound.
    """
    rng = np.random.default_rng(seed)
    eps = sample_error(law, rng, n_draws)
    v = eps - 1.0 / eps
    return float(v.mean()), float(4.0 * v.std(ddof=1) / np.sqrt(n_draws))
