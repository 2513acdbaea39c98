"""CSV ingestion, the applied train/test pipeline, and fit artifacts.

The applied pipeline mirrors a standard regression workflow on positive
responses: drop listed cases, split the remaining rows in file order into
a training and a test block, optionally standardize covariates on the
training split, fit one estimator, attach bootstrap standard errors and
p-values, and score held-out predictions with four median-based metrics.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ConfigError, DegenerateCovariates, NonPositiveResponse, ParseError
from .fit import Dataset, FitConfig, FitResult, ls_fit, predict, two_stage_fit
from .inference import DEFAULT_B, BootstrapReport, bootstrap_se, p_value
from .reparam import UnitIndexCoef
from .smoother import Bandwidths, LinkFit, kernel_from_name

FIT_SCHEMA = "lpresim-fit-v1"


@dataclass(frozen=True)
class PredictionMetrics:
    """Median-based test-set prediction errors (all nonnegative).

    mpe:  median |Y - Yhat|
    mppe: median |Y - Yhat|^2 / (Y * Yhat)
    mape: median (|Y - Yhat|/Y + |Y - Yhat|/Yhat)
    mspe: median (Y - Yhat)^2

    Medians follow numpy's convention: the average of the two middle order
    statistics for even-length test sets.
    """

    mpe: float
    mppe: float
    mape: float
    mspe: float


def prediction_metrics(Y_test, Y_hat) -> PredictionMetrics:
    y = np.asarray(Y_test, dtype=float)
    yh = np.asarray(Y_hat, dtype=float)
    if y.shape != yh.shape or y.size < 1:
        raise ValueError("Y_test and Y_hat must be equal-length, nonempty")
    if np.any(y <= 0) or np.any(yh <= 0):
        raise ValueError("prediction metrics need positive Y and Y_hat")
    ad = np.abs(y - yh)
    return PredictionMetrics(
        mpe=float(np.median(ad)),
        mppe=float(np.median(ad**2 / (y * yh))),
        mape=float(np.median(ad / y + ad / yh)),
        mspe=float(np.median(ad**2)),
    )


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(None, "<header>", "empty file") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def load_table(path, response_col, covariate_cols=None, drop_rows=()):
    """Read a CSV into a Dataset plus the covariate column names.

    Data rows are numbered from 1 in file order; ``drop_rows`` are removed
    before any validation (a dropped row may hold the zero response that
    motivated dropping it). Covariates default to every non-response column
    in file order.
    """
    header, rows = _read_table(path)
    if response_col not in header:
        raise ParseError(None, response_col, "missing column")
    if covariate_cols is None:
        covariate_cols = [h for h in header if h != response_col]
    for c in covariate_cols:
        if c not in header:
            raise ParseError(None, c, "missing column")
    ridx = header.index(response_col)
    cidx = [header.index(c) for c in covariate_cols]
    dropped = {int(r) for r in drop_rows}

    xs, ys = [], []
    for i, row in enumerate(rows, start=1):
        if i in dropped:
            continue
        if len(row) != len(header):
            raise ParseError(i, "<row>", f"expected {len(header)} fields, got {len(row)}")
        xrow = []
        for j, name in zip(cidx, covariate_cols):
            try:
                v = float(row[j])
            except ValueError:
                raise ParseError(i, name, repr(row[j])) from None
            if not math.isfinite(v):
                raise ParseError(i, name, "non-finite value")
            xrow.append(v)
        try:
            yv = float(row[ridx])
        except ValueError:
            raise ParseError(i, response_col, repr(row[ridx])) from None
        if not math.isfinite(yv) or yv <= 0:
            raise NonPositiveResponse(i, yv)
        xs.append(xrow)
        ys.append(yv)
    return Dataset(X=np.asarray(xs), Y=np.asarray(ys)), list(covariate_cols)


def load_csv(path, response_col, covariate_cols=None, drop_rows=()) -> Dataset:
    """Load a CSV into a Dataset (see ``load_table`` for the conventions)."""
    data, _ = load_table(path, response_col, covariate_cols, drop_rows)
    return data


@dataclass(frozen=True)
class Standardizer:
    """Column transform z = (x - mean) / sd fitted on the training split."""

    enabled: bool
    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, X, enabled=True):
        if not enabled:
            p = X.shape[1]
            return cls(False, np.zeros(p), np.ones(p))
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=0)
        bad = np.flatnonzero(sd == 0)
        if bad.size:
            raise DegenerateCovariates(int(bad[0]))
        return cls(True, mean, sd)

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.sd


@dataclass(frozen=True)
class RunConfig:
    """Settings for the applied pipeline."""

    input: str
    response: str
    covariates: tuple | None = None
    drop_rows: tuple = ()
    train: int | None = None
    test: int = 0
    estimator: str = "lpre"
    boot: int = DEFAULT_B
    seed: int = 0
    standardize: bool = True
    fit_cfg: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.estimator not in ("lpre", "ls"):
            raise ConfigError(f"estimator must be 'lpre' or 'ls', got {self.estimator!r}")
        if self.test < 0 or (self.train is not None and self.train < 1):
            raise ConfigError("train must be >= 1 and test >= 0")


@dataclass
class PipelineResult:
    fit: FitResult
    bootstrap: BootstrapReport | None
    metrics: PredictionMetrics | None
    covariate_names: list
    transform: Standardizer
    y_test: np.ndarray
    y_hat: np.ndarray
    extrapolated: np.ndarray


def _fitter(cfg: RunConfig):
    base = two_stage_fit if cfg.estimator == "lpre" else ls_fit
    return partial(base, cfg=cfg.fit_cfg)


def run_pipeline(cfg: RunConfig, with_bootstrap=True, workers=1) -> PipelineResult:
    data, names = load_table(cfg.input, cfg.response, cfg.covariates, cfg.drop_rows)
    n = data.n
    train = cfg.train if cfg.train is not None else n - cfg.test
    if train + cfg.test > n:
        raise ConfigError(f"train+test = {train + cfg.test} exceeds {n} rows after drops")
    x_train, y_train = data.X[:train], data.Y[:train]
    x_test = data.X[train : train + cfg.test]
    y_test = data.Y[train : train + cfg.test]

    transform = Standardizer.fit(x_train, cfg.standardize)
    train_data = Dataset(X=transform.apply(x_train), Y=y_train)
    fitter = _fitter(cfg)
    fit = fitter(train_data)
    boot = (
        bootstrap_se(train_data, fitter, cfg.boot, cfg.seed, workers=workers)
        if with_bootstrap
        else None
    )
    if cfg.test > 0:
        y_hat, extrapolated = predict(fit, transform.apply(x_test))
        metrics = prediction_metrics(y_test, y_hat)
    else:
        y_hat = np.empty(0)
        extrapolated = np.empty(0, dtype=bool)
        metrics = None
    return PipelineResult(fit, boot, metrics, names, transform, y_test, y_hat, extrapolated)


def bodyfat_pipeline(cfg: RunConfig):
    """Drop cases, split in file order, fit, bootstrap, score predictions.

    Returns (FitResult, BootstrapReport, PredictionMetrics); the metrics are
    None when the test block is empty.
    """
    res = run_pipeline(cfg, with_bootstrap=True)
    return res.fit, res.bootstrap, res.metrics


def coefficient_table(names, fit: FitResult, boot: BootstrapReport | None):
    """Rows (name, estimate, se, p_value) for the coefficient CSV; the
    se/p entries are None without a bootstrap report."""
    rows = []
    for j, name in enumerate(names):
        est = float(fit.beta_hat.beta[j])
        if boot is None:
            rows.append((name, est, None, None))
        else:
            sj = float(boot.se[j])
            pj = p_value(est, sj) if sj > 0 else (0.0 if est != 0 else 0.5)
            rows.append((name, est, sj, pj))
    return rows


def save_fit_artifact(path, result: PipelineResult, config_echo: dict):
    """Write the fit as a single JSON document (atomic replace).

    Carries everything needed to evaluate the link later: coefficient,
    bandwidths, kernel, training index values and centered log responses,
    plus the standardization transform and the effective configuration.
    """
    fit = result.fit
    doc = {
        "schema": FIT_SCHEMA,
        "estimator": fit.estimator,
        "beta_hat": fit.beta_hat.beta.tolist(),
        "pivot_index": int(fit.beta_hat.pivot),
        "bandwidths": {
            "h_opt": fit.bandwidths.h_opt,
            "h": fit.bandwidths.h,
            "h1": fit.bandwidths.h1,
        },
        "kernel": fit.link.kernel.family,
        "converged": bool(fit.converged),
        "outer_iters": int(fit.outer_iters),
        "criterion_value": float(fit.criterion_value),
        "messages": list(fit.messages),
        "logy_center": float(fit.logy_center),
        "train_index": fit.train_index.tolist(),
        "train_logy_centered": fit.logy_centered.tolist(),
        "fitted_g": fit.link.g_hat.tolist(),
        "fitted_g_deriv": fit.link.g_deriv_hat.tolist(),
        "fitted_y": np.exp(fit.link.g_hat).tolist(),
        "covariates": list(result.covariate_names),
        "standardize": {
            "enabled": result.transform.enabled,
            "mean": result.transform.mean.tolist(),
            "sd": result.transform.sd.tolist(),
        },
        "config": config_echo,
    }
    write_json_atomic(path, doc)


def load_fit_artifact(path):
    """Rebuild a predict-ready FitResult (plus names and transform)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != FIT_SCHEMA:
        raise ConfigError(f"not a fit artifact: {path}")
    kernel = kernel_from_name(doc["kernel"])
    bw = Bandwidths(**doc["bandwidths"])
    beta = UnitIndexCoef(
        beta=np.asarray(doc["beta_hat"], dtype=float), pivot=doc["pivot_index"]
    )
    train_index = np.asarray(doc["train_index"], dtype=float)
    link = LinkFit(
        eval_points=train_index,
        g_hat=np.asarray(doc["fitted_g"], dtype=float),
        g_deriv_hat=np.asarray(doc["fitted_g_deriv"], dtype=float),
        bandwidths=bw,
        kernel=kernel,
    )
    fit = FitResult(
        beta_hat=beta,
        link=link,
        criterion_value=doc["criterion_value"],
        outer_iters=doc["outer_iters"],
        inner_trace=[],
        converged=doc["converged"],
        bandwidths=bw,
        estimator=doc["estimator"],
        messages=list(doc.get("messages", [])),
        train_index=train_index,
        logy_center=doc["logy_center"],
        logy_centered=np.asarray(doc["train_logy_centered"], dtype=float),
    )
    transform = Standardizer(
        enabled=doc["standardize"]["enabled"],
        mean=np.asarray(doc["standardize"]["mean"], dtype=float),
        sd=np.asarray(doc["standardize"]["sd"], dtype=float),
    )
    return fit, list(doc["covariates"]), transform


def write_json_atomic(path, doc):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def write_csv_atomic(path, header, rows, fmt="{:.6g}"):
    """CSV writer: floats at 6 significant digits, None as empty."""

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return fmt.format(v)
        return str(v)

    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell(v) for v in row])
    os.replace(tmp, path)
