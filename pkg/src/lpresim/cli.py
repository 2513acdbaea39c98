"""Command line interface.

Subcommands: fit, bootstrap, predict, simulate, check. Exit codes: 0 on
success, 1 for usage problems, 2 for data errors (unreadable files, bad
columns, non-positive responses), 3 for non-convergence or failed checks.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from ._backend import active_backend
from .errors import (
    AbortedRun,
    ConfigError,
    DegenerateCovariates,
    DegenerateDesign,
    LpresimError,
    NoDescent,
    NonPositiveResponse,
    NoValidBandwidth,
    ParseError,
    SamplerFault,
    SingularInformation,
    TooManyFailures,
    UndefinedPValue,
)
from .fit import FitConfig, predict
from .pipeline import (
    RunConfig,
    coefficient_table,
    load_fit_artifact,
    load_table,
    prediction_metrics,
    run_pipeline,
    save_fit_artifact,
    write_csv_atomic,
    write_json_atomic,
)
from .reparam import UnitIndexCoef
from .simulation import ErrorLaw, SimConfig, run_simulation
from .smoother import kernel_from_name

_DATA_ERRORS = (
    ParseError,
    NonPositiveResponse,
    ConfigError,
    DegenerateCovariates,
    NoValidBandwidth,
    FileNotFoundError,
)
_CONVERGENCE_ERRORS = (
    NoDescent,
    SingularInformation,
    DegenerateDesign,
    TooManyFailures,
    AbortedRun,
    SamplerFault,
    UndefinedPValue,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOCONV = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_common(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--kernel", choices=["epanechnikov", "gaussian"], default=None)
    p.add_argument("--output", default=".", help="directory for output artifacts")
    p.add_argument("--config", default=None, help="key=value config file; flags win")


def _add_data_opts(p):
    p.add_argument("--input", required=True, help="input CSV with a header row")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--covariates", default=None, help="comma-separated column names")
    p.add_argument("--drop-rows", default=None, help="comma-separated 1-based data rows")
    p.add_argument("--train", type=int, default=None, help="training rows (file order)")
    p.add_argument("--test", type=int, default=None, help="test rows after the training block")
    p.add_argument("--estimator", choices=["lpre", "ls"], default=None)
    p.add_argument("--raw-scale", action="store_true", help="skip covariate standardization")


def build_parser():
    parser = _Parser(prog="lpresim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lpresim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one estimator on a CSV")
    _add_data_opts(p_fit)
    _add_common(p_fit)

    p_boot = sub.add_parser("bootstrap", help="fit plus bootstrap SEs and p-values")
    _add_data_opts(p_boot)
    p_boot.add_argument("--boot", type=int, default=None, help="bootstrap resamples")
    p_boot.add_argument("--workers", type=int, default=1)
    _add_common(p_boot)

    p_pred = sub.add_parser("predict", help="predict from a saved fit artifact")
    p_pred.add_argument("--fit-artifact", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--response", default=None, help="optional, enables metrics")
    p_pred.add_argument("--output", default=".")

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo study")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--laws", default=None, help="comma list: lognormal,loguniform,gig")
    p_sim.add_argument("--estimators", default=None, help="comma list: lpre,ls,linear")
    p_sim.add_argument("--beta0", default=None, help="comma list of index coefficients")
    p_sim.add_argument("--workers", type=int, default=1)
    _add_common(p_sim)

    p_check = sub.add_parser("check", help="run numeric self-checks")
    p_check.add_argument("--draws", type=int, default=100_000)
    p_check.add_argument("--seed", type=int, default=0)

    return parser


def read_config_file(path):
    """Flat key = value file; '#' starts a comment."""
    opts = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                opts[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return opts


_SIM_KEYS = {"n", "reps", "seed", "kernel", "error", "estimators", "beta0"}


def _sim_config(args):
    opts = read_config_file(args.config) if args.config else {}
    unknown = set(opts) - _SIM_KEYS
    if unknown:
        raise ConfigError(f"unknown simulate config keys: {sorted(unknown)}")

    def pick(flag, key, cast, default):
        if flag is not None:
            return cast(flag) if isinstance(flag, str) else flag
        if key in opts:
            try:
                return cast(opts[key])
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"bad value for {key!r}: {opts[key]!r}") from exc
        return default

    def laws_cast(s):
        try:
            return tuple(ErrorLaw.from_name(t) for t in s.split(","))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    ests_cast = lambda s: tuple(t.strip().lower() for t in s.split(","))
    beta_cast = lambda s: UnitIndexCoef.from_vector([float(t) for t in s.split(",")])

    kwargs = dict(
        n=pick(args.n, "n", int, 100),
        reps=pick(args.reps, "reps", int, 200),
        seed=pick(args.seed, "seed", int, 0),
        error=pick(args.laws, "error", laws_cast, (ErrorLaw.LOGNORMAL,)),
        estimators=pick(args.estimators, "estimators", ests_cast, ("lpre", "ls", "linear")),
        fit_cfg=FitConfig(
            kernel=kernel_from_name(pick(args.kernel, "kernel", str, "epanechnikov"))
        ),
    )
    beta0 = pick(args.beta0, "beta0", beta_cast, None)
    if beta0 is not None:
        kwargs["beta0"] = beta0
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _sim_config_echo(cfg: SimConfig):
    return {
        "n": cfg.n,
        "reps": cfg.reps,
        "seed": cfg.seed,
        "beta0": cfg.beta0.beta.tolist(),
        "error": [law.value for law in cfg.error],
        "estimators": list(cfg.estimators),
        "kernel": cfg.fit_cfg.kernel.family,
    }


def _cmd_simulate(args):
    cfg = _sim_config(args)
    report = run_simulation(cfg, workers=args.workers)
    os.makedirs(args.output, exist_ok=True)

    rows = []
    cells_doc = []
    for cell in report.cells:
        scale = 100.0  # report values are x100, matching the table convention
        for j in range(cfg.beta0.p):
            rows.append(
                (
                    cell.estimator,
                    cell.law.value,
                    cfg.n,
                    cell.reps,
                    cell.n_failed,
                    j + 1,
                    scale * cell.bias[j],
                    scale * cell.se[j],
                    scale * cell.rmse[j],
                    scale * cell.ee_mean,
                    scale * cell.mse_mean,
                    None if cell.ase_mean is None else scale * cell.ase_mean,
                )
            )
        cells_doc.append(
            {
                "estimator": cell.estimator,
                "law": cell.law.value,
                "reps": cell.reps,
                "n_failed": cell.n_failed,
                "se_defined": cell.se_defined,
                "bias": cell.bias.tolist(),
                "se": cell.se.tolist(),
                "rmse": cell.rmse.tolist(),
                "ee_mean": cell.ee_mean,
                "mse_mean": cell.mse_mean,
                "ase_mean": cell.ase_mean,
                "raw": {
                    "rep_ids": cell.rep_ids.tolist(),
                    "beta_err": cell.raw_beta_err.tolist(),
                    "ee": cell.raw_ee.tolist(),
                    "mse": cell.raw_mse.tolist(),
                    "ase": None if cell.raw_ase is None else cell.raw_ase.tolist(),
                },
            }
        )
    write_csv_atomic(
        os.path.join(args.output, "simreport.csv"),
        ["estimator", "law", "n", "reps", "n_failed", "component", "bias", "se", "rmse", "ee", "mse", "ase"],
        rows,
    )
    write_json_atomic(
        os.path.join(args.output, "simreport.json"),
        {"config": _sim_config_echo(cfg), "cells": cells_doc},
    )
    print(f"simulate: wrote simreport.csv and simreport.json to {args.output}")
    return EXIT_OK


def _run_config(args, with_boot):
    opts = read_config_file(args.config) if getattr(args, "config", None) else {}
    known = {"drop_rows", "train", "test", "estimator", "boot", "seed", "kernel", "standardize"}
    unknown = set(opts) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def pick(flag, key, cast, default):
        if flag is not None:
            return flag
        if key in opts:
            try:
                return cast(opts[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {opts[key]!r}") from exc
        return default

    drops = pick(args.drop_rows, "drop_rows", str, "")
    drop_rows = tuple(int(t) for t in str(drops).replace(" ", "").split(",") if t)
    covs = tuple(t.strip() for t in args.covariates.split(",")) if args.covariates else None
    try:
        return RunConfig(
            input=args.input,
            response=args.response,
            covariates=covs,
            drop_rows=drop_rows,
            train=pick(args.train, "train", int, None),
            test=pick(args.test, "test", int, 0),
            estimator=pick(args.estimator, "estimator", str, "lpre"),
            boot=pick(getattr(args, "boot", None), "boot", int, 500) if with_boot else 0,
            seed=pick(args.seed, "seed", int, 0),
            standardize=(
                False
                if args.raw_scale
                else pick(None, "standardize", lambda s: s.lower() != "false", True)
            ),
            fit_cfg=FitConfig(
                kernel=kernel_from_name(pick(args.kernel, "kernel", str, "epanechnikov"))
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _pipeline_echo(cfg: RunConfig, boot_used):
    return {
        "input": cfg.input,
        "response": cfg.response,
        "covariates": None if cfg.covariates is None else list(cfg.covariates),
        "drop_rows": list(cfg.drop_rows),
        "train": cfg.train,
        "test": cfg.test,
        "estimator": cfg.estimator,
        "boot": cfg.boot if boot_used else 0,
        "seed": cfg.seed,
        "standardize": cfg.standardize,
        "kernel": cfg.fit_cfg.kernel.family,
    }


def _write_fit_outputs(args, cfg, res, boot_used):
    os.makedirs(args.output, exist_ok=True)
    echo = _pipeline_echo(cfg, boot_used)
    save_fit_artifact(os.path.join(args.output, "fit.json"), res, echo)
    write_csv_atomic(
        os.path.join(args.output, "coefficients.csv"),
        ["name", "estimate", "se", "p_value"],
        coefficient_table(res.covariate_names, res.fit, res.bootstrap),
    )
    if res.bootstrap is not None:
        write_json_atomic(
            os.path.join(args.output, "bootstrap.json"),
            {
                "se": res.bootstrap.se.tolist(),
                "p_values": res.bootstrap.p_values.tolist(),
                "n_failed": res.bootstrap.n_failed,
                "replicates": res.bootstrap.replicates.tolist(),
                "config": echo,
            },
        )
    if res.metrics is not None:
        write_csv_atomic(
            os.path.join(args.output, "predictions.csv"),
            ["row", "y_true", "y_hat", "extrapolated"],
            [
                (i + 1, float(res.y_test[i]), float(res.y_hat[i]), int(res.extrapolated[i]))
                for i in range(len(res.y_hat))
            ],
        )
        write_json_atomic(
            os.path.join(args.output, "prediction_metrics.json"),
            {
                "mpe": res.metrics.mpe,
                "mppe": res.metrics.mppe,
                "mape": res.metrics.mape,
                "mspe": res.metrics.mspe,
                "config": echo,
            },
        )
    if not res.fit.converged:
        print("fit did not converge:", "; ".join(res.fit.messages) or "iteration cap", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def _cmd_fit(args):
    cfg = _run_config(args, with_boot=False)
    res = run_pipeline(cfg, with_bootstrap=False)
    code = _write_fit_outputs(args, cfg, res, boot_used=False)
    print(f"fit: wrote fit.json and coefficients.csv to {args.output}")
    return code


def _cmd_bootstrap(args):
    cfg = _run_config(args, with_boot=True)
    res = run_pipeline(cfg, with_bootstrap=True, workers=args.workers)
    code = _write_fit_outputs(args, cfg, res, boot_used=True)
    print(f"bootstrap: wrote fit.json, coefficients.csv and bootstrap.json to {args.output}")
    return code


def _cmd_predict(args):
    fit, names, transform = load_fit_artifact(args.fit_artifact)
    if args.response is not None:
        data, _ = load_table(args.input, args.response, names)
        x, y_true = data.X, data.Y
    else:
        data, _ = load_table_no_response(args.input, names)
        x, y_true = data, None
    y_hat, extrapolated = predict(fit, transform.apply(x))
    os.makedirs(args.output, exist_ok=True)
    header = ["row", "y_hat", "extrapolated"] if y_true is None else ["row", "y_true", "y_hat", "extrapolated"]
    rows = []
    for i in range(len(y_hat)):
        if y_true is None:
            rows.append((i + 1, float(y_hat[i]), int(extrapolated[i])))
        else:
            rows.append((i + 1, float(y_true[i]), float(y_hat[i]), int(extrapolated[i])))
    write_csv_atomic(os.path.join(args.output, "predictions.csv"), header, rows)
    if y_true is not None:
        m = prediction_metrics(y_true, y_hat)
        write_json_atomic(
            os.path.join(args.output, "prediction_metrics.json"),
            {"mpe": m.mpe, "mppe": m.mppe, "mape": m.mape, "mspe": m.mspe},
        )
    print(f"predict: wrote predictions.csv to {args.output}")
    return EXIT_OK


def load_table_no_response(path, covariate_cols):
    """Covariate-only matrix for prediction inputs without a response."""
    from .pipeline import _read_table

    header, rows = _read_table(path)
    for c in covariate_cols:
        if c not in header:
            raise ParseError(None, c, "missing column")
    cidx = [header.index(c) for c in covariate_cols]
    xs = []
    for i, row in enumerate(rows, start=1):
        vals = []
        for j, name in zip(cidx, covariate_cols):
            try:
                v = float(row[j])
            except (ValueError, IndexError):
                raise ParseError(i, name, repr(row[j] if j < len(row) else None)) from None
            vals.append(v)
        xs.append(vals)
    return np.asarray(xs), covariate_cols


def _cmd_check(args):
    from .diagnostics import gig_normalization, gradient_selfcheck, moment_checks

    failures = 0

    total, bessel, c_est = gig_normalization()
    ok = abs(total - bessel) <= 1e-8 * bessel and abs(c_est - 0.5941) <= 5e-4 * 0.5941 * 2
    print(f"[{'PASS' if ok else 'FAIL'}] error-density normalization: "
          f"integral={total:.10f} bessel={bessel:.10f} c={c_est:.4f} (expected ~0.5941)")
    failures += not ok

    for name, mean, bound, ok in moment_checks(args.draws, args.seed):
        print(f"[{'PASS' if ok else 'FAIL'}] moment E(eps-1/eps)=0 for {name}: "
              f"mean={mean:+.5f} bound={bound:.5f}")
        failures += not ok

    err_q, err_b = gradient_selfcheck(args.seed)
    ok = err_q <= 1e-6 and err_b <= 1e-6
    print(f"[{'PASS' if ok else 'FAIL'}] estimating-equation derivatives: "
          f"rel err Q={err_q:.2e}, B={err_b:.2e}")
    failures += not ok

    print(f"backend: {active_backend()}")
    return EXIT_OK if failures == 0 else EXIT_NOCONV


def cli_main(argv=None) -> int:
    """Parse arguments, dispatch, and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    commands = {
        "fit": _cmd_fit,
        "bootstrap": _cmd_bootstrap,
        "predict": _cmd_predict,
        "simulate": _cmd_simulate,
        "check": _cmd_check,
    }
    try:
        return commands[args.command](args)
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _CONVERGENCE_ERRORS as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except LpresimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
