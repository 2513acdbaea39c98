"""Exception types raised by the estimation, sampling and I/O layers."""


class LpresimError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDesign(LpresimError):
    """No usable local data around an evaluation point (singular 2x2 system)."""

    def __init__(self, z, detail=""):
        self.z = z
        msg = f"degenerate local design at z={z!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NoValidBandwidth(LpresimError):
    """Every candidate bandwidth was skipped during selection."""


class OutsideBall(LpresimError):
    """Reduced coefficient left the open unit ball, so the lift is undefined."""

    def __init__(self, norm):
        self.norm = norm
        super().__init__(f"reduced coefficient norm {norm:.6g} >= 1 - 1e-12")


class SingularInformation(LpresimError):
    """Newton information matrix is numerically singular even after ridging."""


class NoDescent(LpresimError):
    """Backtracking line search exhausted its halvings without a decrease.

    Carries the last accepted coefficient and the gradient norm at that point
    so callers can recover a usable iterate.
    """

    def __init__(self, coef, grad_norm):
        self.coef = coef
        self.grad_norm = grad_norm
        super().__init__(
            f"line search found no non-increasing step (|Q| = {grad_norm:.3e})"
        )


class DegenerateCovariates(LpresimError):
    """Covariate matrix is numerically rank deficient."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"covariate column {column} is linearly dependent")


class TooManyFailures(LpresimError):
    """More than half of the bootstrap resamples failed to converge."""

    def __init__(self, n_failed, total):
        self.n_failed = n_failed
        self.total = total
        super().__init__(f"{n_failed} of {total} bootstrap refits failed")


class UndefinedPValue(LpresimError):
    """p-value requested with a zero standard error."""


class SamplerFault(LpresimError):
    """Rejection sampler exceeded its iteration cap."""


class AbortedRun(LpresimError):
    """A simulation cell had too many failed fits to report aggregates."""

    def __init__(self, estimator, law, n_failed, reps):
        self.estimator = estimator
        self.law = law
        self.n_failed = n_failed
        self.reps = reps
        super().__init__(
            f"simulation cell ({estimator}, {law}): {n_failed}/{reps} fits failed"
        )


class ParseError(LpresimError):
    """CSV cell or column could not be parsed."""

    def __init__(self, row, col, detail=""):
        self.row = row
        self.col = col
        where = f"column {col!r}" if row is None else f"row {row}, column {col!r}"
        msg = f"cannot parse {where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NonPositiveResponse(LpresimError):
    """Response value is zero, negative or non-finite in some data row."""

    def __init__(self, row, value=None):
        self.row = row
        self.value = value
        super().__init__(f"non-positive response in data row {row} (value={value!r})")


class ConfigError(LpresimError):
    """Run configuration file is malformed or inconsistent."""
