"""Delete-one-component chart between the unit sphere and the open ball.

A unit-norm coefficient with a positive pivot entry is identified with the
vector of its remaining p-1 entries, which lives in the open unit ball.
``reduce`` drops the pivot, ``lift`` restores it as +sqrt(1 - |rest|^2),
and ``jacobian`` is the derivative of the lifted vector with respect to
the reduced one (its columns span the sphere's tangent space).

Pivot indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutsideBall

#: how far inside the ball a reduced coefficient must stay
BALL_MARGIN = 1e-12


@dataclass(frozen=True)
class UnitIndexCoef:
    """Unit-norm index coefficient with a designated positive pivot entry."""

    beta: np.ndarray
    pivot: int

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        object.__setattr__(self, "beta", b)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("beta must be a nonempty vector")
        if not (0 <= self.pivot < b.size):
            raise ValueError(f"pivot {self.pivot} out of range for p={b.size}")
        if not np.all(np.isfinite(b)):
            raise ValueError("beta has non-finite entries")
        nrm = np.linalg.norm(b)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"|beta| = {nrm!r} is not 1 within 1e-10")
        if b[self.pivot] <= 0:
            raise ValueError(f"pivot component beta[{self.pivot}] must be positive")

    @property
    def p(self) -> int:
        return self.beta.size

    @classmethod
    def from_vector(cls, v, pivot: int | None = None) -> "UnitIndexCoef":
        """Normalize v to unit length; pivot defaults to the largest |entry|,
        with the sign flipped so that entry is positive."""
        v = np.asarray(v, dtype=float)
        nrm = np.linalg.norm(v)
        if not np.isfinite(nrm) or nrm == 0:
            raise ValueError("cannot normalize a zero or non-finite vector")
        b = v / nrm
        if pivot is None:
            pivot = int(np.argmax(np.abs(b)))
        if b[pivot] < 0:
            b = -b
        return cls(beta=b, pivot=pivot)


@dataclass(frozen=True)
class ReducedCoef:
    """Coefficient after deleting the pivot entry; lives in the open unit ball."""

    beta_r: np.ndarray
    pivot: int
    p: int

    def __post_init__(self):
        br = np.asarray(self.beta_r, dtype=float)
        object.__setattr__(self, "beta_r", br)
        if br.size != self.p - 1:
            raise ValueError("beta_r must have length p-1")
        if not (0 <= self.pivot < self.p):
            raise ValueError(f"pivot {self.pivot} out of range for p={self.p}")
        if np.linalg.norm(br) >= 1.0:
            raise ValueError("|beta_r| must be strictly below 1")


def reduce(coef: UnitIndexCoef) -> ReducedCoef:
    """Drop the pivot component, preserving the order of the rest."""
    return ReducedCoef(
        beta_r=np.delete(coef.beta, coef.pivot), pivot=coef.pivot, p=coef.p
    )


def lift(red: ReducedCoef) -> UnitIndexCoef:
    """Insert +sqrt(1 - |beta_r|^2) at the pivot position.

    Raises
    ------
    OutsideBall
        If |beta_r| >= 1 - 1e-12 (a Newton step left the chart).
    """
    sq = float(red.beta_r @ red.beta_r)
    nrm = np.sqrt(sq)
    if nrm >= 1.0 - BALL_MARGIN:
        raise OutsideBall(nrm)
    b = np.insert(red.beta_r, red.pivot, np.sqrt(1.0 - sq))
    return UnitIndexCoef(beta=b, pivot=red.pivot)


def jacobian(red: ReducedCoef) -> np.ndarray:
    """Derivative of the lifted p-vector with respect to the reduced one.

    The p x (p-1) matrix with identity rows except the pivot row, which is
    -beta_r / sqrt(1 - |beta_r|^2). Satisfies beta^T J = 0 at the lifted
    point (columns are tangent to the sphere).
    """
    sq = float(red.beta_r @ red.beta_r)
    nrm = np.sqrt(sq)
    if nrm >= 1.0 - BALL_MARGIN:
        raise OutsideBall(nrm)
    p = red.p
    jac = np.zeros((p, p - 1))
    rows = np.delete(np.arange(p), red.pivot)
    jac[rows, np.arange(p - 1)] = 1.0
    jac[red.pivot, :] = -red.beta_r / np.sqrt(1.0 - sq)
    return jac
