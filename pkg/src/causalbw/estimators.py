"""Imputation estimator of the average effect, residual variance, OLS control variate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateFitError, NumericalError
from .kernels import Kernel
from .smoothing import Bandwidth, GroupSample, fit, smoothing_rows

__all__ = [
    "Dataset",
    "TauEstimate",
    "imputation_tau",
    "residual_variance",
    "ols_control_variate",
]

Basis = Sequence[Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Dataset:
    """Observed sample: covariate, outcome and binary treatment indicator."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z)
        if not (x.ndim == 1 and x.shape == y.shape == z.shape):
            raise ValueError("x, y, z must be one-dimensional and equally long")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("x and y must be finite")
        if not np.isin(z, (0, 1)).all():
            raise ValueError("z must contain only 0 and 1")
        z = z.astype(np.int64)
        if (z == 1).sum() < 2 or (z == 0).sum() < 2:
            raise NumericalError("degenerate treatment groups: need at least 2 units per arm")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def n1(self) -> int:
        return int((self.z == 1).sum())

    @property
    def n0(self) -> int:
        return int((self.z == 0).sum())

    def arm_indices(self, arm: int) -> np.ndarray:
        return np.flatnonzero(self.z == arm)

    def group(self, arm: int) -> GroupSample:
        idx = self.arm_indices(arm)
        return GroupSample(self.x[idx], self.y[idx])

    @property
    def treated(self) -> GroupSample:
        return self.group(1)

    @property
    def control(self) -> GroupSample:
        return self.group(0)


@dataclass(frozen=True)
class TauEstimate:
    """Imputation estimate: mean over all units of the fitted curve difference."""

    tau_hat: float
    pointwise: np.ndarray
    h1: Bandwidth
    h0: Bandwidth


def imputation_tau(data: Dataset, kernel: Kernel, h1: Bandwidth, h0: Bandwidth) -> TauEstimate:
    """Fit each arm's curve, evaluate both at every covariate, average the gap."""
    fit1 = fit(data.treated, data.x, kernel, h1)
    fit0 = fit(data.control, data.x, kernel, h0)
    pointwise = fit1 - fit0
    return TauEstimate(float(pointwise.mean()), pointwise, h1, h0)


def residual_variance(group: GroupSample, kernel: Kernel, h_eps: Bandwidth) -> float:
    """Residual sum of squares normalized by the smoother degrees of freedom.

    The denominator is n - trace(2S - S S^T) with S the within-group
    smoothing matrix evaluated at the donors; it reduces to n - 2 in the
    global least-squares limit.
    """
    s = smoothing_rows(group.x, group.x, kernel, h_eps)
    resid = group.y - s @ group.y
    rss = float(resid @ resid)
    df = group.n - (2.0 * np.trace(s) - (s * s).sum())
    if df <= 0:
        raise DegenerateFitError(
            "effective degrees of freedom exhausted (bandwidth too small)"
        )
    return rss / df


def ols_control_variate(data: Dataset, basis: Basis) -> float:
    """Mean fitted treatment effect from a correctly specified least-squares fit.

    The design stacks the basis columns with their treatment interactions, so
    the fitted effect at x is the interaction block applied to the basis.
    """
    phi = np.column_stack([np.asarray(f(data.x), dtype=float) for f in basis])
    design = np.hstack([phi, data.z[:, np.newaxis] * phi])
    coef, _, rank, _ = np.linalg.lstsq(design, data.y, rcond=None)
    if rank < design.shape[1]:
        raise DegenerateFitError("rank-deficient control-variate basis")
    m = phi.shape[1]
    return float((phi @ coef[m:]).mean())
