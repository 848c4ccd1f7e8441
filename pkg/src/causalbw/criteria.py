"""Bandwidth-selection criteria for curve and average-effect estimation.

Seven criteria live here. Three are oracles that plug in the true curves and
error variance (average within-group MSE, MSE of the group mean, MSE of the
effect estimate), and four are data-driven: leave-one-out cross-validation,
the inverse-propensity plug-in estimator of the group-mean MSE, and the two
double-smoothing estimators that replace the unknown curves with a pilot fit.

Group-mean variance terms use the identity
sum_i sum_k row_i . row_k = ||sum_i row_i||^2, so a criterion value costs one
smoothing-matrix build; the O(n^2) double-sum form is kept as a test oracle.
:class:`GroupSweep` caches the per-bandwidth reductions so that a whole grid
(and the joint grid x grid surfaces) can be assembled from one pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericalError, OverlapViolationError
from .estimators import Dataset
from .kernels import Kernel
from .smoothing import Bandwidth, GroupSample, fit, loo_fit, smoothing_rows

__all__ = [
    "OracleTruth",
    "CriterionValue",
    "cv_score",
    "mse_y_oracle",
    "mse_beta_oracle",
    "mse_tau_oracle",
    "mse_beta_inr",
    "mse_beta_ds",
    "mse_tau_ds",
    "fit_logistic_propensity",
    "GroupSweep",
    "joint_tau_surface",
]


@dataclass(frozen=True)
class OracleTruth:
    """True regression curves, error variance and propensity of a population."""

    beta1: Callable[[np.ndarray], np.ndarray]
    beta0: Callable[[np.ndarray], np.ndarray]
    sigma2: float
    propensity: Callable[[np.ndarray], np.ndarray]

    def beta(self, arm: int) -> Callable[[np.ndarray], np.ndarray]:
        return self.beta1 if arm == 1 else self.beta0

    def arm_propensity(self, arm: int, x) -> np.ndarray:
        p = np.asarray(self.propensity(x), dtype=float)
        return p if arm == 1 else 1.0 - p


@dataclass(frozen=True)
class CriterionValue:
    """Variance and squared-bias summands of an MSE-style criterion.

    ``bias_avg`` carries the signed average bias for criteria whose bias term
    is a squared average; it is what the effect-level decomposition identity
    is built from.
    """

    variance_part: float
    bias_sq_part: float
    bias_avg: Optional[float] = None

    @property
    def total(self) -> float:
        return self.variance_part + self.bias_sq_part


def cv_score(group: GroupSample, kernel: Kernel, h: Bandwidth) -> float:
    """Mean squared leave-one-out prediction error within a group."""
    resid = group.y - loo_fit(group, kernel, h)
    return float(resid @ resid / group.n)


def mse_y_oracle(
    group: GroupSample, kernel: Kernel, h: Bandwidth, truth: OracleTruth, arm: int
) -> CriterionValue:
    """Average conditional MSE of the fitted curve at the group's own points."""
    s = smoothing_rows(group.x, group.x, kernel, h)
    variance = truth.sigma2 / group.n * float((s * s).sum())
    beta_grp = np.asarray(truth.beta(arm)(group.x), dtype=float)
    b = s @ beta_grp - beta_grp
    return CriterionValue(variance, float(b @ b / group.n))


def mse_beta_oracle(
    all_x, group: GroupSample, kernel: Kernel, h: Bandwidth, truth: OracleTruth, arm: int
) -> CriterionValue:
    """Conditional MSE of the sample mean of the fitted curve over all covariates."""
    all_x = np.asarray(all_x, dtype=float)
    n = all_x.size
    s = smoothing_rows(group.x, all_x, kernel, h)
    colsum = s.sum(axis=0)
    variance = truth.sigma2 / n**2 * float(colsum @ colsum)
    beta_fn = truth.beta(arm)
    beta_grp = np.asarray(beta_fn(group.x), dtype=float)
    beta_all = np.asarray(beta_fn(all_x), dtype=float)
    bias_avg = float((s @ beta_grp - beta_all).sum() / n)
    return CriterionValue(variance, bias_avg**2, bias_avg)


def mse_tau_oracle(
    all_x,
    treated: GroupSample,
    control: GroupSample,
    kernel: Kernel,
    h1: Bandwidth,
    h0: Bandwidth,
    truth: OracleTruth,
) -> CriterionValue:
    """Conditional MSE of the imputation estimator for a bandwidth pair."""
    m1 = mse_beta_oracle(all_x, treated, kernel, h1, truth, 1)
    m0 = mse_beta_oracle(all_x, control, kernel, h0, truth, 0)
    bias_avg = m1.bias_avg - m0.bias_avg
    return CriterionValue(m1.variance_part + m0.variance_part, bias_avg**2, bias_avg)


def _check_arm_propensity(p: np.ndarray) -> np.ndarray:
    # p == 1 is harmless (unit weights); p <= 0 or p > 1 is not
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise OverlapViolationError("overlap violation")
    return p


def mse_beta_inr(
    all_x,
    group: GroupSample,
    kernel: Kernel,
    h: Bandwidth,
    propensity_at_group,
    sigma2_hat: float,
) -> CriterionValue:
    """Plug-in estimator of the group-mean MSE with inverse-propensity residuals.

    ``propensity_at_group`` holds Pr(z = arm | x) at the group's own
    covariates. The estimated squared bias is the squared weighted residual
    average minus a variance correction, so the total can be negative.
    """
    pinv = 1.0 / _check_arm_propensity(propensity_at_group)
    all_x = np.asarray(all_x, dtype=float)
    n = all_x.size
    s_all = smoothing_rows(group.x, all_x, kernel, h)
    s_grp = smoothing_rows(group.x, group.x, kernel, h)
    colsum = s_all.sum(axis=0)
    variance = sigma2_hat / n**2 * float(colsum @ colsum)
    resid = group.y - s_grp @ group.y
    weighted = float(np.sum(resid * pinv) / n) ** 2
    q = pinv - s_grp.T @ pinv
    correction = sigma2_hat / n**2 * float(q @ q)
    return CriterionValue(variance, weighted - correction)


def mse_beta_ds(
    all_x,
    group: GroupSample,
    kernel: Kernel,
    h: Bandwidth,
    pilot: Bandwidth,
    sigma2_hat: float,
) -> CriterionValue:
    """Double-smoothing estimator of the group-mean MSE.

    The unknown curve is replaced by a pilot fit both inside the candidate
    smoother and at the evaluation points.
    """
    all_x = np.asarray(all_x, dtype=float)
    n = all_x.size
    s_all = smoothing_rows(group.x, all_x, kernel, h)
    colsum = s_all.sum(axis=0)
    variance = sigma2_hat / n**2 * float(colsum @ colsum)
    pilot_grp = fit(group, group.x, kernel, pilot)
    pilot_all = fit(group, all_x, kernel, pilot)
    bias_avg = float((s_all @ pilot_grp - pilot_all).sum() / n)
    return CriterionValue(variance, bias_avg**2, bias_avg)


def mse_tau_ds(
    all_x,
    treated: GroupSample,
    control: GroupSample,
    kernel: Kernel,
    h1: Bandwidth,
    h0: Bandwidth,
    pilot1: Bandwidth,
    pilot0: Bandwidth,
    sigma2_hat1: float,
    sigma2_hat0: float,
) -> CriterionValue:
    """Double-smoothing estimator of the effect-level MSE for a bandwidth pair."""
    m1 = mse_beta_ds(all_x, treated, kernel, h1, pilot1, sigma2_hat1)
    m0 = mse_beta_ds(all_x, control, kernel, h0, pilot0, sigma2_hat0)
    bias_avg = m1.bias_avg - m0.bias_avg
    return CriterionValue(m1.variance_part + m0.variance_part, bias_avg**2, bias_avg)


def fit_logistic_propensity(x, z, *, max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    """ML logistic fit of z on (1, x); returns fitted Pr(z=1|x) at the inputs.

    Newton iterations on the two-parameter score; enough for the scalar
    covariate this package works with.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    beta = np.zeros(2)
    for _ in range(max_iter):
        eta = design @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(p * (1.0 - p), 1e-12)
        grad = design.T @ (z - p)
        hess = (design * w[:, np.newaxis]).T @ design
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("logistic propensity fit is singular") from exc
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise NumericalError("logistic propensity fit did not converge")
    return 1.0 / (1.0 + np.exp(-(design @ beta)))


class GroupSweep:
    """Per-bandwidth smoother reductions for one arm over a whole grid.

    Building smoothing rows is the expensive part of every criterion, so one
    pass per grid value computes everything the seven criteria need; the
    surface methods then assemble criterion totals without touching the data
    again. Grid values where the smoother is infeasible carry NaN and are
    skipped by the selector.
    """

    def __init__(
        self,
        data: Dataset,
        arm: int,
        kernel: Kernel,
        grid,
        *,
        truth: Optional[OracleTruth] = None,
        arm_propensity=None,
        with_loo: bool = True,
        with_rows: bool = True,
    ):
        self.data = data
        self.arm = arm
        self.kernel = kernel
        self.grid = grid
        self.group = data.group(arm)
        idx = data.arm_indices(arm)
        n, nj, g = data.n, self.group.n, grid.count
        self.n = n

        pinv = None
        if arm_propensity is not None:
            pinv = 1.0 / _check_arm_propensity(arm_propensity)

        beta_grp = beta_all = None
        if truth is not None:
            beta_fn = truth.beta(arm)
            beta_grp = np.asarray(beta_fn(self.group.x), dtype=float)
            beta_all = np.asarray(beta_fn(data.x), dtype=float)

        self.colsums = np.full((g, nj), np.nan)
        self.var_quad = np.full(g, np.nan)  # ||colsum||^2
        self.frob_grp = np.full(g, np.nan)  # ||S_grp||_F^2
        self.bias_y_meansq = np.full(g, np.nan)
        self.bias_avg_oracle = np.full(g, np.nan)
        self.resid_ipw = np.full(g, np.nan)  # sum of resid / p over the group
        self.inr_correction = np.full(g, np.nan)  # ||(I - S_grp)^T (1/p)||^2
        self.cv = np.full(g, np.nan)

        # the matrix pass feeds every criterion except cross-validation, so a
        # CV-only caller can skip it
        for i in range(g if with_rows else 0):
            bw = grid.bandwidth(i)
            try:
                s_all = smoothing_rows(self.group.x, data.x, kernel, bw)
            except NumericalError:
                continue
            s_grp = s_all[idx]
            colsum = s_all.sum(axis=0)
            self.colsums[i] = colsum
            self.var_quad[i] = colsum @ colsum
            self.frob_grp[i] = (s_grp * s_grp).sum()
            if beta_grp is not None:
                b = s_grp @ beta_grp - beta_grp
                self.bias_y_meansq[i] = b @ b / nj
                self.bias_avg_oracle[i] = (s_all @ beta_grp - beta_all).sum() / n
            if pinv is not None:
                resid = self.group.y - s_grp @ self.group.y
                self.resid_ipw[i] = np.sum(resid * pinv)
                q = pinv - s_grp.T @ pinv
                self.inr_correction[i] = q @ q
        if with_loo:
            for i in range(g):
                try:
                    self.cv[i] = cv_score(self.group, kernel, grid.bandwidth(i))
                except NumericalError:
                    continue

    def var_surface(self, sigma2: float) -> np.ndarray:
        """Group-mean variance term per grid value."""
        return sigma2 / self.n**2 * self.var_quad

    def my_surface(self, sigma2: float) -> np.ndarray:
        """Within-group average MSE (oracle) per grid value."""
        return sigma2 / self.group.n * self.frob_grp + self.bias_y_meansq

    def mbeta_surface(self, sigma2: float) -> np.ndarray:
        """Group-mean MSE (oracle) per grid value."""
        return self.var_surface(sigma2) + self.bias_avg_oracle**2

    def inr_surface(self, sigma2: float) -> np.ndarray:
        """Inverse-propensity plug-in estimate of the group-mean MSE."""
        weighted = (self.resid_ipw / self.n) ** 2
        return self.var_surface(sigma2) + weighted - sigma2 / self.n**2 * self.inr_correction

    def cv_surface(self) -> np.ndarray:
        return self.cv

    def ds_bias_avgs(self, pilot: Bandwidth) -> np.ndarray:
        """Signed double-smoothing average bias per grid value."""
        pilot_grp = fit(self.group, self.group.x, self.kernel, pilot)
        pilot_all = fit(self.group, self.data.x, self.kernel, pilot)
        total_all = pilot_all.sum()
        return (self.colsums @ pilot_grp - total_all) / self.n

    def ds_surface(self, sigma2: float, pilot: Bandwidth) -> np.ndarray:
        """Double-smoothing estimate of the group-mean MSE."""
        return self.var_surface(sigma2) + self.ds_bias_avgs(pilot) ** 2


def joint_tau_surface(var1, bias_avg1, var0, bias_avg0) -> np.ndarray:
    """Effect-level MSE surface over a bandwidth-pair grid.

    Entry (i, k) combines arm-1 value i with arm-0 value k: the variance
    terms add and the signed average biases difference before squaring.
    """
    v = np.asarray(var1)[:, np.newaxis] + np.asarray(var0)[np.newaxis, :]
    b = np.asarray(bias_avg1)[:, np.newaxis] - np.asarray(bias_avg0)[np.newaxis, :]
    return v + b**2
