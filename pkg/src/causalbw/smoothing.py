"""Local linear regression with constant and nearest-neighbor bandwidths.

The smoother is linear: the fitted value at a target is a weight row applied
to the donor outcomes, and stacking rows over evaluation points gives the
smoothing matrix. Rows reproduce constants and linear functions exactly,
which the downstream selection criteria lean on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, InsufficientDonorsError
from .kernels import Kernel

__all__ = [
    "CONSTANT",
    "NN_FRACTION",
    "Bandwidth",
    "GroupSample",
    "WeightRow",
    "nn_radius",
    "weight_row",
    "smoothing_rows",
    "smoothing_matrix",
    "fit",
    "loo_fit",
]

logger = logging.getLogger(__name__)

CONSTANT = "constant"
NN_FRACTION = "nn"

# below this relative determinant the 2x2 local design counts as singular
_SINGULAR_RTOL = 1e-12
_MIN_NEIGHBORS = 3


@dataclass(frozen=True)
class Bandwidth:
    """Smoothing parameter: a fixed radius or a nearest-neighbor fraction."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in (CONSTANT, NN_FRACTION):
            raise ValueError(f"unknown bandwidth kind {self.kind!r}")
        if not np.isfinite(self.value) or self.value <= 0:
            raise ValueError("bandwidth value must be positive and finite")
        if self.kind == NN_FRACTION and self.value > 1:
            raise ValueError("nearest-neighbor fraction cannot exceed 1")

    @classmethod
    def constant(cls, value: float) -> "Bandwidth":
        return cls(CONSTANT, float(value))

    @classmethod
    def nn(cls, value: float) -> "Bandwidth":
        return cls(NN_FRACTION, float(value))


@dataclass(frozen=True)
class GroupSample:
    """Covariates and outcomes of one treatment arm."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be one-dimensional and equally long")
        if x.size < 2:
            raise ValueError("a group needs at least two observations")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("x and y must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class WeightRow:
    """One smoothing-matrix row: donor weights for a single target point.

    Weights sum to one and satisfy the local-linear moment condition
    sum_k w_k (x_k - target) = 0.
    """

    weights: np.ndarray
    target: float


def _nn_count(fraction: float, n_donors: int) -> int:
    # round half up so the count is platform-independent
    return max(int(np.floor(fraction * n_donors + 0.5)), _MIN_NEIGHBORS)


def nn_radius(donors_x, target: float, fraction: float) -> float:
    """Distance from target to its k-th nearest donor, k a rounded fraction.

    Donors coinciding with the target are not eligible; k is capped at the
    number of eligible donors.
    """
    x = np.asarray(donors_x, dtype=float)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    dist = np.abs(x - target)
    eligible = dist[dist > 0]
    if eligible.size < _MIN_NEIGHBORS:
        raise InsufficientDonorsError(
            f"insufficient donors: {eligible.size} eligible around target {target:g}"
        )
    k = min(_nn_count(fraction, x.size), eligible.size)
    return float(np.partition(eligible, k - 1)[k - 1])


def _raw_row(x, target, kernel, radius):
    """Closed-form local linear row, or None if the local design is singular."""
    u = (x - target) / radius
    w = kernel.fn(u)
    s0 = w.sum()
    s1 = (w * u).sum()
    s2 = (w * u * u).sum()
    det = s0 * s2 - s1 * s1
    if not det > _SINGULAR_RTOL * s0 * s2:
        return None
    return w * (s2 - u * s1) / det


def weight_row(donors_x, target: float, kernel: Kernel, bw: Bandwidth) -> WeightRow:
    """Local linear weights over the donors at one target point.

    A too-narrow constant bandwidth fails hard; a nearest-neighbor bandwidth
    widens the neighbor count one step at a time until the local design
    becomes nonsingular.
    """
    x = np.asarray(donors_x, dtype=float)
    target = float(target)
    if bw.kind == CONSTANT:
        row = _raw_row(x, target, kernel, bw.value)
        if row is None:
            raise DegenerateFitError(f"bandwidth too small at target {target:g}")
        return WeightRow(row, target)
    dist = np.abs(x - target)
    eligible = np.sort(dist[dist > 0])
    if eligible.size < _MIN_NEIGHBORS:
        raise InsufficientDonorsError(
            f"insufficient donors: {eligible.size} eligible around target {target:g}"
        )
    k0 = min(_nn_count(bw.value, x.size), eligible.size)
    for k in range(k0, eligible.size + 1):
        row = _raw_row(x, target, kernel, eligible[k - 1])
        if row is not None:
            if k > k0:
                logger.debug(
                    "expanded neighbor count %d -> %d at target %g", k0, k, target
                )
            return WeightRow(row, target)
    raise DegenerateFitError(f"singular local design at target {target:g}")


def _nn_radii(abs_d: np.ndarray, fraction: float, n_for_count: int) -> np.ndarray:
    """Per-target nearest-neighbor radii from a |target - donor| matrix."""
    mask = abs_d > 0
    counts = mask.sum(axis=1)
    short = counts < _MIN_NEIGHBORS
    if short.any():
        i = int(np.argmax(short))
        raise InsufficientDonorsError(
            f"insufficient donors: {counts[i]} eligible (target index {i})"
        )
    ks = np.minimum(_nn_count(fraction, n_for_count), counts)
    ordered = np.sort(np.where(mask, abs_d, np.inf), axis=1)
    return ordered[np.arange(abs_d.shape[0]), ks - 1]


def smoothing_rows(donors_x, eval_points, kernel: Kernel, bw: Bandwidth) -> np.ndarray:
    """Stack weight rows for many targets against one donor set.

    Vectorized fast path; rows whose local design fails the determinant check
    fall back to :func:`weight_row` (which expands NN neighborhoods or raises).
    """
    x = np.asarray(donors_x, dtype=float)
    t = np.atleast_1d(np.asarray(eval_points, dtype=float))
    d = x[np.newaxis, :] - t[:, np.newaxis]
    if bw.kind == CONSTANT:
        radius = np.full(t.size, bw.value)
    else:
        radius = _nn_radii(np.abs(d), bw.value, x.size)
    u = d / radius[:, np.newaxis]
    w = kernel.fn(u)
    s0 = w.sum(axis=1)
    s1 = (w * u).sum(axis=1)
    s2 = (w * u * u).sum(axis=1)
    det = s0 * s2 - s1 * s1
    good = det > _SINGULAR_RTOL * s0 * s2
    rows = (
        w
        * (s2[:, np.newaxis] - u * s1[:, np.newaxis])
        / np.where(good, det, 1.0)[:, np.newaxis]
    )
    for i in np.flatnonzero(~good):
        rows[i] = weight_row(x, t[i], kernel, bw).weights
    return rows


def smoothing_matrix(donors: GroupSample, eval_points, kernel: Kernel, bw: Bandwidth) -> np.ndarray:
    """Smoothing matrix of shape (len(eval_points), n_donors)."""
    return smoothing_rows(donors.x, eval_points, kernel, bw)


def fit(donors: GroupSample, eval_points, kernel: Kernel, bw: Bandwidth) -> np.ndarray:
    """Local linear fit of the donor outcomes at the evaluation points."""
    return smoothing_rows(donors.x, eval_points, kernel, bw) @ donors.y


def loo_fit(group: GroupSample, kernel: Kernel, bw: Bandwidth) -> np.ndarray:
    """Leave-one-out fits at the group's own covariates.

    Entry i is the fit at x_i with observation i removed from the donors.
    Nearest-neighbor radii are recomputed on the reduced donor set with the
    same fraction.
    """
    if group.n < 4:
        raise InsufficientDonorsError("leave-one-out needs at least 4 observations")
    x, y = group.x, group.y
    n = x.size
    d = x[np.newaxis, :] - x[:, np.newaxis]
    if bw.kind == CONSTANT:
        radius = np.full(n, bw.value)
    else:
        # self-distances are zero, so the eligibility mask drops them
        radius = _nn_radii(np.abs(d), bw.value, n - 1)
    u = d / radius[:, np.newaxis]
    w = kernel.fn(u)
    np.fill_diagonal(w, 0.0)
    s0 = w.sum(axis=1)
    s1 = (w * u).sum(axis=1)
    s2 = (w * u * u).sum(axis=1)
    det = s0 * s2 - s1 * s1
    good = det > _SINGULAR_RTOL * s0 * s2
    rows = (
        w
        * (s2[:, np.newaxis] - u * s1[:, np.newaxis])
        / np.where(good, det, 1.0)[:, np.newaxis]
    )
    fitted = rows @ y
    for i in np.flatnonzero(~good):
        keep = np.arange(n) != i
        fitted[i] = weight_row(x[keep], x[i], kernel, bw).weights @ y[keep]
    return fitted
