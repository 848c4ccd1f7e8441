"""Bandwidth grids and deterministic argmin search, single and joint."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from .criteria import cv_score
from .errors import NumericalError
from .kernels import Kernel
from .smoothing import Bandwidth, GroupSample, NN_FRACTION

__all__ = [
    "BandwidthGrid",
    "Selection",
    "paper_grid",
    "selection_from_values",
    "selection_from_surface",
    "select_single",
    "select_joint",
    "select_pilot",
]


@dataclass(frozen=True)
class BandwidthGrid:
    """Strictly ascending candidate bandwidth values of one kind."""

    values: np.ndarray
    kind: str = NN_FRACTION

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("grid values must form a nonempty vector")
        if not np.all(np.diff(values) > 0):
            raise ValueError("grid values must be strictly ascending")
        if values[0] <= 0:
            raise ValueError("grid values must be positive")
        if self.kind == NN_FRACTION and values[-1] > 1:
            raise ValueError("nearest-neighbor fractions cannot exceed 1")
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return self.values.size

    def bandwidth(self, i: int) -> Bandwidth:
        return Bandwidth(self.kind, float(self.values[i]))


def paper_grid(n: int) -> BandwidthGrid:
    """The 40-point nearest-neighbor fraction grid used by the replication harness.

    Samples below 500 use [0.1, 1]; larger samples use [0.02, 1]. Both
    endpoints are included.
    """
    lo = 0.1 if n < 500 else 0.02
    return BandwidthGrid(np.linspace(lo, 1.0, 40), NN_FRACTION)


@dataclass(frozen=True)
class Selection:
    """Argmin over a criterion surface; infeasible entries are NaN.

    Ties break toward smaller bandwidths (lexicographically for pairs).
    """

    h_star: Union[Bandwidth, Tuple[Bandwidth, Bandwidth]]
    surface: np.ndarray
    argmin_index: Union[int, Tuple[int, int]]


def selection_from_values(values, grid: BandwidthGrid) -> Selection:
    """Deterministic argmin over a single-bandwidth surface."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.count,):
        raise ValueError("surface shape does not match the grid")
    if not np.isfinite(values).any():
        raise NumericalError("all grid points infeasible")
    idx = int(np.nanargmin(values))
    return Selection(grid.bandwidth(idx), values, idx)


def selection_from_surface(surface, grid1: BandwidthGrid, grid0: BandwidthGrid) -> Selection:
    """Deterministic argmin over a bandwidth-pair surface."""
    surface = np.asarray(surface, dtype=float)
    if surface.shape != (grid1.count, grid0.count):
        raise ValueError("surface shape does not match the grids")
    if not np.isfinite(surface).any():
        raise NumericalError("all grid points infeasible")
    flat = int(np.nanargmin(surface))
    i1, i0 = np.unravel_index(flat, surface.shape)
    return Selection(
        (grid1.bandwidth(int(i1)), grid0.bandwidth(int(i0))),
        surface,
        (int(i1), int(i0)),
    )


def select_single(evaluate: Callable[[Bandwidth], float], grid: BandwidthGrid) -> Selection:
    """Evaluate a criterion on every grid value and take the argmin.

    Grid points where the criterion raises a numerical error are recorded as
    NaN and skipped.
    """
    values = np.full(grid.count, np.nan)
    for i in range(grid.count):
        try:
            values[i] = float(evaluate(grid.bandwidth(i)))
        except NumericalError:
            continue
    return selection_from_values(values, grid)


def select_joint(
    evaluate: Callable[[Bandwidth, Bandwidth], float],
    grid1: BandwidthGrid,
    grid0: BandwidthGrid,
) -> Selection:
    """Evaluate a pair criterion on the full grid product and take the argmin."""
    surface = np.full((grid1.count, grid0.count), np.nan)
    for i in range(grid1.count):
        for k in range(grid0.count):
            try:
                surface[i, k] = float(evaluate(grid1.bandwidth(i), grid0.bandwidth(k)))
            except NumericalError:
                continue
    return selection_from_surface(surface, grid1, grid0)


def select_pilot(group: GroupSample, kernel: Kernel, grid: BandwidthGrid) -> Bandwidth:
    """Cross-validation choice of a pilot bandwidth for one group."""
    chosen = select_single(lambda bw: cv_score(group, kernel, bw), grid)
    return chosen.h_star
