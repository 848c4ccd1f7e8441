"""Replication harness: data generation, method comparison, significance stars.

Each replicate draws a dataset, lets every requested selection method pick
its bandwidths on that same dataset, computes the imputation estimate, and
applies the least-squares control variate. Replicates are seeded
independently (counter-based), so results are identical no matter how many
worker processes run them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .criteria import GroupSweep, joint_tau_surface
from .designs import DesignSpec, design, design_sigma2, oracle_truth, true_tau
from .errors import NumericalError
from .estimators import Dataset, imputation_tau, ols_control_variate
from .kernels import Kernel, TRICUBE, get_kernel
from .smoothing import Bandwidth
from .selection import (
    BandwidthGrid,
    paper_grid,
    selection_from_surface,
    selection_from_values,
)

__all__ = [
    "METHODS",
    "ORACLE_METHODS",
    "ReplicationResult",
    "StarAnnotation",
    "ComparisonTable",
    "generate",
    "run_campaign",
    "paired_onesided_p",
    "significance_stars",
]

logger = logging.getLogger(__name__)

METHODS = ("m_y", "m_beta", "m_tau", "cv", "inr", "ds_beta", "ds_tau")
ORACLE_METHODS = frozenset({"m_y", "m_beta", "m_tau"})
_LOO_METHODS = frozenset({"cv", "ds_beta", "ds_tau"})

_GENERATE_STRIDE = 2**32  # seed offset between in-generate redraws
_REPLICATE_STRIDE = 2**40  # seed offset between whole-replicate redraws
_MIN_GROUP = 5
_MAX_GENERATE_ATTEMPTS = 100
_MAX_REPLICATE_REDRAWS = 20
_MIN_STAR_REPLICATES = 30


def generate(spec: DesignSpec, n: int, sigma_eps2: float, seed: int) -> Dataset:
    """Draw one dataset from a design; redraw on a tiny treatment arm.

    Covariates are uniform on (0, 2*pi), treatment is Bernoulli at the design
    propensity, noise is centered normal. Deterministic given the seed.
    """
    if n < 10:
        raise ValueError("need at least 10 observations")
    for attempt in range(_MAX_GENERATE_ATTEMPTS):
        rng = np.random.default_rng(np.random.Philox(key=seed + attempt * _GENERATE_STRIDE))
        x = rng.uniform(0.0, 2.0 * np.pi, n)
        z = (rng.random(n) < spec.propensity(x)).astype(np.int64)
        eps = rng.normal(0.0, np.sqrt(sigma_eps2), n)
        y = spec.beta0(x) + spec.tau(x) * z + eps
        n1 = int(z.sum())
        if min(n1, n - n1) >= _MIN_GROUP:
            return Dataset(x, y, z)
        logger.debug(
            "design %d seed %d attempt %d: group sizes (%d, %d), redrawing",
            spec.id, seed, attempt, n1, n - n1,
        )
    raise NumericalError(
        f"design {spec.id}: degenerate treatment groups after "
        f"{_MAX_GENERATE_ATTEMPTS} redraws"
    )


@dataclass(frozen=True)
class ReplicationResult:
    """One method's estimate on one replicate."""

    method: str
    replicate: int
    seed: int
    h1: float
    h0: float
    tau_hat: float
    tau_ols: float
    tau_cv: float


@dataclass(frozen=True)
class StarAnnotation:
    """Best method of a comparison and its significance against the runner-up."""

    best: str
    runner_up: Optional[str]
    stars: str
    p_value: Optional[float]


@dataclass(frozen=True)
class ComparisonTable:
    """Per-method empirical MSE decomposition over a campaign's replicates."""

    true_tau: float
    methods: Tuple[str, ...]
    records: Tuple[ReplicationResult, ...]
    redraws: int
    stars: Optional[StarAnnotation]

    def estimates(self, method: str) -> np.ndarray:
        return np.array([r.tau_cv for r in self.records if r.method == method])

    def squared_errors(self, method: str) -> np.ndarray:
        return (self.estimates(method) - self.true_tau) ** 2

    def mse(self, method: str) -> float:
        return float(self.squared_errors(method).mean())

    def bias(self, method: str) -> float:
        return float(self.estimates(method).mean() - self.true_tau)

    def variance(self, method: str) -> float:
        est = self.estimates(method)
        return float(((est - est.mean()) ** 2).mean())

    def summary(self) -> Dict[str, Tuple[float, float, float]]:
        return {m: (self.mse(m), self.bias(m), self.variance(m)) for m in self.methods}


def paired_onesided_p(a, b) -> float:
    """One-sided paired t-test p-value that mean(a) is below mean(b).

    Degenerate difference vectors (zero spread) give 0 when a is strictly
    smaller and 1 otherwise.
    """
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 0.0 if d.mean() < 0 else 1.0
    t = d.mean() / (sd / np.sqrt(d.size))
    return float(stats.t.cdf(t, d.size - 1))


def significance_stars(squared_errors_by_method: Mapping[str, np.ndarray]) -> StarAnnotation:
    """Annotate the lowest-MSE method: ** below 1%, * below 5%, else nothing.

    The test is one-sided and paired on per-replicate squared-error
    differences against the runner-up. Fewer than 30 replicates (or fewer
    than two methods) suppresses the test and flags it n/a.
    """
    means = {m: float(np.mean(v)) for m, v in squared_errors_by_method.items()}
    ordered = sorted(means, key=lambda m: (means[m], m))
    best = ordered[0]
    replicates = len(np.asarray(squared_errors_by_method[best]))
    if len(ordered) < 2 or replicates < _MIN_STAR_REPLICATES:
        return StarAnnotation(best, None, "n/a", None)
    runner_up = ordered[1]
    p = paired_onesided_p(
        squared_errors_by_method[best], squared_errors_by_method[runner_up]
    )
    stars = "**" if p < 0.01 else "*" if p < 0.05 else ""
    return StarAnnotation(best, runner_up, stars, p)


def select_bandwidth_pairs(
    methods: Sequence[str],
    sweep1: GroupSweep,
    sweep0: GroupSweep,
    grid: BandwidthGrid,
    sigma2_1: float,
    sigma2_0: float,
) -> Dict[str, Tuple[float, float]]:
    """Selected (h1, h0) per method from precomputed sweeps.

    The noise variance may differ per arm (estimated variances on real data);
    the oracle criteria receive the same true value for both.
    """
    chosen: Dict[str, Tuple[float, float]] = {}

    def per_group(surf1, surf0):
        s1 = selection_from_values(surf1, grid)
        s0 = selection_from_values(surf0, grid)
        return s1.h_star.value, s0.h_star.value

    pilots = None
    if any(m in _LOO_METHODS for m in methods):
        pilot1 = selection_from_values(sweep1.cv_surface(), grid).h_star
        pilot0 = selection_from_values(sweep0.cv_surface(), grid).h_star
        pilots = (pilot1, pilot0)

    for method in methods:
        if method == "m_y":
            chosen[method] = per_group(sweep1.my_surface(sigma2_1), sweep0.my_surface(sigma2_0))
        elif method == "m_beta":
            chosen[method] = per_group(
                sweep1.mbeta_surface(sigma2_1), sweep0.mbeta_surface(sigma2_0)
            )
        elif method == "m_tau":
            surface = joint_tau_surface(
                sweep1.var_surface(sigma2_1),
                sweep1.bias_avg_oracle,
                sweep0.var_surface(sigma2_0),
                sweep0.bias_avg_oracle,
            )
            pair = selection_from_surface(surface, grid, grid).h_star
            chosen[method] = (pair[0].value, pair[1].value)
        elif method == "cv":
            chosen[method] = (pilots[0].value, pilots[1].value)
        elif method == "inr":
            chosen[method] = per_group(
                sweep1.inr_surface(sigma2_1), sweep0.inr_surface(sigma2_0)
            )
        elif method == "ds_beta":
            chosen[method] = per_group(
                sweep1.ds_surface(sigma2_1, pilots[0]), sweep0.ds_surface(sigma2_0, pilots[1])
            )
        elif method == "ds_tau":
            surface = joint_tau_surface(
                sweep1.var_surface(sigma2_1),
                sweep1.ds_bias_avgs(pilots[0]),
                sweep0.var_surface(sigma2_0),
                sweep0.ds_bias_avgs(pilots[1]),
            )
            pair = selection_from_surface(surface, grid, grid).h_star
            chosen[method] = (pair[0].value, pair[1].value)
        else:
            raise ValueError(f"unknown method {method!r}")
    return chosen


def _evaluate_replicate(
    spec: DesignSpec,
    data: Dataset,
    methods: Sequence[str],
    grid: BandwidthGrid,
    kernel: Kernel,
    sigma2: float,
    tau: float,
    replicate: int,
    seed: int,
) -> Tuple[ReplicationResult, ...]:
    truth = oracle_truth(spec, sigma2) if any(m in ORACLE_METHODS for m in methods) else None
    with_loo = any(m in _LOO_METHODS for m in methods)
    with_rows = any(m != "cv" for m in methods)
    p1 = p0 = None
    if "inr" in methods:
        p1 = spec.propensity(data.group(1).x)
        p0 = 1.0 - spec.propensity(data.group(0).x)
    sweep1 = GroupSweep(
        data, 1, kernel, grid, truth=truth, arm_propensity=p1,
        with_loo=with_loo, with_rows=with_rows,
    )
    sweep0 = GroupSweep(
        data, 0, kernel, grid, truth=truth, arm_propensity=p0,
        with_loo=with_loo, with_rows=with_rows,
    )

    chosen = select_bandwidth_pairs(methods, sweep1, sweep0, grid, sigma2, sigma2)
    tau_ols = ols_control_variate(data, spec.basis)
    out = []
    for method in methods:
        h1, h0 = chosen[method]
        est = imputation_tau(data, kernel, Bandwidth(grid.kind, h1), Bandwidth(grid.kind, h0))
        tau_cv = est.tau_hat - (tau_ols - tau)
        out.append(
            ReplicationResult(method, replicate, seed, h1, h0, est.tau_hat, tau_ols, tau_cv)
        )
    return tuple(out)


def _run_replicate(
    spec: DesignSpec,
    n: int,
    methods: Sequence[str],
    grid: BandwidthGrid,
    kernel: Kernel,
    sigma2: float,
    tau: float,
    replicate: int,
    base_seed: int,
) -> Tuple[Tuple[ReplicationResult, ...], int]:
    seed = base_seed + replicate
    for redraw in range(_MAX_REPLICATE_REDRAWS):
        draw_seed = seed + redraw * _REPLICATE_STRIDE
        data = generate(spec, n, sigma2, draw_seed)
        try:
            rows = _evaluate_replicate(
                spec, data, methods, grid, kernel, sigma2, tau, replicate, draw_seed
            )
            return rows, redraw
        except NumericalError as exc:
            logger.warning("replicate %d (seed %d) redrawn: %s", replicate, draw_seed, exc)
    raise NumericalError(
        f"replicate {replicate} failed after {_MAX_REPLICATE_REDRAWS} redraws"
    )


def _replicate_task(args) -> Tuple[Tuple[ReplicationResult, ...], int]:
    (design_id, damped, n, methods, grid_values, grid_kind, kernel_name,
     sigma2, tau, replicate, base_seed) = args
    spec = design(design_id, damp_propensity=damped)
    grid = BandwidthGrid(np.asarray(grid_values), grid_kind)
    kernel = get_kernel(kernel_name)
    return _run_replicate(spec, n, methods, grid, kernel, sigma2, tau, replicate, base_seed)


def run_campaign(
    spec: DesignSpec,
    n: int,
    methods: Sequence[str],
    replicates: int,
    base_seed: int,
    *,
    kernel: Kernel = TRICUBE,
    grid: Optional[BandwidthGrid] = None,
    threads: int = 1,
) -> ComparisonTable:
    """Run a method-comparison campaign on one design.

    All methods see the same dataset within a replicate; replicate seeds are
    base_seed + index, so output does not depend on the worker count.
    """
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if grid is None:
        grid = paper_grid(n)
    sigma2 = design_sigma2(spec)
    tau = true_tau(spec)

    tasks = [
        (
            spec.id, spec.damped, n, methods, tuple(grid.values), grid.kind,
            kernel.name, sigma2, tau, r, base_seed,
        )
        for r in range(replicates)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_replicate_task, tasks, chunksize=1))
    else:
        outcomes = [_replicate_task(t) for t in tasks]

    records = tuple(row for rows, _ in outcomes for row in rows)
    redraws = sum(r for _, r in outcomes)
    errors = {m: np.array([
        (rec.tau_cv - tau) ** 2 for rec in records if rec.method == m
    ]) for m in methods}
    stars = significance_stars(errors) if methods else None
    return ComparisonTable(tau, methods, records, redraws, stars)
