"""Command-line front end: fit, criterion sweeps, simulation campaigns, constants.

All output is CSV with a stable column order, newline-terminated rows and
floats at 17 significant digits (round-trip exact). Infeasible entries are
written as empty cells with a status column; NaN is never emitted.

Exit codes: 0 success, 2 input error, 3 numerical/degeneracy error,
4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .criteria import GroupSweep, fit_logistic_propensity, joint_tau_surface
from .designs import DESIGN_IDS, design, design_sigma2, oracle_truth, population_model, true_tau
from .errors import InputError, NumericalError
from .estimators import Dataset, imputation_tau, residual_variance
from .asymptotics import asym_constants, h_opt
from .kernels import get_kernel
from .selection import (
    BandwidthGrid,
    paper_grid,
    selection_from_surface,
    selection_from_values,
)
from .simulation import (
    METHODS,
    ORACLE_METHODS,
    generate,
    run_campaign,
    select_bandwidth_pairs,
)
from .smoothing import Bandwidth, CONSTANT, NN_FRACTION

__all__ = ["main", "entrypoint"]

logger = logging.getLogger(__name__)

THREADS_ENV = "CAUSALBW_THREADS"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

_DATA_DRIVEN = ("cv", "inr", "ds_beta", "ds_tau")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for input
    # files and uses 4 for configuration problems
    def error(self, message):
        raise ConfigError(message)


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def fmt4(value: float) -> str:
    return format(float(value), ".4g")


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def load_dataset(path: str) -> Dataset:
    """Read an `x,y,z` CSV; errors cite the offending line number."""
    xs: List[float] = []
    ys: List[float] = []
    zs: List[int] = []
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["x", "y", "z"]:
            raise InputError(f"{path}: line 1: expected header 'x,y,z'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: non-numeric x or y") from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise InputError(f"{path}: line {lineno}: x and y must be finite")
            if row[2].strip() not in ("0", "1"):
                raise InputError(f"{path}: line {lineno}: z must be 0 or 1, got {row[2]!r}")
            xs.append(x)
            ys.append(y)
            zs.append(int(row[2]))
    if not xs:
        raise InputError(f"{path}: no data rows")
    return Dataset(np.array(xs), np.array(ys), np.array(zs, dtype=np.int64))


def parse_grid(text: str, kind: str) -> BandwidthGrid:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--grid expects lo:hi:count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError("--grid expects numeric lo:hi:count") from None
    if count < 1 or not lo < hi:
        raise ConfigError("--grid needs lo < hi and count >= 1")
    return BandwidthGrid(np.linspace(lo, hi, count), kind)


def _resolve_grid(args, n: int, kind: str) -> BandwidthGrid:
    if args.grid:
        return parse_grid(args.grid, kind)
    if kind == CONSTANT:
        raise ConfigError("--grid is required for constant bandwidths")
    return paper_grid(n)


def _split_methods(text: str, allowed: Sequence[str]) -> Tuple[str, ...]:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    if not methods:
        raise ConfigError("--methods must name at least one method")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
    bad = [m for m in methods if m not in allowed]
    if bad:
        raise ConfigError(f"methods {bad} not usable here; choose from {list(allowed)}")
    return methods


def _data_sweeps(data: Dataset, kernel, grid, methods) -> Tuple[GroupSweep, GroupSweep, float, float]:
    """Sweeps plus per-arm estimated noise variances for file-backed data."""
    p1 = p0 = None
    if "inr" in methods:
        p_hat = fit_logistic_propensity(data.x, data.z)
        p1 = p_hat[data.arm_indices(1)]
        p0 = 1.0 - p_hat[data.arm_indices(0)]
    with_rows = any(m != "cv" for m in methods)
    sweep1 = GroupSweep(data, 1, kernel, grid, arm_propensity=p1, with_rows=with_rows)
    sweep0 = GroupSweep(data, 0, kernel, grid, arm_propensity=p0, with_rows=with_rows)
    cv1 = selection_from_values(sweep1.cv_surface(), grid).h_star
    cv0 = selection_from_values(sweep0.cv_surface(), grid).h_star
    sigma2_1 = residual_variance(data.group(1), kernel, cv1)
    sigma2_0 = residual_variance(data.group(0), kernel, cv0)
    return sweep1, sweep0, sigma2_1, sigma2_0


def cmd_fit(args) -> int:
    data = load_dataset(args.input)
    kernel = get_kernel(args.kernel)
    methods = _split_methods(args.methods, _DATA_DRIVEN)
    if len(methods) != 1:
        raise ConfigError("fit takes exactly one method")
    method = methods[0]
    grid = _resolve_grid(args, data.n, args.bandwidth_kind)
    sweep1, sweep0, sigma2_1, sigma2_0 = _data_sweeps(data, kernel, grid, methods)
    chosen = select_bandwidth_pairs(methods, sweep1, sweep0, grid, sigma2_1, sigma2_0)
    h1, h0 = chosen[method]
    estimate = imputation_tau(data, kernel, Bandwidth(grid.kind, h1), Bandwidth(grid.kind, h0))
    _write_csv(
        args.out,
        ["method", "h1", "h0", "tau_hat", "sigma2_hat_1", "sigma2_hat_0"],
        [[method, fmt(h1), fmt(h0), fmt(estimate.tau_hat), fmt(sigma2_1), fmt(sigma2_0)]],
    )
    print(f"{method}: tau_hat = {fmt4(estimate.tau_hat)} (h1 = {fmt4(h1)}, h0 = {fmt4(h0)})")
    return EXIT_OK


def _criteria_surfaces(args, data: Dataset, spec, method: str, kernel, grid):
    """Variance/bias/total surfaces plus the argmin for one criterion."""
    n = data.n
    if spec is not None:
        sigma2 = design_sigma2(spec)
        truth = oracle_truth(spec, sigma2) if method in ORACLE_METHODS else None
        p1 = spec.propensity(data.group(1).x) if method == "inr" else None
        p0 = 1.0 - spec.propensity(data.group(0).x) if method == "inr" else None
        sweep1 = GroupSweep(data, 1, kernel, grid, truth=truth, arm_propensity=p1)
        sweep0 = GroupSweep(data, 0, kernel, grid, truth=truth, arm_propensity=p0)
        sigma2_1 = sigma2_0 = sigma2
    else:
        if method in ORACLE_METHODS:
            raise ConfigError(f"criterion {method} needs --design (oracle truth)")
        sweep1, sweep0, sigma2_1, sigma2_0 = _data_sweeps(data, kernel, grid, (method,))

    pilot1 = pilot0 = None
    if method in ("ds_beta", "ds_tau", "cv"):
        pilot1 = selection_from_values(sweep1.cv_surface(), grid).h_star
        pilot0 = selection_from_values(sweep0.cv_surface(), grid).h_star

    if method in ("m_tau", "ds_tau"):
        if method == "m_tau":
            b1, b0 = sweep1.bias_avg_oracle, sweep0.bias_avg_oracle
        else:
            b1, b0 = sweep1.ds_bias_avgs(pilot1), sweep0.ds_bias_avgs(pilot0)
        var = sweep1.var_surface(sigma2_1)[:, None] + sweep0.var_surface(sigma2_0)[None, :]
        bias = (b1[:, None] - b0[None, :]) ** 2
        total = var + bias
        sel = selection_from_surface(total, grid, grid)
        return ("joint", var, bias, total, sel)

    sweep = sweep1 if args.arm == 1 else sweep0
    sigma2_arm = sigma2_1 if args.arm == 1 else sigma2_0
    pilot = pilot1 if args.arm == 1 else pilot0
    if method == "cv":
        total = sweep.cv_surface()
        var = bias = np.full_like(total, np.nan)
    elif method == "m_y":
        var = sigma2_arm / sweep.group.n * sweep.frob_grp
        bias = sweep.bias_y_meansq
        total = var + bias
    elif method == "m_beta":
        var = sweep.var_surface(sigma2_arm)
        bias = sweep.bias_avg_oracle**2
        total = var + bias
    elif method == "inr":
        var = sweep.var_surface(sigma2_arm)
        total = sweep.inr_surface(sigma2_arm)
        bias = total - var
    else:  # ds_beta
        var = sweep.var_surface(sigma2_arm)
        bias = sweep.ds_bias_avgs(pilot) ** 2
        total = var + bias
    sel = selection_from_values(total, grid)
    return ("single", var, bias, total, sel)


def cmd_criteria(args) -> int:
    kernel = get_kernel(args.kernel)
    methods = _split_methods(args.methods, METHODS)
    if len(methods) != 1:
        raise ConfigError("criteria takes exactly one method")
    method = methods[0]
    spec = None
    if args.input:
        data = load_dataset(args.input)
    elif args.design:
        if not args.n:
            raise ConfigError("--n is required with --design")
        spec = design(args.design, damp_propensity=args.damp_propensity)
        data = generate(spec, args.n, design_sigma2(spec), args.seed)
    else:
        raise ConfigError("criteria needs --input or --design")
    grid = _resolve_grid(args, data.n, args.bandwidth_kind)

    shape, var, bias, total, sel = _criteria_surfaces(args, data, spec, method, kernel, grid)

    def cells(v, b, t):
        if not np.isfinite(t):
            return ["", "", "", "infeasible"]
        var_cell = fmt(v) if np.isfinite(v) else ""
        bias_cell = fmt(b) if np.isfinite(b) else ""
        return [var_cell, bias_cell, fmt(t), "ok"]

    rows = []
    if shape == "single":
        for i in range(grid.count):
            selected = "1" if i == sel.argmin_index else "0"
            rows.append(
                [fmt(grid.values[i])] + cells(var[i], bias[i], total[i]) + [selected]
            )
        header = ["h", "variance", "bias_sq", "total", "status", "selected"]
    else:
        for i in range(grid.count):
            for k in range(grid.count):
                selected = "1" if (i, k) == sel.argmin_index else "0"
                rows.append(
                    [fmt(grid.values[i]), fmt(grid.values[k])]
                    + cells(var[i, k], bias[i, k], total[i, k])
                    + [selected]
                )
        header = ["h1", "h0", "variance", "bias_sq", "total", "status", "selected"]
    _write_csv(args.out, header, rows)
    print(f"{method}: wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not args.design:
        raise ConfigError("simulate needs --design")
    if not args.n:
        raise ConfigError("simulate needs --n")
    spec = design(args.design, damp_propensity=args.damp_propensity)
    methods = _split_methods(args.methods, METHODS)
    grid = parse_grid(args.grid, NN_FRACTION) if args.grid else paper_grid(args.n)
    kernel = get_kernel(args.kernel)
    table = run_campaign(
        spec, args.n, methods, args.replicates, args.seed,
        kernel=kernel, grid=grid, threads=args.threads,
    )
    os.makedirs(args.out, exist_ok=True)

    rep_rows = [
        [r.method, str(r.replicate), str(r.seed), fmt(r.h1), fmt(r.h0),
         fmt(r.tau_hat), fmt(r.tau_ols), fmt(r.tau_cv)]
        for r in table.records
    ]
    _write_csv(
        os.path.join(args.out, "replicates.csv"),
        ["method", "replicate", "seed", "h1", "h0", "tau_imp", "tau_ols", "tau_cv"],
        rep_rows,
    )

    summary_rows = []
    for method in table.methods:
        stars = ""
        if table.stars is not None and method == table.stars.best:
            stars = table.stars.stars
        summary_rows.append(
            [method, str(args.replicates), fmt(table.mse(method)),
             fmt(table.bias(method)), fmt(table.variance(method)), stars]
        )
    _write_csv(
        os.path.join(args.out, "summary.csv"),
        ["method", "replicates", "mse", "bias", "variance", "stars"],
        summary_rows,
    )

    print(f"design {args.design}, n = {args.n}, {args.replicates} replicates "
          f"(true tau = {fmt4(table.true_tau)}, redraws = {table.redraws})")
    for method in table.methods:
        stars = ""
        if table.stars is not None and method == table.stars.best:
            stars = table.stars.stars
        print(f"  {method:8s} mse = {fmt4(table.mse(method)):>10s}  "
              f"bias = {fmt4(table.bias(method)):>10s}  "
              f"var = {fmt4(table.variance(method)):>10s}  {stars}")
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    if not args.n:
        raise ConfigError("asymptotics needs --n for the optimal bandwidth")
    kernel = get_kernel(args.kernel)
    ids = [args.design] if args.design else list(DESIGN_IDS)
    rows = []
    for design_id in ids:
        spec = design(design_id, damp_propensity=args.damp_propensity)
        model = population_model(spec)
        for arm in (1, 0):
            constants = asym_constants(model, kernel, arm)
            # curvature that integrates to ~0 over the support leaves only
            # quadrature noise in B1; no interior optimum exists then
            if abs(constants.b1) <= 1e-8:
                h_cell, status = "", "no-interior-optimum"
            else:
                h_cell, status = fmt(h_opt(constants.b1, constants.v2, args.n)), "ok"
            rows.append(
                [str(design_id), str(arm), fmt(constants.b1), fmt(constants.v1),
                 fmt(constants.v2), fmt(constants.v3), h_cell, status]
            )
    _write_csv(args.out, ["design", "group", "B1", "V1", "V2", "V3", "h_opt", "status"], rows)
    print(f"wrote constants for designs {ids} to {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="causalbw",
        description="Targeted bandwidth selection for average causal effect estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, out_default):
        p.add_argument("--input", help="CSV file with header x,y,z")
        p.add_argument("--design", type=int, choices=DESIGN_IDS, help="simulation design id")
        p.add_argument("--n", type=int, help="sample size")
        p.add_argument("--replicates", type=int, default=200)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--methods", default="cv", help="comma-separated method names")
        p.add_argument("--kernel", default="tricube")
        p.add_argument("--bandwidth-kind", choices=(NN_FRACTION, CONSTANT), default=NN_FRACTION)
        p.add_argument("--grid", help="bandwidth grid as lo:hi:count")
        p.add_argument("--damp-propensity", action="store_true",
                       help="damp the design propensity to [0.2, 0.8]")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get(THREADS_ENV, "1")))
        p.add_argument("--arm", type=int, choices=(0, 1), default=1,
                       help="treatment arm for per-arm criterion surfaces")
        p.add_argument("--out", default=out_default, help="output path")

    p_fit = sub.add_parser("fit", help="estimate the average effect from a CSV file")
    common(p_fit, out_default="fit.csv")
    p_fit.set_defaults(func=cmd_fit)

    p_crit = sub.add_parser("criteria", help="emit a criterion surface over the grid")
    common(p_crit, out_default="criteria.csv")
    p_crit.set_defaults(func=cmd_criteria)

    p_sim = sub.add_parser("simulate", help="run a replication campaign")
    common(p_sim, out_default="simulation")
    p_sim.set_defaults(func=cmd_simulate)

    p_asym = sub.add_parser("asymptotics", help="print constants and optimal bandwidths")
    common(p_asym, out_default="asymptotics.csv")
    p_asym.set_defaults(func=cmd_asymptotics)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "fit" and not args.input:
            raise ConfigError("fit needs --input")
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
