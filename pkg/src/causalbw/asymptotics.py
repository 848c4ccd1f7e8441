"""Asymptotic constants, leading-order MSE expansions and the optimal rate.

The group-mean estimator's conditional bias scales like B1 h^2 and its
conditional variance like V1/n + V2/(n^2 h) + V3 h^2/n; the constants are
integrals of the population quantities against the kernel moments. Only the
leading-order terms are computed (remainders are dropped).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError, OverlapViolationError
from .kernels import Kernel, kernel_moment2, kernel_roughness

__all__ = [
    "AsymptoticConstants",
    "PopulationModel",
    "asym_constants",
    "h_opt",
    "asym_mse_beta",
    "asym_mse_tau",
    "consistency_exponents",
    "is_sqrt_n_consistent",
]

_QUAD_KW = dict(epsabs=1e-9, epsrel=1e-9, limit=2000)


@dataclass(frozen=True)
class AsymptoticConstants:
    """Bias and variance constants of one arm's group-mean estimator."""

    b1: float
    v1: float
    v2: float
    v3: float
    arm: int


@dataclass(frozen=True)
class PopulationModel:
    """Population quantities needed by the asymptotic constants.

    Derivative closures are optional; when absent they are replaced by
    central differences with step 1e-5 times the support length.
    """

    beta1: Callable
    beta0: Callable
    propensity: Callable
    sigma2: float
    density: Callable
    support: Tuple[float, float]
    beta1_dd: Optional[Callable] = None
    beta0_dd: Optional[Callable] = None
    propensity_d: Optional[Callable] = None
    density_d: Optional[Callable] = None

    def arm_probability(self, arm: int) -> Callable:
        if arm == 1:
            return self.propensity
        return lambda x: 1.0 - self.propensity(x)

    def arm_probability_d(self, arm: int) -> Optional[Callable]:
        if self.propensity_d is None:
            return None
        if arm == 1:
            return self.propensity_d
        return lambda x: -self.propensity_d(x)


def _first_diff(f: Callable, step: float) -> Callable:
    return lambda x: (f(x + step) - f(x - step)) / (2.0 * step)


def _second_diff(f: Callable, step: float) -> Callable:
    return lambda x: (f(x + step) - 2.0 * f(x) + f(x - step)) / step**2


def asym_constants(model: PopulationModel, kernel: Kernel, arm: int) -> AsymptoticConstants:
    """Compute B1, V1, V2, V3 for one arm by adaptive quadrature."""
    lo, hi = model.support
    step = 1e-5 * (hi - lo)
    prob = model.arm_probability(arm)

    probe = np.linspace(lo, hi, 2001)[1:-1]
    if np.min(np.asarray(prob(probe), dtype=float)) <= 1e-12:
        raise OverlapViolationError("overlap violation in asymptotics")

    beta_dd = model.beta1_dd if arm == 1 else model.beta0_dd
    if beta_dd is None:
        beta_dd = _second_diff(model.beta1 if arm == 1 else model.beta0, step)
    dens_d = model.density_d or _first_diff(model.density, step)
    prob_d = model.arm_probability_d(arm) or _first_diff(prob, step)

    mu2 = kernel_moment2(kernel)
    rough = kernel_roughness(kernel)
    f = model.density

    def integrate(fn):
        value, _ = quad(fn, lo, hi, **_QUAD_KW)
        return value

    b1 = 0.5 * integrate(lambda x: float(beta_dd(x)) * float(f(x))) * mu2
    v1 = model.sigma2 * integrate(lambda x: float(f(x)) / float(prob(x)))
    v2 = model.sigma2 * rough * integrate(lambda x: 1.0 / float(prob(x)))
    v3 = -2.0 * model.sigma2 * mu2 * (
        integrate(lambda x: float(dens_d(x)) ** 2 / (float(f(x)) * float(prob(x))))
        + integrate(lambda x: float(dens_d(x)) * float(prob_d(x)) / float(prob(x)) ** 2)
    )
    return AsymptoticConstants(b1, v1, v2, v3, arm)


def h_opt(b1: float, v2: float, n: int) -> float:
    """Bandwidth minimizing the dominant variance-bias tradeoff.

    Closed form (V2 / (4 B1^2))^(1/5) n^(-2/5); undefined when the bias
    constant vanishes.
    """
    if b1 == 0.0:
        raise NumericalError("bias constant vanishes; no interior optimum")
    return (v2 / (4.0 * b1 * b1)) ** 0.2 * float(n) ** -0.4


def asym_mse_beta(constants: AsymptoticConstants, h: float, n: int) -> float:
    """Leading-order MSE of one arm's group-mean estimator."""
    c = constants
    return c.v1 / n + c.v2 / (n**2 * h) + c.v3 * h**2 / n + c.b1**2 * h**4


def asym_mse_tau(
    constants1: AsymptoticConstants,
    constants0: AsymptoticConstants,
    h1: float,
    h0: float,
    n: int,
) -> float:
    """Leading-order MSE of the imputation estimator for a bandwidth pair."""
    c1, c0 = constants1, constants0
    return (
        (c1.v1 + c0.v1) / n
        + c1.v2 / (n**2 * h1)
        + c0.v2 / (n**2 * h0)
        + c1.v3 * h1**2 / n
        + c0.v3 * h0**2 / n
        + c1.b1**2 * h1**4
        + c0.b1**2 * h0**4
        - 2.0 * c1.b1 * c0.b1 * h1**2 * h0**2
    )


def consistency_exponents(r: float) -> Tuple[float, float, float]:
    """Orders in n of the non-constant terms when h is proportional to n^r.

    Returns the exponents of n^(-1-r) and n^(2r) (the excess of n times the
    variance over V1) and of n^(1/2 + 2r) (root-n times the bias). All three
    negative means the scaled variance tends to V1 and the scaled bias
    vanishes.
    """
    return (-1.0 - r, 2.0 * r, 0.5 + 2.0 * r)


def is_sqrt_n_consistent(r: float) -> bool:
    """Whether h proportional to n^r yields root-n consistent averages."""
    return all(e < 0 for e in consistency_exponents(r))
