"""The six simulated data-generating designs and their population quantities.

Each design fixes two regression curves, their difference, a propensity
curve, and the basis a correctly specified least-squares fit needs for the
control variate. Covariates are uniform on (0, 2*pi) throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .asymptotics import PopulationModel
from .criteria import OracleTruth

__all__ = [
    "TWO_PI",
    "DESIGN_IDS",
    "DesignSpec",
    "design",
    "true_tau",
    "design_sigma2",
    "oracle_truth",
    "population_model",
]

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
DESIGN_IDS = (1, 2, 3, 4, 5, 6)

_PROPENSITY_CLIP = 1e-6


@dataclass(frozen=True)
class DesignSpec:
    """A data-generating design: curves, effect, propensity, OLS basis."""

    id: int
    beta1: Callable
    beta0: Callable
    tau: Callable
    propensity: Callable
    basis: Tuple[Callable, ...]
    beta1_dd: Optional[Callable] = None
    beta0_dd: Optional[Callable] = None
    propensity_d: Optional[Callable] = None
    damped: bool = False

    def __post_init__(self):
        grid = np.linspace(0.0, TWO_PI, 1000)
        gap = np.abs(self.tau(grid) - (self.beta1(grid) - self.beta0(grid)))
        if np.max(gap) > 1e-8:
            raise ValueError("tau must equal beta1 - beta0 pointwise")


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _ident(x):
    return np.asarray(x, dtype=float)


def _square(x):
    return np.asarray(x, dtype=float) ** 2


def _sin_x(x):
    return np.sin(x)


def _sin_2x(x):
    return np.sin(2.0 * x)


def _cos_x(x):
    return np.cos(x)


# designs 1 and 5 share curves; 3 and 4 share curves
def _beta0_waves(x):
    return np.sin(2.0 * x) - 4.0 * np.cos(x) + 5.0


def _beta1_waves(x):
    return 4.0 * np.pi + 5.0 - 2.0 * np.pi * x + x**2 + 5.0 * np.sin(2.0 * x) - 4.0 * np.cos(x)


def _tau_waves(x):
    return 4.0 * np.pi - 2.0 * np.pi * x + x**2 + 4.0 * np.sin(2.0 * x)


def _beta0_waves_dd(x):
    return -4.0 * np.sin(2.0 * x) + 4.0 * np.cos(x)


def _beta1_waves_dd(x):
    return 2.0 - 20.0 * np.sin(2.0 * x) + 4.0 * np.cos(x)


def _d2_base(x):
    return x + np.sin(x) + np.sin(2.0 * x)


def _beta1_d2(x):
    return 4.0 * _d2_base(x) + 3.0


def _beta0_d2(x):
    return 2.0 * _d2_base(x) + 3.0


def _tau_d2(x):
    return 2.0 * _d2_base(x)


def _beta1_d2_dd(x):
    return -4.0 * np.sin(x) - 16.0 * np.sin(2.0 * x)


def _beta0_d2_dd(x):
    return -2.0 * np.sin(x) - 8.0 * np.sin(2.0 * x)


def _beta1_parab(x):
    return 4.0 * np.pi - np.pi * x + x**2 / 2.0


def _beta0_parab(x):
    return np.pi * x - x**2 / 2.0


def _tau_parab(x):
    return 4.0 * np.pi - 2.0 * np.pi * x + x**2


def _beta1_parab_dd(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _beta0_parab_dd(x):
    return -np.ones_like(np.asarray(x, dtype=float))


_D6_FREQ = TWO_PI * (TWO_PI + 0.05)


def _d6_wave(x):
    x = np.asarray(x, dtype=float)
    return x * (TWO_PI - x) * np.sin(_D6_FREQ / (x + 0.05))


def _d6_wave_dd(x):
    x = np.asarray(x, dtype=float)
    a = x * (TWO_PI - x)
    a1 = TWO_PI - 2.0 * x
    theta = _D6_FREQ / (x + 0.05)
    theta1 = -_D6_FREQ / (x + 0.05) ** 2
    theta2 = 2.0 * _D6_FREQ / (x + 0.05) ** 3
    b1 = np.cos(theta) * theta1
    b2 = -np.sin(theta) * theta1**2 + np.cos(theta) * theta2
    return -2.0 * np.sin(theta) + 2.0 * a1 * b1 + a * b2


def _d6_sin(x):
    return np.sin(2.0 * x - 4.0)


def _d6_bump(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-16.0 * (2.0 * x - 2.5) ** 2)


def _beta1_d6(x):
    return 10.0 + _d6_wave(x)


def _beta0_d6(x):
    return 8.0 + 1.5 * _d6_sin(x) + 6.0 * _d6_bump(x)


def _tau_d6(x):
    # beta1 - beta0: the bump enters with a minus sign
    return 2.0 + _d6_wave(x) - 1.5 * _d6_sin(x) - 6.0 * _d6_bump(x)


def _beta1_d6_dd(x):
    return _d6_wave_dd(x)


def _beta0_d6_dd(x):
    q1 = -64.0 * (2.0 * np.asarray(x, dtype=float) - 2.5)
    return -6.0 * _d6_sin(x) + 6.0 * _d6_bump(x) * (q1**2 - 128.0)


def _logit_propensity(x):
    return 1.0 / (1.0 + np.exp(-(np.asarray(x, dtype=float) - 3.5)))


def _logit_propensity_d(x):
    p = _logit_propensity(x)
    return p * (1.0 - p)


def _ratio_propensity(x):
    x = np.asarray(x, dtype=float)
    return (5.0 * np.sin(2.0 * x) - 4.0 * np.cos(x) + 4.0 * np.pi - 2.0 * np.pi * x + x**2) / 11.3


def _ratio_propensity_d(x):
    x = np.asarray(x, dtype=float)
    return (10.0 * np.cos(2.0 * x) + 4.0 * np.sin(x) - 2.0 * np.pi + 2.0 * x) / 11.3


_CURVES = {
    1: (_beta1_waves, _beta0_waves, _tau_waves, _beta1_waves_dd, _beta0_waves_dd),
    2: (_beta1_d2, _beta0_d2, _tau_d2, _beta1_d2_dd, _beta0_d2_dd),
    3: (_beta1_parab, _beta0_parab, _tau_parab, _beta1_parab_dd, _beta0_parab_dd),
    4: (_beta1_parab, _beta0_parab, _tau_parab, _beta1_parab_dd, _beta0_parab_dd),
    5: (_beta1_waves, _beta0_waves, _tau_waves, _beta1_waves_dd, _beta0_waves_dd),
    6: (_beta1_d6, _beta0_d6, _tau_d6, _beta1_d6_dd, _beta0_d6_dd),
}

_BASES = {
    1: (_one, _ident, _square, _sin_2x, _cos_x),
    2: (_one, _ident, _sin_x, _sin_2x),
    3: (_one, _ident, _square),
    4: (_one, _ident, _square),
    5: (_one, _ident, _square, _sin_2x, _cos_x),
    6: (_one, _d6_sin, _d6_bump, _d6_wave),
}


def _damped(p: Callable) -> Callable:
    return lambda x: 0.2 + 0.6 * p(x)


def _damped_d(pd: Callable) -> Callable:
    return lambda x: 0.6 * pd(x)


def _clipped(p: Callable) -> Callable:
    return lambda x: np.clip(p(x), _PROPENSITY_CLIP, 1.0 - _PROPENSITY_CLIP)


def design(design_id: int, damp_propensity: bool = False) -> DesignSpec:
    """Build one of the six designs; optionally damp the propensity to [0.2, 0.8]."""
    if design_id not in DESIGN_IDS:
        raise ValueError(f"design id must be one of {DESIGN_IDS}")
    beta1, beta0, tau, beta1_dd, beta0_dd = _CURVES[design_id]
    prop = _logit_propensity if design_id <= 3 else _ratio_propensity
    prop_d = _logit_propensity_d if design_id <= 3 else _ratio_propensity_d
    if damp_propensity:
        prop, prop_d = _damped(prop), _damped_d(prop_d)
    probe = np.linspace(0.0, TWO_PI, 4001)
    values = np.asarray(prop(probe), dtype=float)
    if values.min() < 0.0 or values.max() > 1.0:
        logger.warning(
            "design %d propensity leaves [0, 1]; clamping to [%g, %g]",
            design_id, _PROPENSITY_CLIP, 1.0 - _PROPENSITY_CLIP,
        )
        prop = _clipped(prop)
    return DesignSpec(
        id=design_id,
        beta1=beta1,
        beta0=beta0,
        tau=tau,
        propensity=prop,
        basis=_BASES[design_id],
        beta1_dd=beta1_dd,
        beta0_dd=beta0_dd,
        propensity_d=prop_d,
        damped=damp_propensity,
    )


_QUAD_KW = dict(epsabs=1e-10, epsrel=1e-10, limit=2000)


def true_tau(spec: DesignSpec) -> float:
    """Population average effect: the effect curve integrated against the design density."""
    value, _ = quad(lambda x: float(spec.tau(x)) / TWO_PI, 0.0, TWO_PI, **_QUAD_KW)
    return value


def design_sigma2(spec: DesignSpec) -> float:
    """Noise variance matched to the signal: Var of beta0(x) + tau(x) z."""

    def mean_fn(x):
        p = float(spec.propensity(x))
        return ((1.0 - p) * float(spec.beta0(x)) + p * float(spec.beta1(x))) / TWO_PI

    def second_fn(x):
        p = float(spec.propensity(x))
        return ((1.0 - p) * float(spec.beta0(x)) ** 2 + p * float(spec.beta1(x)) ** 2) / TWO_PI

    mean, _ = quad(mean_fn, 0.0, TWO_PI, **_QUAD_KW)
    second, _ = quad(second_fn, 0.0, TWO_PI, **_QUAD_KW)
    return second - mean**2


def oracle_truth(spec: DesignSpec, sigma2: Optional[float] = None) -> OracleTruth:
    """Oracle inputs for the theoretical criteria of this design."""
    if sigma2 is None:
        sigma2 = design_sigma2(spec)
    return OracleTruth(spec.beta1, spec.beta0, sigma2, spec.propensity)


def _uniform_density(x):
    return np.full(np.shape(x), 1.0 / TWO_PI) if np.ndim(x) else 1.0 / TWO_PI


def _zero(x):
    return np.zeros(np.shape(x)) if np.ndim(x) else 0.0


def population_model(spec: DesignSpec, sigma2: Optional[float] = None) -> PopulationModel:
    """Population quantities of this design for the asymptotic constants."""
    if sigma2 is None:
        sigma2 = design_sigma2(spec)
    return PopulationModel(
        beta1=spec.beta1,
        beta0=spec.beta0,
        propensity=spec.propensity,
        sigma2=sigma2,
        density=_uniform_density,
        support=(0.0, TWO_PI),
        beta1_dd=spec.beta1_dd,
        beta0_dd=spec.beta0_dd,
        propensity_d=spec.propensity_d,
        density_d=_zero,
    )
