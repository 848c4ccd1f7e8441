"""Compactly supported smoothing kernels and their moment constants."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "Kernel",
    "TRICUBE",
    "EPANECHNIKOV",
    "UNIFORM",
    "KERNELS",
    "get_kernel",
    "eval_kernel",
    "kernel_moment2",
    "kernel_roughness",
]


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density supported on [-1, 1].

    ``fn`` is vectorized and returns exactly 0 for |u| >= 1; the
    nearest-neighbor bandwidth logic relies on that (the k-th neighbor sits
    on the support boundary and must get zero weight).
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]


def _tricube(u):
    a = np.clip(np.abs(np.asarray(u, dtype=float)), 0.0, 1.0)
    return (70.0 / 81.0) * (1.0 - a**3) ** 3


def _epanechnikov(u):
    a = np.clip(np.abs(np.asarray(u, dtype=float)), 0.0, 1.0)
    return 0.75 * (1.0 - a**2)


def _uniform(u):
    a = np.abs(np.asarray(u, dtype=float))
    return np.where(a < 1.0, 0.5, 0.0)


TRICUBE = Kernel("tricube", _tricube)
EPANECHNIKOV = Kernel("epanechnikov", _epanechnikov)
UNIFORM = Kernel("uniform", _uniform)

KERNELS = {k.name: k for k in (TRICUBE, EPANECHNIKOV, UNIFORM)}


def get_kernel(name: str) -> Kernel:
    try:
        return KERNELS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; choose from {sorted(KERNELS)}"
        ) from None


def eval_kernel(kernel: Kernel, u: float) -> float:
    """Evaluate K(u); zero outside the open interval (-1, 1)."""
    return float(kernel.fn(u))


def _quad_kernel(integrand) -> float:
    # split at 0: the |u| kink makes each half piecewise-polynomial, which
    # Gauss-Kronrod then integrates essentially exactly
    value, _ = quad(integrand, -1.0, 1.0, points=[0.0], epsabs=1e-12, epsrel=1e-12, limit=200)
    return value


@lru_cache(maxsize=None)
def kernel_moment2(kernel: Kernel) -> float:
    """Second moment: integral of u^2 K(u) over the support."""
    return _quad_kernel(lambda u: u * u * float(kernel.fn(u)))


@lru_cache(maxsize=None)
def kernel_roughness(kernel: Kernel) -> float:
    """Roughness: integral of K(u)^2 over the support."""
    return _quad_kernel(lambda u: float(kernel.fn(u)) ** 2)
