"""Tensor-product Gauss-Hermite integration against ``exp(-gamma |t|^2)``.

This is a validation oracle, deliberately independent of the closed forms in
:mod:`cfmgf.statistics`: it only ever evaluates integrands pointwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionTooLarge, NonFinite, BadParameter
from .statistics import AsymptoticConstants, kernel_c, u_process
from .standardize import ScaledResiduals

MAX_DIM = 3
DEFAULT_ORDER = 40
# node budget for the 2d-dimensional double integral
_MAX_NODES = 5_000_000


@dataclass(frozen=True)
class QuadratureGrid:
    points: np.ndarray
    weights: np.ndarray
    order: int
    gamma: float

    @classmethod
    def build(cls, gamma: float, d: int, order: int = DEFAULT_ORDER,
              max_dim: int = MAX_DIM) -> QuadratureGrid:
        if d > max_dim:
            raise DimensionTooLarge(f"tensor grid limited to d <= {max_dim}, got {d}")
        if not gamma > 0:
            raise BadParameter(f"gamma must be positive, got {gamma}")
        x, w = np.polynomial.hermite.hermgauss(order)
        # t = x / sqrt(gamma) maps exp(-x^2) onto exp(-gamma t^2)
        t = x / math.sqrt(gamma)
        w = w / math.sqrt(gamma)
        pts = np.array(list(itertools.product(t, repeat=d)))
        wts = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
        return cls(pts, wts, order, gamma)

    @property
    def d(self) -> int:
        return self.points.shape[1]


def integrate(f: Callable[[np.ndarray], np.ndarray], grid: QuadratureGrid,
              vectorized: bool = True) -> float:
    """Approximate ``∫ f(t) exp(-gamma |t|^2) dt``.

    With ``vectorized=True`` ``f`` receives all nodes as an ``(m, d)`` array
    and must return ``m`` values; otherwise it is called once per node.
    """
    if vectorized:
        vals = np.asarray(f(grid.points), dtype=float).reshape(-1)
    else:
        vals = np.array([float(f(p)) for p in grid.points])
    if not np.all(np.isfinite(vals)):
        raise NonFinite("integrand is not finite at some quadrature node")
    return math.fsum(grid.weights * vals)


def integrate_u(y: ScaledResiduals, gamma: float, power: int = 1,
                order: int = DEFAULT_ORDER) -> float:
    """``∫ U_n(t)^power w(t) dt`` by direct quadrature."""
    grid = QuadratureGrid.build(gamma, y.d, order)
    return integrate(lambda t: u_process(y, t) ** power, grid)


def integrate_hw(y: ScaledResiduals, beta: float, order: int = DEFAULT_ORDER) -> float:
    """``n ∫ |phi_n(t) - exp(-|t|^2/2)|^2 phi_beta(t) dt`` with ``phi_beta`` the
    N(0, beta^2 I) density."""
    gamma = 1.0 / (2 * beta * beta)
    grid = QuadratureGrid.build(gamma, y.d, order)
    norm = (2 * math.pi * beta * beta) ** (-y.d / 2)

    def f(t):
        proj = t @ y.y.T
        re = np.cos(proj).mean(axis=1) - np.exp(-0.5 * np.sum(t * t, axis=1))
        im = np.sin(proj).mean(axis=1)
        return y.n * norm * (re * re + im * im)

    return integrate(f, grid)


def kernel_integrals(gamma: float, d: int, variant: str = "iid",
                     order: int = DEFAULT_ORDER) -> AsymptoticConstants:
    """``sigma^2 = ∬ C(s,t) w(s) w(t)`` and ``E|W|^2 = ∫ C(t,t) w(t)`` by quadrature."""
    if d > MAX_DIM:
        raise DimensionTooLarge(f"tensor grid limited to d <= {MAX_DIM}, got {d}")
    if not gamma > 1:
        raise BadParameter(f"kernel integrals need gamma > 1, got {gamma}")
    diag_grid = QuadratureGrid.build(gamma, d, order)
    mean_w = integrate(lambda t: kernel_c(t, t, variant), diag_grid)

    order2 = min(order, int(_MAX_NODES ** (1 / (2 * d))))
    grid2 = QuadratureGrid.build(gamma, 2 * d, order2, max_dim=2 * MAX_DIM)
    sigma2 = integrate(lambda st: kernel_c(st[:, :d], st[:, d:], variant), grid2)
    return AsymptoticConstants(sigma2, mean_w)
