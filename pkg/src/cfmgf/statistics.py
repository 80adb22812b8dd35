"""Test statistics and closed-form asymptotic constants.

All statistics are weighted L2 functionals of the process
``U_n(t) = sqrt(n) * (R_n(t) M_n(t) - 1)`` where ``R_n`` is the empirical
cosine transform and ``M_n`` the empirical moment generating function of
the residuals, integrated against ``w(t) = exp(-gamma |t|^2)``.

Every Gaussian integral reduces to the kernel

    ∫ cos(t'u) exp(t'v) w(t) dt = (pi/gamma)^{d/2} exp((|v|^2 - |u|^2) / 4 gamma) cos(u'v / 2 gamma)

We evaluate ``kernel - 1`` (see :func:`_gminus1`) rather than the kernel
itself. The constant parts cancel exactly by counting, and without that
step the statistics lose all significant digits once gamma is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import comb

from .errors import ExponentOverflow, GammaTooSmall, BadParameter
from .standardize import ScaledResiduals

EXP_CAP = 700.0
_BLOCK_ENTRIES = 2_000_000
# above this gamma the factorized kernel loses digits to cancellation
_FACTOR_GAMMA = 10.0


class Family(str, Enum):
    T = "T"
    TTILDE = "Ttilde"
    HW = "HW"
    T_GARCH = "T_garch"
    TTILDE_GARCH = "Ttilde_garch"


@dataclass(frozen=True)
class WeightConfig:
    gamma: float
    d: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise BadParameter(f"gamma must be positive, got {self.gamma}")
        if self.d < 1:
            raise BadParameter(f"dimension must be >= 1, got {self.d}")

    def require_asymptotic(self):
        if not self.gamma > 1:
            raise GammaTooSmall(f"asymptotic theory needs gamma > 1, got {self.gamma}")


@dataclass
class Decision:
    reject: bool
    alpha: float
    critical_value: float | None = None
    p_value: float | None = None


@dataclass
class TestResult:
    """Outcome of one test statistic evaluation.

    ``scaled`` is ``(gamma/pi)^{d/2} T`` for the quadratic statistics (the
    convention critical-value tables use), ``Ttilde / sigma`` for the linear
    one, and the raw value for HW.
    """

    __test__ = False

    statistic: float
    scaled: float
    family: Family
    gamma_or_beta: float
    n: int
    d: int
    decision: Decision | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        return out


@dataclass(frozen=True)
class MomentSummary:
    b1: float
    b1_mrs: float
    b2: float


@dataclass(frozen=True)
class AsymptoticConstants:
    sigma2: float
    mean_w_norm: float


def _check_cap(arg_max: float, what: str):
    if arg_max > EXP_CAP:
        raise ExponentOverflow(
            f"exponent argument {arg_max:.1f} exceeds cap {EXP_CAP} in {what}; "
            "increase gamma or inspect the data for outliers"
        )


def u_process(y: ScaledResiduals, t: np.ndarray) -> np.ndarray | float:
    """Evaluate ``U_n`` at one point ``t`` (shape (d,)) or many (shape (m, d))."""
    t = np.asarray(t, dtype=float)
    single = t.ndim == 1
    tt = np.atleast_2d(t)
    proj = tt @ y.y.T
    _check_cap(float(proj.max(initial=-np.inf)), "u_process")
    r = np.cos(proj).mean(axis=1)
    m = np.exp(proj).mean(axis=1)
    u = math.sqrt(y.n) * (r * m - 1.0)
    return float(u[0]) if single else u


def _gminus1(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    # exp(a) cos(c) - 1 without cancellation for small a, c
    return np.expm1(a) * np.cos(c) - 2.0 * np.sin(0.5 * c) ** 2


def _cross_sum(y: ScaledResiduals, gamma: float) -> float:
    """``sum_{j,k} [exp((|Y_j|^2 - |Y_k|^2)/4g) cos(Y_j'Y_k / 2g) - 1]``."""
    s = y.sq_norms
    _check_cap(float(s.max() - s.min()) / (4 * gamma), "cross term")
    a = (s[:, None] - s[None, :]) / (4 * gamma)
    c = y.gram / (2 * gamma)
    return math.fsum(_gminus1(a, c).sum(axis=1))


def _pair_sets(y: np.ndarray):
    """Unordered pair sums and differences with multiplicity weights.

    The kernel is even in ``u`` and both pair sets are closed under index
    swap, so unordered pairs weighted 2 (off-diagonal) or 1 (diagonal)
    reproduce the ordered quadruple sum.
    """
    n = y.shape[0]
    iu, ju = np.triu_indices(n)
    plus = y[iu] + y[ju]
    w_plus = np.where(iu == ju, 1.0, 2.0)
    ik, jk = np.triu_indices(n, k=1)
    minus = np.vstack([y[ik] - y[jk], np.zeros((1, y.shape[1]))])
    w_minus = np.append(np.full(len(ik), 2.0), float(n))
    return plus, w_plus, minus, w_minus


def _quad_sum(y: np.ndarray, gammas: Sequence[float]) -> np.ndarray:
    """``sum_{u, v} w_u w_v [kernel(u, v) - 1]`` over v in Y+, u in Y- and Y+."""
    plus, w_plus, minus, w_minus = _pair_sets(y)
    us = np.vstack([minus, plus])
    w_u = np.concatenate([w_minus, w_plus])
    sq_u = np.einsum("ij,ij->i", us, us)
    sq_v = np.einsum("ij,ij->i", plus, plus)
    max_v = float(sq_v.max())
    block = max(1, _BLOCK_ENTRIES // len(us))
    totals = [[] for _ in gammas]
    for start in range(0, len(plus), block):
        v = plus[start:start + block]
        wv = w_plus[start:start + block]
        inner = v @ us.T
        diff = None
        for gi, g in enumerate(gammas):
            g = float(g)
            _check_cap(max_v / (4 * g), "quadruple sum")
            if g <= _FACTOR_GAMMA:
                # exp(a) factorizes over (v, u); one cosine per entry
                ev = wv * np.exp(sq_v[start:start + block] / (4 * g))
                eu = w_u * np.exp(-sq_u / (4 * g))
                part = ev @ (np.cos(inner / (2 * g)) @ eu) - wv.sum() * w_u.sum()
            else:
                if diff is None:
                    diff = sq_v[start:start + block, None] - sq_u[None, :]
                part = wv @ (_gminus1(diff / (4 * g), inner / (2 * g)) @ w_u)
            totals[gi].append(float(part))
    return np.array([math.fsum(t) for t in totals])


def t_values(y: ScaledResiduals, gammas: Sequence[float]) -> np.ndarray:
    """Raw ``T_{n,gamma}`` for several gammas, sharing the pair construction."""
    n, d = y.n, y.d
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    quad = _quad_sum(y.y, gammas)
    out = np.empty(len(gammas))
    for i, g in enumerate(gammas):
        cross = _cross_sum(y, g)
        out[i] = (math.pi / g) ** (d / 2) * (quad[i] / (2 * n**3) - 2.0 * cross / n)
    return out


def ttilde_values(y: ScaledResiduals, gammas: Sequence[float]) -> np.ndarray:
    n, d = y.n, y.d
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    return np.array([(math.pi / g) ** (d / 2) * math.sqrt(n) * _cross_sum(y, g) / n**2
                     for g in gammas])


def t_stat(y: ScaledResiduals, w: WeightConfig, family: Family = Family.T) -> TestResult:
    """The quadratic statistic ``T = ∫ U_n^2 w``, evaluated in closed form.

    Cost is O(n^4) in time and O(n^2 d) in memory.
    """
    value = float(t_values(y, [w.gamma])[0])
    scaled = (w.gamma / math.pi) ** (y.d / 2) * value
    return TestResult(value, scaled, family, w.gamma, y.n, y.d)


def t_tilde_stat(y: ScaledResiduals, w: WeightConfig,
                 family: Family = Family.TTILDE) -> TestResult:
    """The linear statistic ``Ttilde = ∫ U_n w`` in O(n^2)."""
    value = float(ttilde_values(y, [w.gamma])[0])
    scaled = value / math.sqrt(sigma2_closed(w)) if w.gamma > 1 else math.nan
    return TestResult(value, scaled, family, w.gamma, y.n, y.d)


def moment_summary(y: ScaledResiduals) -> MomentSummary:
    """Mardia skewness and kurtosis and the MRS skewness.

    The double sums over ``(Y_j'Y_k)^3`` and ``Y_j'Y_k |Y_j|^2 |Y_k|^2`` are the
    squared norms of ``mean_j Y_j (x) Y_j (x) Y_j`` and ``mean_j |Y_j|^2 Y_j``,
    so no n x n matrix is formed.
    """
    n = y.n
    s = y.sq_norms
    third = np.einsum("ja,jb,jc->abc", y.y, y.y, y.y) / n
    vec = s @ y.y / n
    b2 = float(np.sum(s**2)) / n
    return MomentSummary(float(np.sum(third**2)), float(vec @ vec), b2)


def limit_check_t(y: ScaledResiduals, gamma: float) -> tuple[float, float]:
    """Rescaled ``T`` next to its large-gamma limit ``2 b1 + 3 b1_mrs``."""
    t = float(t_values(y, [gamma])[0])
    d = y.d
    scaled = gamma ** (3 + d / 2) * 96 * t / (y.n * math.pi ** (d / 2))
    m = moment_summary(y)
    return scaled, 2 * m.b1 + 3 * m.b1_mrs


def limit_check_ttilde(y: ScaledResiduals, gamma: float) -> tuple[float, float]:
    """Rescaled ``Ttilde`` next to its large-gamma limit ``b2 - d(d+2)``."""
    tt = float(ttilde_values(y, [gamma])[0])
    d = y.d
    scaled = gamma ** (2 + d / 2) * 16 * tt / (math.sqrt(y.n) * math.pi ** (d / 2))
    return scaled, moment_summary(y).b2 - d * (d + 2)


def hw_values(y: ScaledResiduals, betas: Sequence[float]) -> np.ndarray:
    n, d = y.n, y.d
    s = y.sq_norms
    dist2 = np.maximum(s[:, None] + s[None, :] - 2 * y.gram, 0.0)
    out = []
    for b in np.atleast_1d(np.asarray(betas, dtype=float)):
        if not b > 0:
            raise BadParameter(f"beta must be positive, got {b}")
        b2 = b * b
        first = math.fsum(np.exp(-0.5 * b2 * dist2).sum(axis=1)) / n
        second = 2 * (1 + b2) ** (-d / 2) * math.fsum(np.exp(-b2 * s / (2 * (1 + b2))))
        out.append(first - second + n * (1 + 2 * b2) ** (-d / 2))
    return np.array(out)


def hw_stat(y: ScaledResiduals, beta: float) -> TestResult:
    """The BHEP (Henze-Zirkler) statistic with smoothing parameter ``beta``."""
    value = float(hw_values(y, [beta])[0])
    return TestResult(value, value, Family.HW, beta, y.n, y.d)


def sigma2_closed(w: WeightConfig) -> float:
    """Variance of the normal limit of ``Ttilde`` (same for the GARCH case)."""
    w.require_asymptotic()
    g, d = w.gamma, w.d
    pd = math.pi**d
    return (2 * pd * (g * g - 0.25) ** (-d / 2) + 2 * pd * (g * g + 0.25) ** (-d / 2)
            - 4 * pd * g ** (-d))


def mean_w_norm(w: WeightConfig) -> float:
    """Mean squared L2 norm of the limit process of ``U_n`` (i.i.d. case)."""
    w.require_asymptotic()
    g, d = w.gamma, w.d
    half = math.atan(1 / g) / 2
    kappa_c = math.sqrt(math.pi / g) * math.cos(half) / (1 + 1 / g**2) ** 0.25
    tan_sum = sum((-1) ** q * comb(d, 2 * q, exact=True) * math.tan(half) ** (2 * q)
                  for q in range(d // 2 + 1))
    return (1.5 * (math.pi / (g - 1)) ** (d / 2) + 0.5 * (math.pi / (g + 1)) ** (d / 2)
            - (4 + d / (2 * g)) * (math.pi / g) ** (d / 2)
            + 2 * kappa_c**d * tan_sum)


def kernel_c(s: np.ndarray, t: np.ndarray, variant: str = "iid") -> np.ndarray:
    """Covariance kernel of the limiting Gaussian process.

    ``variant="garch"`` drops the ``-s't`` term that comes from centering.
    Broadcasts over leading axes of ``s`` and ``t``.
    """
    st = np.sum(np.asarray(s, dtype=float) * np.asarray(t, dtype=float), axis=-1)
    e = np.exp(st)
    out = e + 0.5 * (e + np.exp(-st)) + 2 * np.cos(st) - 4
    if variant == "iid":
        return out - st
    if variant == "garch":
        return out
    raise BadParameter(f"unknown kernel variant {variant!r}")
