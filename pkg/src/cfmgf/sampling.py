"""Reproducible random streams and the alternative distributions.

Streams are Philox (counter-based) generators keyed by ``(master_seed,
stream_id, ...)`` through :class:`numpy.random.SeedSequence` spawn keys, so a
replication's draws depend only on its key and never on worker count or
scheduling order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import BadParameter
from .standardize import DataMatrix

AEP_DEFAULT = (0.4, 1.182, 1.820)


def aep_params_default() -> tuple[float, float, float]:
    return AEP_DEFAULT


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, *self.path))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, *key: int) -> RngStream:
        return RngStream(self.master_seed, self.stream_id, self.path + tuple(int(k) for k in key))


_KINDS = {
    "normal": 0, "laplace": 0, "t": 1, "gn": 1, "ase": 1, "pii": 1,
    "uniform": 0, "aep": 3,
}
_ALIASES = {"n": "normal", "la": "laplace", "mt": "t", "multit": "t", "u": "uniform",
            "cube": "uniform", "pearson": "pii", "stable": "ase"}


@dataclass(frozen=True)
class AlternativeSpec:
    """A distribution to sample from, e.g. ``AlternativeSpec.parse("t:5", d=2)``.

    Kinds: ``normal``, ``laplace``, ``t:nu``, ``gn:theta``, ``ase:alpha``,
    ``pii:a``, ``uniform``, ``aep[:alpha,p1,p2]``.
    """

    kind: str
    d: int
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise BadParameter(f"unknown distribution {self.kind!r}")
        if self.d < 1:
            raise BadParameter("dimension must be >= 1")
        params = tuple(float(p) for p in self.params)
        if self.kind == "aep" and not params:
            params = AEP_DEFAULT
        if len(params) != _KINDS[self.kind]:
            raise BadParameter(f"{self.kind} takes {_KINDS[self.kind]} parameter(s), got {params}")
        object.__setattr__(self, "params", params)
        k, p = self.kind, params
        if k == "t" and not p[0] > 2:
            raise BadParameter("t needs nu > 2")
        if k == "gn" and not 0 < p[0] <= 2:
            raise BadParameter("gn needs 0 < theta <= 2")
        if k == "ase" and not 0 < p[0] < 2:
            raise BadParameter("ase needs 0 < alpha < 2")
        if k == "pii" and not p[0] > 0:
            raise BadParameter("pii needs a > 0")
        if k == "aep" and not (0 < p[0] < 1 and p[1] > 0 and p[2] > 0):
            raise BadParameter("aep needs 0 < alpha < 1 and positive p1, p2")

    @classmethod
    def parse(cls, text: str, d: int) -> AlternativeSpec:
        name, _, rest = text.strip().lower().partition(":")
        name = _ALIASES.get(name, name)
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
        return cls(name, d, params)

    def __str__(self):
        if not self.params or (self.kind == "aep" and self.params == AEP_DEFAULT):
            return self.kind
        return self.kind + ":" + ",".join(f"{p:g}" for p in self.params)

    @property
    def finite_variance(self) -> bool:
        return self.kind != "ase"


def _positive_stable(a: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive a-stable variates with Laplace transform exp(-s^a), 0 < a < 1.

    Chambers-Mallows-Stuck with skewness 1 (Kanter's form).
    """
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (np.sin(a * u) / np.sin(u) ** (1 / a)) * (np.sin((1 - a) * u) / e) ** ((1 - a) / a)


def _half_ep(p: float, size, rng: np.random.Generator) -> np.ndarray:
    # density proportional to exp(-v^p / p) on v > 0
    return (p * rng.standard_gamma(1 / p, size)) ** (1 / p)


def _half_ep_moment(p: float, k: int) -> float:
    return p ** (k / p) * gamma_fn((k + 1) / p) / gamma_fn(1 / p)


def _ep_const(p: float) -> float:
    return 1.0 / (2 * p ** (1 / p) * gamma_fn(1 + 1 / p))


def _aep_star(alpha: float, p1: float, p2: float) -> float:
    k1, k2 = _ep_const(p1), _ep_const(p2)
    return alpha * k1 / (alpha * k1 + (1 - alpha) * k2)


def aep_pdf(x, alpha: float = 0.4, p1: float = 1.182, p2: float = 1.820):
    """Density of the univariate asymmetric exponential power distribution."""
    x = np.asarray(x, dtype=float)
    a_s = _aep_star(alpha, p1, p2)
    left = alpha / a_s * _ep_const(p1) * np.exp(-np.abs(x / (2 * a_s)) ** p1 / p1)
    right = ((1 - alpha) / (1 - a_s) * _ep_const(p2)
             * np.exp(-np.abs(x / (2 * (1 - a_s))) ** p2 / p2))
    return np.where(x <= 0, left, right)


def aep_moment(k: int, alpha: float = 0.4, p1: float = 1.182, p2: float = 1.820) -> float:
    """Raw moment ``E[X^k]`` of the AEP law."""
    a_s = _aep_star(alpha, p1, p2)
    return (alpha * (-2 * a_s) ** k * _half_ep_moment(p1, k)
            + (1 - alpha) * (2 * (1 - a_s)) ** k * _half_ep_moment(p2, k))


def _aep(params, size, rng):
    alpha, p1, p2 = params
    a_s = _aep_star(alpha, p1, p2)
    left = rng.uniform(size=size) < alpha
    v1 = _half_ep(p1, size, rng)
    v2 = _half_ep(p2, size, rng)
    return np.where(left, -2 * a_s * v1, 2 * (1 - a_s) * v2)


def _gn(theta, size, rng):
    # |x|^theta ~ Gamma(1/theta); rescaled to unit variance
    g = rng.standard_gamma(1 / theta, size) ** (1 / theta)
    sign = np.where(rng.uniform(size=size) < 0.5, -1.0, 1.0)
    return sign * g / math.sqrt(gamma_fn(3 / theta) / gamma_fn(1 / theta))


def draw(spec: AlternativeSpec, n: int, rng: np.random.Generator,
         standardize: bool = False) -> np.ndarray:
    """``n`` i.i.d. draws as an ``(n, d)`` array.

    With ``standardize=True`` the draws are shifted and scaled by the exact
    population mean and covariance so they have mean zero and identity
    covariance, as GARCH innovations must.
    """
    if n < 1:
        raise BadParameter("n must be >= 1")
    d, k, p = spec.d, spec.kind, spec.params
    shape = (n, d)
    if k == "normal":
        x = rng.standard_normal(shape)
    elif k == "laplace":
        x = np.sqrt(rng.standard_exponential((n, 1))) * rng.standard_normal(shape)
    elif k == "t":
        nu = p[0]
        x = rng.standard_normal(shape) / np.sqrt(rng.chisquare(nu, (n, 1)) / nu)
    elif k == "gn":
        x = _gn(p[0], shape, rng)
    elif k == "ase":
        a = _positive_stable(p[0] / 2, (n, 1), rng)
        x = np.sqrt(a) * rng.standard_normal(shape)
    elif k == "pii":
        z = rng.standard_normal(shape)
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        x = np.sqrt(rng.beta(d / 2, p[0] + 1, (n, 1))) * z
    elif k == "uniform":
        x = rng.uniform(size=shape)
    else:
        x = _aep(p, shape, rng)
    if standardize:
        mean, sd = population_moments(spec)
        x = (x - mean) / sd
    return x


def sample(spec: AlternativeSpec, n: int, rng: RngStream | np.random.Generator,
           standardize: bool = False) -> DataMatrix:
    if isinstance(rng, RngStream):
        rng = rng.generator()
    return DataMatrix(draw(spec, n, rng, standardize))


@lru_cache(maxsize=None)
def population_moments(spec: AlternativeSpec) -> tuple[float, float]:
    """Coordinate mean and standard deviation (all families have scalar covariance)."""
    k, p, d = spec.kind, spec.params, spec.d
    if k in ("normal", "laplace", "gn"):
        return 0.0, 1.0
    if k == "t":
        return 0.0, math.sqrt(p[0] / (p[0] - 2))
    if k == "pii":
        return 0.0, math.sqrt(1 / (d + 2 * p[0] + 2))
    if k == "uniform":
        return 0.5, math.sqrt(1 / 12)
    if k == "aep":
        m1 = aep_moment(1, *p)
        return m1, math.sqrt(aep_moment(2, *p) - m1 * m1)
    raise BadParameter(f"{spec} has infinite variance and cannot be standardized")


def aep_skewness_quadrature(alpha: float = 0.4, p1: float = 1.182, p2: float = 1.820) -> float:
    """Skewness of the AEP law by direct integration of its density."""
    def mom(k):
        left = integrate.quad(lambda x: x**k * aep_pdf(x, alpha, p1, p2), -np.inf, 0)[0]
        right = integrate.quad(lambda x: x**k * aep_pdf(x, alpha, p1, p2), 0, np.inf)[0]
        return left + right
    m1, m2, m3 = mom(1), mom(2), mom(3)
    var = m2 - m1 * m1
    return (m3 - 3 * m1 * m2 + 2 * m1**3) / var**1.5
