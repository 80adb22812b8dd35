"""CCC-GARCH(1,1): simulation, filtering, Gaussian QMLE and innovation tests.

Model::

    X_j     = Sigma_j^{1/2} eps_j,        Sigma_j = D_j R D_j,  D_j = diag(sqrt(sigma_j))
    sigma_j = b + B1 (X_{j-1} * X_{j-1}) + G1 sigma_{j-1}

``Sigma_j^{1/2}`` is always the symmetric square root. The first conditional
variance ``sigma_1`` is an explicit initial value: the unconditional mean
``(I - B1 - G1)^{-1} b``, the uncentered sample second moment of the data,
or a user-supplied vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from os import PathLike

import numba as nb
import numpy as np
from scipy.optimize import minimize

from .errors import (BootstrapUnstable, CfmgfError, DegenerateData, NoConvergence,
                     NonFiniteData, NonStationary, NumericBlowup, BadParameter)
from .sampling import AlternativeSpec, RngStream, draw
from .standardize import ScaledResiduals
from .statistics import (Decision, Family, TestResult, WeightConfig, hw_values,
                         sigma2_closed, t_values, ttilde_values)

SIGMA_MAX = 1e100
GRAD_TOL = 1e-6
_PENALTY = 1e10
_FLOOR = 1e-8


@dataclass(frozen=True)
class GarchSpec:
    b: np.ndarray
    B1: np.ndarray
    G1: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        d = b.size
        B1 = np.asarray(self.B1, dtype=float).reshape(d, d)
        G1 = np.asarray(self.G1, dtype=float).reshape(d, d)
        R = np.asarray(self.R, dtype=float).reshape(d, d)
        for name, arr in (("b", b), ("B1", B1), ("G1", G1), ("R", R)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(b <= 0):
            raise BadParameter("b must be strictly positive")
        if np.any(B1 < 0) or np.any(G1 < 0):
            raise BadParameter("B1 and G1 must be entrywise nonnegative")
        if not np.allclose(R, R.T, atol=1e-12) or not np.allclose(np.diag(R), 1.0, atol=1e-12):
            raise BadParameter("R must be a symmetric matrix with unit diagonal")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise BadParameter("R must be positive definite")
        if self.spectral_radius >= 1:
            raise NonStationary(f"spectral radius of B1 + G1 is {self.spectral_radius:.4f} >= 1")

    @property
    def d(self) -> int:
        return self.b.size

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.B1 + self.G1))))

    def unconditional_variance(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.d) - self.B1 - self.G1, self.b)

    @classmethod
    def bivariate_reference(cls, r: float = 0.0) -> GarchSpec:
        """The bivariate design used in the GARCH simulation study."""
        return cls(b=[0.1, 0.1], B1=[[0.3, 0.1], [0.1, 0.2]],
                   G1=[[0.2, 0.1], [0.01, 0.3]], R=[[1, r], [r, 1]])

    @classmethod
    def trivariate_reference(cls, r: float = 0.0) -> GarchSpec:
        R = np.full((3, 3), r)
        np.fill_diagonal(R, 1.0)
        return cls(b=[0.1, 0.1, 0.1],
                   B1=[[0.3, 0.1, 0.1], [0.1, 0.2, 0.1], [0.1, 0.1, 0.1]],
                   G1=[[0.2, 0.1, 0.01], [0.01, 0.3, 0.1], [0.01, 0.01, 0.1]], R=R)

    def to_dict(self) -> dict:
        return {"b": self.b.tolist(), "B1": self.B1.tolist(),
                "G1": self.G1.tolist(), "R": self.R.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> GarchSpec:
        return cls(doc["b"], doc["B1"], doc["G1"], doc["R"])

    def to_json(self, path: str | PathLike | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source: str | PathLike) -> GarchSpec:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(source) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


@dataclass
class GarchPath:
    x: np.ndarray
    sigma_series: np.ndarray
    innovations: np.ndarray | None = None


@dataclass
class GarchFit:
    theta_hat: GarchSpec
    loglik: float
    converged: bool
    iterations: int
    residuals: np.ndarray
    sigma_series: np.ndarray
    grad_norm: float = math.nan
    starts: int = 1


# ----------------------------------------------------------------- kernels

@nb.njit(cache=True)
def _sym_sqrt(m, power):
    w, v = np.linalg.eigh(m)
    return (v * w**power) @ v.T


@nb.njit(cache=True)
def _simulate_kernel(b, B1, G1, R, eps, sigma1):
    n, d = eps.shape
    x = np.empty((n, d))
    sig = np.empty((n, d))
    s = sigma1.copy()
    for j in range(n):
        if j > 0:
            s = b + B1 @ (x[j - 1] * x[j - 1]) + G1 @ s
        sig[j] = s
        for i in range(d):
            if not (s[i] < 1e100):
                return x, sig, j
        dd = np.sqrt(s)
        cov = (dd[:, None] * R) * dd[None, :]
        x[j] = _sym_sqrt(cov, 0.5) @ eps[j]
    return x, sig, n


@nb.njit(cache=True)
def _sigma_kernel(x, b, B1, G1, sigma1):
    n, d = x.shape
    sig = np.empty((n, d))
    sig[0] = sigma1
    for j in range(1, n):
        sig[j] = b + B1 @ (x[j - 1] * x[j - 1]) + G1 @ sig[j - 1]
    return sig


@nb.njit(cache=True)
def _nll_kernel(x, b, B1, G1, Rinv, logdet_r, sigma1):
    """Sum of ``X'Sigma^{-1}X + log|Sigma|`` over j, halved, with gradients.

    Returns the value, its gradient w.r.t. (b, vec B1, vec G1) and w.r.t. R
    (entrywise, unconstrained).
    """
    n, d = x.shape
    p = d + 2 * d * d
    s = sigma1.copy()
    ds = np.zeros((d, p))
    grad = np.zeros(p)
    zz = np.zeros((d, d))
    total = 0.0
    for j in range(n):
        if j > 0:
            xs = x[j - 1] * x[j - 1]
            new_ds = G1 @ ds
            for i in range(d):
                new_ds[i, i] += 1.0
                for k in range(d):
                    new_ds[i, d + i * d + k] += xs[k]
                    new_ds[i, d + d * d + i * d + k] += s[k]
            s = b + B1 @ xs + G1 @ s
            ds = new_ds
        for i in range(d):
            if not (s[i] > 0.0 and s[i] < 1e100):
                return np.inf, grad, zz
        z = x[j] / np.sqrt(s)
        q = Rinv @ z
        total += z @ q + np.sum(np.log(s)) + logdet_r
        dl = (1.0 - z * q) / s
        grad += dl @ ds
        zz += np.outer(z, z)
    grad_r = -(Rinv @ zz @ Rinv) + n * Rinv
    return 0.5 * total, 0.5 * grad, 0.5 * grad_r


# ------------------------------------------------------------ simulation

def _initial_sigma(spec: GarchSpec, x: np.ndarray | None, init) -> np.ndarray:
    if isinstance(init, str):
        if init == "unconditional":
            return spec.unconditional_variance()
        if init == "sample_variance":
            if x is None:
                raise BadParameter("sample_variance init needs observations")
            return np.mean(x * x, axis=0)
        raise BadParameter(f"unknown init convention {init!r}")
    s = np.asarray(init, dtype=float).reshape(spec.d)
    if np.any(s <= 0):
        raise BadParameter("initial conditional variances must be positive")
    return s


def simulate_with_innovations(spec: GarchSpec, eps: np.ndarray,
                              sigma1: np.ndarray | None = None) -> GarchPath:
    """Run the recursion on a given innovation matrix."""
    eps = np.ascontiguousarray(eps, dtype=float)
    if sigma1 is None:
        sigma1 = spec.unconditional_variance()
    x, sig, done = _simulate_kernel(spec.b, spec.B1, spec.G1, spec.R, eps,
                                    np.asarray(sigma1, dtype=float))
    if done < len(eps):
        raise NumericBlowup(f"conditional variance exceeded {SIGMA_MAX:g} at step {done}")
    return GarchPath(x, sig, eps)


def garch_simulate(spec: GarchSpec, n: int, rng: RngStream | np.random.Generator,
                   innovation: AlternativeSpec | None = None, burn_in: int = 500,
                   init="unconditional") -> GarchPath:
    """Simulate ``n`` observations after discarding ``burn_in`` steps.

    Innovations are standardized draws (mean zero, identity covariance) from
    ``innovation`` (Gaussian by default).
    """
    if burn_in < 0:
        raise BadParameter("burn_in must be >= 0")
    if innovation is None:
        innovation = AlternativeSpec("normal", spec.d)
    if innovation.d != spec.d:
        raise BadParameter("innovation dimension does not match the model")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    eps = draw(innovation, n + burn_in, gen, standardize=True)
    path = simulate_with_innovations(spec, eps, _initial_sigma(spec, None, init))
    return GarchPath(path.x[burn_in:], path.sigma_series[burn_in:], eps[burn_in:])


def _residuals(x: np.ndarray, sig: np.ndarray, R: np.ndarray) -> np.ndarray:
    dd = np.sqrt(sig)
    cov = dd[:, :, None] * R[None] * dd[:, None, :]
    w, v = np.linalg.eigh(cov)
    inv_sqrt = (v / np.sqrt(w)[:, None, :]) @ np.swapaxes(v, 1, 2)
    return np.einsum("jab,jb->ja", inv_sqrt, x)


def garch_filter(spec: GarchSpec, x: np.ndarray, init="unconditional") -> GarchPath:
    """Reconstruct conditional variances from data and invert for residuals."""
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.d:
        raise BadParameter(f"expected observations of shape (n, {spec.d})")
    sig = _sigma_kernel(x, spec.b, spec.B1, spec.G1, _initial_sigma(spec, x, init))
    if not np.all(np.isfinite(sig)) or sig.max() > SIGMA_MAX:
        raise NumericBlowup("conditional variance overflow while filtering")
    return GarchPath(x, sig, _residuals(x, sig, spec.R))


# ------------------------------------------------------------------- QMLE

def _corr_from_angles(z: np.ndarray, d: int) -> np.ndarray:
    """Correlation matrix from partial correlations in (-1, 1) via a Cholesky factor."""
    L = np.zeros((d, d))
    L[0, 0] = 1.0
    pos = 0
    for i in range(1, d):
        rem = 1.0
        for j in range(i):
            L[i, j] = z[pos] * math.sqrt(rem)
            rem -= L[i, j] ** 2
            pos += 1
        L[i, i] = math.sqrt(max(rem, 0.0))
    return L @ L.T


def _angles_from_corr(R: np.ndarray) -> np.ndarray:
    d = R.shape[0]
    L = np.linalg.cholesky(R)
    z = []
    for i in range(1, d):
        rem = 1.0
        for j in range(i):
            z.append(L[i, j] / math.sqrt(rem))
            rem -= L[i, j] ** 2
    return np.clip(np.array(z), -0.999999, 0.999999)


class _Param:
    """Unconstrained coordinates: logs of b, B1, G1 and atanh of partial correlations."""

    def __init__(self, d: int):
        self.d = d
        self.nb = d
        self.nm = d * d
        self.nr = d * (d - 1) // 2
        self.size = self.nb + 2 * self.nm + self.nr

    def pack(self, b, B1, G1, R) -> np.ndarray:
        lg = lambda a: np.log(np.maximum(np.asarray(a, dtype=float).ravel(), _FLOOR))
        return np.concatenate([lg(b), lg(B1), lg(G1), np.arctanh(_angles_from_corr(R))])

    def bounds(self, var: np.ndarray) -> list[tuple[float, float]]:
        lv = np.log(var)
        box = [(float(v) - 25.0, float(v) + 5.0) for v in lv]
        box += [(math.log(_FLOOR), math.log(2.0))] * (2 * self.nm)
        box += [(-5.0, 5.0)] * self.nr
        return box

    def unpack(self, phi: np.ndarray):
        d, nb_, nm = self.d, self.nb, self.nm
        b = np.exp(phi[:nb_])
        B1 = np.exp(phi[nb_:nb_ + nm]).reshape(d, d)
        G1 = np.exp(phi[nb_ + nm:nb_ + 2 * nm]).reshape(d, d)
        R = _corr_from_angles(np.tanh(phi[nb_ + 2 * nm:]), d)
        return b, B1, G1, R


def _objective(phi, x, sigma1, par: _Param):
    b, B1, G1, R = par.unpack(phi)
    n = x.shape[0]
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(B1)) and np.all(np.isfinite(G1))):
        return _PENALTY, np.zeros_like(phi)
    if np.max(np.abs(np.linalg.eigvals(B1 + G1))) >= 1.0 - 1e-9:
        return _PENALTY, np.zeros_like(phi)
    try:
        Rinv = np.linalg.inv(R)
        sign, logdet = np.linalg.slogdet(R)
    except np.linalg.LinAlgError:
        return _PENALTY, np.zeros_like(phi)
    if sign <= 0:
        return _PENALTY, np.zeros_like(phi)
    val, g_theta, g_r = _nll_kernel(x, b, B1, G1, Rinv, logdet, sigma1)
    if not np.isfinite(val):
        return _PENALTY, np.zeros_like(phi)
    grad = np.empty_like(phi)
    k = par.nb + 2 * par.nm
    grad[:k] = g_theta * np.exp(phi[:k])
    # partial-correlation block: d R / d phi by central differences (data free)
    h = 1e-6
    for i in range(par.nr):
        e = np.zeros(par.nr)
        e[i] = h
        zr = phi[k:]
        dR = (_corr_from_angles(np.tanh(zr + e), par.d)
              - _corr_from_angles(np.tanh(zr - e), par.d)) / (2 * h)
        grad[k + i] = np.sum(g_r * dR)
    return val / n, grad / n


def _projected_grad_norm(phi, grad, lo, hi) -> float:
    g = np.array(grad, dtype=float)
    g[(phi <= lo + 1e-12) & (g > 0)] = 0.0
    g[(phi >= hi - 1e-12) & (g < 0)] = 0.0
    return float(np.linalg.norm(g))


def default_start(x: np.ndarray) -> GarchSpec:
    d = x.shape[1]
    var = np.mean(x * x, axis=0)
    naive = x / np.sqrt(var)
    R = np.corrcoef(naive.T) if d > 1 else np.eye(1)
    off = 0.02 * (1 - np.eye(d))
    return GarchSpec(0.05 * var, 0.05 * np.eye(d) + off, 0.85 * np.eye(d) + off,
                     np.atleast_2d(R))


def negloglik(spec: GarchSpec, x: np.ndarray, init="sample_variance") -> float:
    """``-L_n(theta) = 0.5 * sum_j (X_j' Sigma_j^{-1} X_j + log|Sigma_j|)``."""
    x = np.ascontiguousarray(x, dtype=float)
    sigma1 = _initial_sigma(spec, x, init)
    sign, logdet = np.linalg.slogdet(spec.R)
    val, _, _ = _nll_kernel(x, spec.b, spec.B1, spec.G1, np.linalg.inv(spec.R), logdet, sigma1)
    return float(val)


def qmle_fit(x: np.ndarray, init_guess: GarchSpec | None = None, maxiter: int = 2000,
             restarts: int = 3, raise_on_failure: bool = False) -> GarchFit:
    """Gaussian quasi maximum likelihood fit of a CCC-GARCH(1,1).

    Positivity of ``b, B1, G1`` comes from a log parameterization and the
    correlation matrix from partial correlations through ``tanh``. The
    initial conditional variance is the uncentered sample second moment.
    ``converged`` means the gradient of the per-observation objective in the
    unconstrained coordinates (projected onto the box that keeps
    them finite) has norm below 1e-6. If the first start does
    not converge, up to ``restarts`` jittered starts are tried and the best
    iterate is kept.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=float))
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise NonFiniteData("observations contain NaN or Inf")
    if np.any(np.ptp(x, axis=0) == 0):
        raise DegenerateData("a coordinate of the observations is constant")
    n, d = x.shape
    par = _Param(d)
    sigma1 = np.mean(x * x, axis=0)
    start = init_guess if init_guess is not None else default_start(x)
    box = par.bounds(sigma1)
    lo, hi = np.array(box).T
    phi0 = np.clip(par.pack(start.b, start.B1, start.G1, start.R), lo, hi)

    jitter = np.random.default_rng(12345)
    best = None
    total_iter = 0
    for attempt in range(restarts + 1):
        p0 = phi0 if attempt == 0 else np.clip(phi0 + jitter.normal(0, 0.3, phi0.size), lo, hi)
        res = minimize(_objective, p0, args=(x, sigma1, par), jac=True, method="L-BFGS-B",
                       bounds=box, options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-9,
                                            "maxcor": 20})
        total_iter += res.nit
        gnorm = _projected_grad_norm(res.x, res.jac, lo, hi)
        if best is None or res.fun < best[0].fun:
            best = (res, gnorm)
        if gnorm < GRAD_TOL and res.fun < _PENALTY:
            break
    res, gnorm = best
    if res.fun >= _PENALTY:
        raise NoConvergence("QMLE never left the infeasible region")
    converged = gnorm < GRAD_TOL
    if not converged and raise_on_failure:
        raise NoConvergence(f"gradient norm {gnorm:.2e} after {total_iter} iterations")
    b, B1, G1, R = par.unpack(res.x)
    theta = GarchSpec(b, B1, G1, R)
    path = garch_filter(theta, x, init=sigma1)
    return GarchFit(theta, -res.fun * n, converged, total_iter, path.innovations,
                    path.sigma_series, gnorm, attempt + 1)


# ------------------------------------------------------------------ tests

def garch_statistic(residuals: np.ndarray, gammas, family: str = "Ttilde") -> np.ndarray:
    """Raw GARCH-residual statistics for several gammas (or betas for HW)."""
    y = ScaledResiduals.from_raw(residuals)
    if family in ("Ttilde", Family.TTILDE_GARCH):
        return ttilde_values(y, gammas)
    if family in ("T", Family.T_GARCH):
        return t_values(y, gammas)
    if family in ("HW", Family.HW):
        return hw_values(y, gammas)
    raise BadParameter(f"unknown family {family!r}")


def garch_test(fit: GarchFit, w: WeightConfig, family: str = "Ttilde") -> TestResult:
    """Statistic on the QMLE residuals, used as they are (no re-standardization).

    For ``Ttilde`` the result also carries the asymptotic z-score
    ``Ttilde / sigma`` and its one- and two-sided normal p-values.
    """
    from scipy.stats import norm

    value = float(garch_statistic(fit.residuals, [w.gamma], family)[0])
    n, d = fit.residuals.shape
    if family == "Ttilde":
        fam = Family.TTILDE_GARCH
        if w.gamma > 1:
            z = value / math.sqrt(sigma2_closed(w))
            extra = {"z": z, "p_one_sided": float(norm.sf(z)),
                     "p_two_sided": float(2 * norm.sf(abs(z)))}
        else:
            z, extra = math.nan, {}
        return TestResult(value, z, fam, w.gamma, n, d, extra=extra)
    if family == "T":
        return TestResult(value, (w.gamma / math.pi) ** (d / 2) * value, Family.T_GARCH,
                          w.gamma, n, d)
    raise BadParameter(f"unknown family {family!r}")


def bootstrap_resample(fit: GarchFit, gen: np.random.Generator) -> np.ndarray:
    """One parametric resample ``X*_j = Sigma_j^{1/2}(theta_hat) eps*_j``, eps* ~ N(0, I).

    The recursion runs on the resampled path itself and starts from the
    fitted first conditional variance of the original data.
    """
    n, d = fit.residuals.shape
    eps = gen.standard_normal((n, d))
    return simulate_with_innovations(fit.theta_hat, eps, fit.sigma_series[0]).x


def bootstrap_test(x: np.ndarray, w: WeightConfig, family: str = "Ttilde", m_boot: int = 199,
                   rng: RngStream | None = None, alpha: float = 0.05,
                   two_sided: bool = False, max_fail_frac: float = 0.05) -> TestResult:
    """Parametric bootstrap test of Gaussian innovations with full refitting.

    (i) fit and compute the statistic on the residuals; (ii) draw Gaussian
    innovations and rebuild a path from the fitted model; (iii) refit the
    resample and recompute the statistic. The p-value is
    ``(1 + #{T* >= T}) / (m_boot + 1)``; the two-sided variant compares
    absolute values (only meaningful for ``Ttilde``).
    """
    if m_boot < 99:
        raise BadParameter("m_boot must be >= 99")
    if rng is None:
        rng = RngStream(0)
    fit = qmle_fit(x)
    stat = float(garch_statistic(fit.residuals, [w.gamma], family)[0])
    boot = []
    failures = 0
    unconverged = 0
    for b in range(m_boot):
        try:
            xs = bootstrap_resample(fit, rng.substream(b).generator())
            fs = qmle_fit(xs)
            unconverged += not fs.converged
            boot.append(float(garch_statistic(fs.residuals, [w.gamma], family)[0]))
        except CfmgfError:
            failures += 1
            if failures > max_fail_frac * m_boot:
                raise BootstrapUnstable(f"{failures} of {b + 1} bootstrap replicates failed")
    boot = np.array(boot)
    if two_sided:
        exceed = np.sum(np.abs(boot) >= abs(stat))
    else:
        exceed = np.sum(boot >= stat)
    p = (1 + int(exceed)) / (len(boot) + 1)
    n, d = fit.residuals.shape
    fam = {"Ttilde": Family.TTILDE_GARCH, "T": Family.T_GARCH, "HW": Family.HW}[family]
    if family == "Ttilde" and w.gamma > 1:
        scaled = stat / math.sqrt(sigma2_closed(w))
    elif family == "T":
        scaled = (w.gamma / math.pi) ** (d / 2) * stat
    else:
        scaled = stat
    return TestResult(stat, scaled, fam, w.gamma, n, d,
                      decision=Decision(bool(p <= alpha), alpha, p_value=p),
                      extra={"m_boot": len(boot), "failures": failures,
                             "unconverged": unconverged, "fit_converged": fit.converged,
                             "theta_hat": fit.theta_hat.to_dict()})
