"""Empirical standardization: sample moments, S^{-1/2}, scaled residuals.

Everything downstream is built from the Mahalanobis angles and distances
``Y_i^T Y_j`` of the scaled residuals, which is what makes the statistics
affine invariant.

.. note::
   The sample covariance uses divisor ``n`` (``np.cov(..., bias=True)``),
   not ``n - 1``. Critical values tabulated for these statistics depend on
   that convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from os import PathLike

import numpy as np

from .errors import NonFiniteData, NotSPD, SingularCovariance, TooFewRows

EIG_TOL = 1e-12
SYM_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x d`` observation matrix, one observation per row."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteData("data contain NaN or Inf")
        n, d = v.shape
        if n < d + 1:
            raise TooFewRows(f"need n >= d + 1 observations, got n={n}, d={d}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def read_csv(path: str | PathLike, header: bool = False) -> DataMatrix:
    """Load a comma-separated file with one observation per row."""
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0,
                            ndmin=2, dtype=float)
    except ValueError as exc:
        raise NonFiniteData(f"could not parse {path}: {exc}") from exc
    return DataMatrix(values)


def sym_inv_sqrt(m: np.ndarray, eig_tol: float = EIG_TOL) -> np.ndarray:
    """Symmetric inverse square root ``m^{-1/2}`` of an SPD matrix.

    Parameters
    ----------
    m : ndarray, shape (d, d)
        Symmetric positive definite matrix.
    eig_tol : float
        Relative eigenvalue floor; eigenvalues at or below
        ``eig_tol * max_eigenvalue`` are rejected, never clipped.

    Returns
    -------
    ndarray, shape (d, d)
        Symmetric ``r`` with ``r @ m @ r = I``.

    Raises
    ------
    NotSPD
        If ``m`` is asymmetric beyond 1e-10 or not positive definite.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSPD(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), 1.0)
    if np.max(np.abs(m - m.T)) > SYM_TOL * scale:
        raise NotSPD("matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (m + m.T))
    top = evals[-1]
    if top <= 0 or evals[0] <= eig_tol * top:
        raise NotSPD(f"matrix is not positive definite (eigenvalues {evals})")
    r = (evecs / np.sqrt(evals)) @ evecs.T
    return 0.5 * (r + r.T)


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    cov: np.ndarray
    inv_sqrt: np.ndarray

    @classmethod
    def from_data(cls, x: DataMatrix) -> Standardization:
        v = x.values
        mean = v.mean(axis=0)
        centered = v - mean
        cov = centered.T @ centered / x.n
        try:
            inv_sqrt = sym_inv_sqrt(cov)
        except NotSPD as exc:
            raise SingularCovariance(f"sample covariance is singular: {exc}") from exc
        return cls(_frozen(mean), _frozen(cov), _frozen(inv_sqrt))


class ScaledResiduals:
    """Rows ``Y_j`` with cached squared norms and a lazily built Gram matrix.

    Also used for GARCH residuals, which are fed to the statistics as they
    are (no centering, no rescaling); build those with :meth:`from_raw`.
    """

    def __init__(self, y: np.ndarray):
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        self.y = _frozen(y)
        self.sq_norms = _frozen(np.einsum("ij,ij->i", y, y))

    @classmethod
    def from_raw(cls, y: np.ndarray) -> ScaledResiduals:
        return cls(y)

    @cached_property
    def gram(self) -> np.ndarray:
        return _frozen(self.y @ self.y.T)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.y.shape[1]

    def __repr__(self):
        return f"ScaledResiduals(n={self.n}, d={self.d})"


def scaled_residuals(x: DataMatrix | np.ndarray) -> ScaledResiduals:
    """Scaled residuals ``Y_j = S_n^{-1/2} (X_j - mean)``."""
    if not isinstance(x, DataMatrix):
        x = DataMatrix(x)
    st = Standardization.from_data(x)
    return ScaledResiduals((x.values - st.mean) @ st.inv_sqrt)
