from __future__ import annotations

import logging
from typing import Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, field_validator

from basiskit.exceptions import NumericalError

logger = logging.getLogger(__name__)

DECOMP_RTOL = 1e-10


class SpectralDecomp(BaseModel):
    """
    Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @field_validator('eigenvalues', 'eigenvectors')
    @classmethod
    def _finite(cls, v: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(v)):
            raise ValueError('non-finite entries in decomposition')
        return v

    def compose(self, eigenvalues: np.ndarray = None) -> np.ndarray:
        lam = self.eigenvalues if eigenvalues is None else eigenvalues
        q = self.eigenvectors
        return as_symmetric((q * lam) @ q.T)


def check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f'expected a square matrix, got shape {a.shape}')
    return a


def as_symmetric(a: np.ndarray) -> np.ndarray:
    """
    (A + Aᵀ)/2, which is symmetric bit-for-bit.
    """
    a = check_square(a)
    return 0.5 * (a + a.T)


def frobenius_norm(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(np.sum(a * a)))


def is_symmetric(a: np.ndarray) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.array_equal(a, a.T)


def eig_sym(a: np.ndarray) -> SpectralDecomp:
    a = as_symmetric(a)
    try:
        lam, q = scipy.linalg.eigh(a)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f'failed symmetric eigendecomposition of {a.shape} matrix [{e}]')
    decomp = SpectralDecomp(eigenvalues=lam, eigenvectors=q)
    scale = 1.0 + frobenius_norm(a)
    err = frobenius_norm(decomp.compose() - a)
    if err > DECOMP_RTOL * scale:
        raise NumericalError(f'eigendecomposition reconstruction error {err:.3e} exceeds tolerance')
    return decomp


def min_eigenvalue(a: np.ndarray) -> float:
    a = as_symmetric(a)
    return float(scipy.linalg.eigvalsh(a)[0])


def project_psd_mu(a: np.ndarray, mu: float) -> np.ndarray:
    """
    Frobenius projection onto {A = Aᵀ, A ⪰ μI}: clamp the spectrum at μ.
    """
    if mu <= 0:
        raise ValueError(f'mu must be positive, got {mu}')
    decomp = eig_sym(a)
    if decomp.eigenvalues[0] >= mu:
        return as_symmetric(a)
    return decomp.compose(np.maximum(decomp.eigenvalues, mu))


def svd(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns (U, sigma, V) with A = U diag(sigma) Vᵀ and sigma descending.
    """
    a = np.asarray(a, dtype=float)
    try:
        u, s, vt = scipy.linalg.svd(a, full_matrices=False)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f'failed SVD of {a.shape} matrix [{e}]')
    return u, s, vt.T


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = scipy.linalg.solve(as_symmetric(a), b, assume_a='pos')
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f'failed positive definite solve [{e}]')
    if not np.all(np.isfinite(x)):
        raise NumericalError('positive definite solve produced non-finite entries')
    return x


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1, order='F')


def unvec(v: np.ndarray, rows: int = None, cols: int = None) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if rows is None:
        rows = int(round(np.sqrt(v.size)))
    if cols is None:
        cols = rows
    if rows * cols != v.size:
        raise ValueError(f'cannot unvec {v.size} entries into {rows}x{cols}')
    return v.reshape((rows, cols), order='F')


def svec_indices(d: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row/column indices of the lower triangle in column-major order.
    """
    cols, rows = np.triu_indices(d)
    return rows, cols


def svec_dim(d: int) -> int:
    return d * (d + 1) // 2


def svec(a: np.ndarray) -> np.ndarray:
    a = check_square(a)
    if not is_symmetric(a):
        raise ValueError('svec expects a symmetric matrix')
    rows, cols = svec_indices(a.shape[0])
    out = a[rows, cols].copy()
    out[rows != cols] *= 2.0
    return out


def smat(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    d = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if svec_dim(d) != v.size:
        raise ValueError(f'{v.size} is not a triangular number')
    rows, cols = svec_indices(d)
    vals = np.where(rows == cols, v, 0.5 * v)
    out = np.zeros((d, d))
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out
