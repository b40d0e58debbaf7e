from __future__ import annotations

import logging
import math
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, field_validator

from basiskit.exceptions import BasisError
from basiskit.matrix import (
    as_symmetric,
    check_square,
    frobenius_norm,
    smat,
    svd,
    svec,
    svec_dim,
    svec_indices,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)

# Explicit ℬ is N×N with N up to d²; past this size only closed forms are used.
MAX_TRANSITION_DIM = 40
RANK_RTOL = 1e-10


class Space(str, Enum):
    FULL = 'full'
    SYMMETRIC = 'symmetric'


class BasisKind(str, Enum):
    STANDARD = 'standard'
    TRIANGULAR_SYM = 'triangular_sym'
    PSD_EXAMPLE = 'psd_example'
    DATA_SUBSPACE = 'data_subspace'
    PSD_SUBSPACE = 'psd_subspace'
    GENERIC = 'generic'


class SubspaceBasis(BaseModel):
    """
    Orthonormal columns v_1..v_r spanning a client's data vectors.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    vectors: np.ndarray

    @field_validator('vectors')
    @classmethod
    def _orthonormal(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1 or v.shape[1] > v.shape[0]:
            raise ValueError(f'expected a d x r matrix with 1 <= r <= d, got {v.shape}')
        err = np.max(np.abs(v.T @ v - np.eye(v.shape[1])))
        if err > 1e-10:
            raise ValueError(f'columns are not orthonormal (error {err:.3e})')
        return v

    @property
    def d(self) -> int:
        return self.vectors.shape[0]

    @property
    def r(self) -> int:
        return self.vectors.shape[1]


class Conditioning(BaseModel):
    inv_norm_2: float
    inv_norm_inf: float
    max_element_norm: float


def _pairs(d: int, space: Space) -> List[Tuple[int, int]]:
    if space == Space.FULL:
        return [(j, l) for l in range(d) for j in range(d)]
    rows, cols = svec_indices(d)
    return list(zip(rows.tolist(), cols.tolist()))


def _unit(d: int, j: int, l: int) -> np.ndarray:
    e = np.zeros((d, d))
    e[j, l] = 1.0
    return e


class MatrixBasis:
    """
    A basis {B^{jl}} of ℝ^{d×d} (space FULL) or of 𝒮^d (space SYMMETRIC).

    Coefficients are always returned as a d×d grid G. For 𝒮^d the grid is
    symmetric with off-diagonal entries halved, so that reconstruction is
    Σ over all (j, l) of G_jl B^{jl} in both spaces, with B^{lj} = B^{jl}.

    Closed-form kinds never build ℬ unless asked (transition, conditioning).
    A rotation Q conjugates every element: Q B^{jl} Qᵀ.
    """

    def __init__(
        self,
        d: int,
        space: Space,
        kind: BasisKind,
        rotation: np.ndarray = None,
        active: int = None,
        elements: Sequence[np.ndarray] = None,
    ):
        if d < 1:
            raise BasisError(f'd must be at least 1, got {d}')
        self.d = d
        self.space = space
        self.kind = kind
        self.rotation = rotation
        self.active = d if active is None else active
        self._elements = None
        self._lu = None
        if kind == BasisKind.GENERIC:
            self._init_generic(elements)

    def _init_generic(self, elements: Sequence[np.ndarray]):
        if elements is None or len(elements) != self.size:
            raise BasisError(f'a basis of the {self.space.value} space needs {self.size} elements')
        mats = [check_square(b) for b in elements]
        if any(b.shape != (self.d, self.d) for b in mats):
            raise BasisError(f'elements must be {self.d}x{self.d}')
        if self.space == Space.SYMMETRIC and any(not np.array_equal(b, b.T) for b in mats):
            raise BasisError('elements of a symmetric basis must be symmetric')
        self._elements = mats
        transition = self.transition()
        lu, piv = scipy.linalg.lu_factor(transition, check_finite=True)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= RANK_RTOL * max(pivots.max(), 1.0):
            raise BasisError('elements are linearly dependent')
        self._lu = (lu, piv)

    @property
    def symmetric(self) -> bool:
        return self.space == Space.SYMMETRIC

    @property
    def size(self) -> int:
        return svec_dim(self.d) if self.symmetric else self.d * self.d

    @property
    def orthogonal(self) -> bool:
        if self.kind in (BasisKind.STANDARD, BasisKind.TRIANGULAR_SYM, BasisKind.DATA_SUBSPACE):
            return True
        if self.kind in (BasisKind.PSD_EXAMPLE, BasisKind.PSD_SUBSPACE):
            return self.d == 1
        flat = np.stack([vec(b) for b in self.elements()])
        gram = flat @ flat.T
        off = gram - np.diag(np.diag(gram))
        return bool(np.max(np.abs(off)) <= 1e-10)

    @property
    def n_b(self) -> int:
        return 1 if self.orthogonal else self.d * self.d

    @property
    def psd(self) -> bool:
        if self.kind in (BasisKind.PSD_EXAMPLE, BasisKind.PSD_SUBSPACE):
            return True
        if self.kind == BasisKind.GENERIC:
            for b in self.elements():
                if not np.array_equal(b, b.T) or scipy.linalg.eigvalsh(b)[0] < -1e-10:
                    return False
            return True
        return self.d == 1

    @property
    def max_element_norm(self) -> float:
        if self.kind == BasisKind.GENERIC:
            return max(frobenius_norm(b) for b in self.elements())
        if self.d == 1 or self.kind in (BasisKind.STANDARD, BasisKind.DATA_SUBSPACE):
            return 1.0
        if self.kind == BasisKind.TRIANGULAR_SYM:
            return math.sqrt(2.0)
        return 2.0

    def pairs(self) -> List[Tuple[int, int]]:
        """
        Element indices in vec order (FULL) or svec order (SYMMETRIC).
        """
        return _pairs(self.d, self.space)

    def element(self, j: int, l: int) -> np.ndarray:
        if self.symmetric and j < l:
            j, l = l, j
        if self._elements is not None:
            return self._elements[self.pairs().index((j, l))]
        d = self.d
        if self.kind in (BasisKind.STANDARD, BasisKind.DATA_SUBSPACE):
            b = _unit(d, j, l)
        elif self.kind == BasisKind.TRIANGULAR_SYM:
            if j == l:
                b = _unit(d, j, j)
            elif j > l:
                b = _unit(d, j, l) + _unit(d, l, j)
            else:
                b = _unit(d, j, l) - _unit(d, l, j)
        else:
            b = _unit(d, j, j)
            if j != l:
                b = b + _unit(d, j, l) + _unit(d, l, j) + _unit(d, l, l)
        if self.rotation is not None:
            b = self.rotation @ b @ self.rotation.T
            if self.symmetric:
                b = as_symmetric(b)
        return b

    def elements(self) -> List[np.ndarray]:
        if self._elements is not None:
            return list(self._elements)
        return [self.element(j, l) for j, l in self.pairs()]

    def transition(self) -> np.ndarray:
        """
        ℬ: columns vec(B^{jl}) or svec(B^{jl}) in element order.
        """
        if self.d > MAX_TRANSITION_DIM:
            raise BasisError(f'transition matrix for d={self.d} is too large to build')
        to_col = svec if self.symmetric else vec
        return np.stack([to_col(b) for b in self.elements()], axis=1)

    def _check_input(self, a: np.ndarray) -> np.ndarray:
        a = check_square(a)
        if a.shape[0] != self.d:
            raise BasisError(f'expected a {self.d}x{self.d} matrix, got {a.shape}')
        if self.symmetric:
            scale = 1e-12 * (1.0 + frobenius_norm(a))
            if np.max(np.abs(a - a.T)) > scale:
                raise BasisError('a symmetric basis only represents symmetric matrices')
            a = as_symmetric(a)
        return a

    def coeffs(self, a: np.ndarray) -> np.ndarray:
        a = self._check_input(a)
        if self.kind == BasisKind.GENERIC:
            return self.solve_coeffs(a)
        m = a if self.rotation is None else self.rotation.T @ a @ self.rotation
        if self.kind in (BasisKind.STANDARD, BasisKind.DATA_SUBSPACE):
            return m
        if self.kind == BasisKind.TRIANGULAR_SYM:
            sym = 0.5 * (m + m.T)
            skew = 0.5 * (m - m.T)
            return np.tril(sym) + np.triu(skew, 1)
        m = as_symmetric(m)
        off = m - np.diag(np.diag(m))
        grid = 0.5 * off
        np.fill_diagonal(grid, np.diag(m) - off.sum(axis=1))
        return grid

    def reconstruct(self, g: np.ndarray) -> np.ndarray:
        g = check_square(g)
        if g.shape[0] != self.d:
            raise BasisError(f'expected a {self.d}x{self.d} grid, got {g.shape}')
        if self.kind == BasisKind.GENERIC:
            if self.symmetric:
                return smat(self.transition() @ svec(as_symmetric(g)))
            return unvec(self.transition() @ vec(g))
        if self.kind in (BasisKind.STANDARD, BasisKind.DATA_SUBSPACE):
            m = g.copy()
        elif self.kind == BasisKind.TRIANGULAR_SYM:
            lower = np.tril(g, -1)
            upper = np.triu(g, 1)
            m = np.diag(np.diag(g)) + lower + lower.T + upper - upper.T
        else:
            pair = g + g.T
            off = pair - np.diag(np.diag(pair))
            m = off.copy()
            np.fill_diagonal(m, np.diag(g) + off.sum(axis=1))
        if self.rotation is not None:
            m = self.rotation @ m @ self.rotation.T
        if self.symmetric:
            m = as_symmetric(m)
        return m

    def solve_coeffs(self, a: np.ndarray) -> np.ndarray:
        """
        Coefficients from the transition system ℬx = vec(A) (or svec).
        """
        a = self._check_input(a)
        if self._lu is None:
            transition = self.transition()
            self._lu = scipy.linalg.lu_factor(transition)
        if self.symmetric:
            return smat(scipy.linalg.lu_solve(self._lu, svec(a)))
        return unvec(scipy.linalg.lu_solve(self._lu, vec(a)))

    def block(self, g: np.ndarray) -> np.ndarray:
        return g[:self.active, :self.active]

    def embed(self, block: np.ndarray) -> np.ndarray:
        g = np.zeros((self.d, self.d))
        g[:self.active, :self.active] = block
        return g

    def conditioning(self) -> Conditioning:
        if self.kind == BasisKind.STANDARD:
            return Conditioning(inv_norm_2=1.0, inv_norm_inf=1.0, max_element_norm=1.0)
        inverse = scipy.linalg.inv(self.transition())
        return Conditioning(
            inv_norm_2=float(svd(inverse)[1][0]),
            inv_norm_inf=float(np.max(np.sum(np.abs(inverse), axis=1))),
            max_element_norm=self.max_element_norm,
        )

    def __repr__(self):
        return f'MatrixBasis(d={self.d}, kind={self.kind.value}, active={self.active})'


def standard_basis(d: int) -> MatrixBasis:
    return MatrixBasis(d, Space.FULL, BasisKind.STANDARD)


def triangular_sym_basis(d: int) -> MatrixBasis:
    return MatrixBasis(d, Space.FULL, BasisKind.TRIANGULAR_SYM)


def psd_sym_basis(d: int) -> MatrixBasis:
    return MatrixBasis(d, Space.SYMMETRIC, BasisKind.PSD_EXAMPLE)


def from_elements(elements: Sequence[np.ndarray], space: Space = Space.FULL) -> MatrixBasis:
    elements = list(elements)
    if not elements:
        raise BasisError('no elements')
    d = np.asarray(elements[0]).shape[0]
    return MatrixBasis(d, space, BasisKind.GENERIC, elements=elements)


def data_subspace_basis(features: np.ndarray, tol: float = 1e-10) -> SubspaceBasis:
    """
    Orthonormal basis of span{a_j} from the SVD of the m×d data matrix.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    u, s, v = svd(x)
    if s.size == 0 or s[0] == 0:
        raise BasisError('data vectors are all zero')
    r = int(np.sum(s > tol * s[0]))
    vectors = v[:, :r]
    residual = x - (x @ vectors) @ vectors.T
    worst = np.linalg.norm(residual, axis=1) - 1e-8 * np.linalg.norm(x, axis=1)
    if np.max(worst) > 1e-12:
        raise BasisError(f'data not captured by rank {r} subspace (excess residual {np.max(worst):.3e})')
    logger.debug(f'data subspace of rank {r} in dimension {x.shape[1]}')
    return SubspaceBasis(vectors=vectors)


def _completion(subspace: SubspaceBasis) -> np.ndarray:
    v = subspace.vectors
    complement = scipy.linalg.null_space(v.T)
    q = np.hstack([v, complement])
    if q.shape[1] != subspace.d or np.max(np.abs(q.T @ q - np.eye(subspace.d))) > 1e-10 * subspace.d:
        raise BasisError('failed to complete the subspace to an orthogonal frame')
    return q


def subspace_matrix_basis(subspace: SubspaceBasis, d: int = None) -> MatrixBasis:
    """
    Elements v_t v_lᵀ for t, l ≤ r completed by unit matrices in the rotated
    frame Q = [V, V⊥]. Coefficients of A are QᵀAQ; for A ∈ span{v_t v_lᵀ}
    only the leading r×r block is nonzero.
    """
    d = subspace.d if d is None else d
    if d != subspace.d:
        raise BasisError(f'subspace lives in dimension {subspace.d}, not {d}')
    return MatrixBasis(d, Space.FULL, BasisKind.DATA_SUBSPACE, rotation=_completion(subspace), active=subspace.r)


def psd_subspace_basis(subspace: SubspaceBasis, d: int = None) -> MatrixBasis:
    """
    The PSD basis of 𝒮^d conjugated by Q = [V, V⊥]; elements stay PSD and
    data Hessians keep their coefficients in the leading r×r block.
    """
    d = subspace.d if d is None else d
    if d != subspace.d:
        raise BasisError(f'subspace lives in dimension {subspace.d}, not {d}')
    return MatrixBasis(d, Space.SYMMETRIC, BasisKind.PSD_SUBSPACE, rotation=_completion(subspace), active=subspace.r)


def outer_product_rank(vectors: np.ndarray) -> int:
    """
    Rank of {vec(v_t v_lᵀ)}; r² when the v_t are linearly independent.
    """
    v = np.asarray(vectors, dtype=float)
    r = v.shape[1]
    cols = [vec(np.outer(v[:, t], v[:, l])) for l in range(r) for t in range(r)]
    return int(np.linalg.matrix_rank(np.stack(cols, axis=1)))
