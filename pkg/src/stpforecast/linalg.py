"""Dense linear algebra used by the method.

Matrices are plain 2-D numpy arrays.  ``eig_symmetric`` wraps LAPACK's
symmetric driver and fixes ordering and sign so results are reproducible;
``svd_oracle`` is only used to cross-check the eigenvalue route in tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .types import DimensionError, STPError

SYMMETRY_RTOL = 1e-10


class ConvergenceError(STPError):
    pass


@dataclass(frozen=True, eq=False)
class EigResult:
    """Eigenvalues (descending) and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def rank(self) -> int:
        return self.eigenvalues.size


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive.

    ``argmax`` returns the first maximum, so ties go to the lowest index.
    """
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eig_symmetric(c) -> EigResult:
    """Eigendecomposition of a real symmetric matrix.

    Eigenvalues are returned in descending order (stable with respect to the
    solver's output order for ties) and each eigenvector is sign-normalized
    by :func:`fix_signs`.
    """
    c = _as_matrix(c)
    if c.shape[0] != c.shape[1]:
        raise DimensionError(f"matrix must be square, got {c.shape}")
    scale = max(float(np.max(np.abs(c))) if c.size else 0.0, np.finfo(float).tiny)
    asym = float(np.max(np.abs(c - c.T))) if c.size else 0.0
    if asym > SYMMETRY_RTOL * scale:
        raise STPError(f"matrix is not symmetric (max |C - C^T| = {asym:.3e})")
    try:
        w, v = scipy.linalg.eigh(c, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    return EigResult(w[order], fix_signs(v[:, order]))


def svd_oracle(q):
    """Singular values (descending) and left singular vectors of ``q``."""
    q = _as_matrix(q)
    try:
        u, s, _ = np.linalg.svd(q, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    return s, fix_signs(u)


def matmul(a, b) -> np.ndarray:
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b
