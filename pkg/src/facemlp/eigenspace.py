"""PCA feature extraction over training image vectors.

The d x d image covariance is never formed: with n training vectors the
n x n Gram matrix of centered vectors has the same nonzero eigenvalues,
and each of its eigenvectors maps to a covariance eigenvector ("eigenface")
through the data matrix. The eigendecomposition itself is a dependency-free
cyclic Jacobi sweep, adequate for the few-hundred-vector sets this package
targets.

Eigenvalues are stored on the 1/n covariance scale so persisted spaces are
reproducible regardless of how the caller normalizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    FileError,
    FormatError,
    InsufficientData,
    NoConvergence,
    NotSymmetric,
)

DEFAULT_COMPONENTS = 40
NEGLIGIBLE_EIGENVALUE = 1e-12
_MAX_SWEEPS = 100


@dataclass(eq=False)
class Eigenspace:
    """Mean vector plus an orthonormal eigenvector basis.

    basis has shape (dim, m) with one unit-length eigenface per column,
    ordered by descending eigenvalue.
    """

    dim: int
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def components(self) -> int:
        return self.basis.shape[1]


def eig_symmetric(a: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a real symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvalues descending and
    eigenvectors as orthonormal columns, so that a == V diag(w) V^T within
    rounding. Sweeps stop once the off-diagonal Frobenius norm drops
    below tol.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric("input must be a square matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = a.shape[0]
    if n and np.max(np.abs(a - a.T)) > 1e-12:
        raise NotSymmetric("matrix is not symmetric within 1e-12")

    work = a.copy()
    vectors = np.eye(n)
    if n < 2:
        return work.diagonal().copy(), vectors

    # The norm must be summed over the off-diagonal entries alone.
    # Subtracting the diagonal's sum of squares from the total cancels
    # catastrophically and floors the measurement near eps * ||a||_F^2,
    # which can sit far above tol.
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(_MAX_SWEEPS):
        if math.sqrt(np.sum(work[off_mask] ** 2)) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                app, aqq = work[p, p], work[q, q]
                # A rotation this small cannot move anything representable
                # off the diagonal; performing it anyway lets near-equal
                # diagonal pairs trade full-angle rotations forever.
                if abs(apq) <= 1e-14 * (abs(app) + abs(aqq)):
                    work[p, q] = 0.0
                    work[q, p] = 0.0
                    continue
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c

                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                # Exact values of the rotated 2x2 block, bypassing roundoff.
                work[p, p] = app - t * apq
                work[q, q] = aqq + t * apq
                work[p, q] = 0.0
                work[q, p] = 0.0

                vec_p = vectors[:, p].copy()
                vec_q = vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
    else:
        raise NoConvergence(f"Jacobi sweeps exceeded {_MAX_SWEEPS}")

    values = work.diagonal().copy()
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]


def compute_eigenspace(train_vectors: list[np.ndarray] | np.ndarray,
                       m: int = DEFAULT_COMPONENTS,
                       tol: float = 1e-10) -> Eigenspace:
    """Build the eigenspace of a training set.

    Centers the vectors, eigendecomposes the n x n Gram matrix, and lifts
    each kept Gram eigenvector to a unit-length eigenface. Keeps
    min(m, n - 1) components, dropping any whose covariance eigenvalue is
    negligible (<= 1e-12). Each basis vector is flipped so its
    largest-magnitude entry is positive, making runs comparable.
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in train_vectors]
    if len(vectors) < 2:
        raise InsufficientData("need at least 2 training vectors")
    d = vectors[0].shape[0]
    for v in vectors:
        if v.ndim != 1 or v.shape[0] != d:
            raise DimensionMismatch("training vectors differ in length")
    if m < 1:
        raise ValueError("m must be >= 1")

    n = len(vectors)
    data = np.vstack(vectors)           # (n, d)
    mean = data.mean(axis=0)
    centered = data - mean              # rows are centered vectors

    gram = centered @ centered.T        # (n, n)
    gram_values, gram_vectors = eig_symmetric(gram, tol)
    cov_values = np.maximum(gram_values / n, 0.0)

    keep = min(m, n - 1, int(np.sum(cov_values > NEGLIGIBLE_EIGENVALUE)))
    basis = np.empty((d, keep))
    for i in range(keep):
        face = centered.T @ gram_vectors[:, i]
        face /= np.linalg.norm(face)
        if face[np.argmax(np.abs(face))] < 0:
            face = -face
        basis[:, i] = face
    return Eigenspace(d, mean, basis, cov_values[:keep].copy())


def project(space: Eigenspace, v: np.ndarray) -> np.ndarray:
    """Project a raw vector to its coefficients in the eigenspace."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != space.dim:
        raise DimensionMismatch(f"expected length {space.dim}, got {v.shape}")
    return space.basis.T @ (v - space.mean)


def reconstruct(space: Eigenspace, coeffs: np.ndarray) -> np.ndarray:
    """Rebuild a vector from projection coefficients (mean + basis sum)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1 or coeffs.shape[0] != space.components:
        raise DimensionMismatch(
            f"expected {space.components} coefficients, got {coeffs.shape}"
        )
    return space.mean + space.basis @ coeffs


def _format_row(values: np.ndarray) -> str:
    return " ".join(f"{x:.17g}" for x in values)


def save_eigenspace(space: Eigenspace, path: str | Path) -> None:
    """Write a space as text: header, mean, eigenvalues, basis columns."""
    lines = [f"EIGEN1 {space.dim} {space.components}", _format_row(space.mean),
             _format_row(space.eigenvalues)]
    for i in range(space.components):
        lines.append(_format_row(space.basis[:, i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_eigenspace(path: str | Path) -> Eigenspace:
    """Read a space written by save_eigenspace."""
    path = Path(path)
    try:
        tokens = path.read_text(encoding="ascii").split()
    except OSError as exc:
        raise FileError(f"cannot read eigenspace {path}: {exc}") from exc
    if len(tokens) < 3 or tokens[0] != "EIGEN1":
        raise FormatError(f"{path}: not an EIGEN1 file")
    try:
        d, m = int(tokens[1]), int(tokens[2])
        values = np.array([float(t) for t in tokens[3:]])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed numeric field") from exc
    expected = d + m + m * d
    if values.shape[0] != expected:
        raise FormatError(
            f"{path}: expected {expected} values, found {values.shape[0]}"
        )
    mean = values[:d]
    eigenvalues = values[d : d + m]
    basis = values[d + m :].reshape(m, d).T.copy()
    return Eigenspace(d, mean, basis, eigenvalues)
