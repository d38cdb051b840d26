"""Laplacian eigenbases, the spectral cutoff rule and truncated transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DisconnectedGraph, EmptyBand

__all__ = [
    "ZERO_TOL",
    "EigenPairs",
    "TruncatedBasis",
    "eigendecompose",
    "select_cutoff",
    "truncated_basis",
    "project",
    "reconstruct",
]

# Eigenvalues below ZERO_TOL * lambda_max count as the constant mode.
ZERO_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Make the largest-magnitude entry of each column positive; argmax picks
    # the lowest index on ties.
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass(frozen=True)
class EigenPairs:
    """Full Laplacian spectrum, ascending, with orthonormal eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "vectors", _frozen(self.vectors))

    @property
    def lambda_max(self) -> float:
        return float(self.values[-1])

    @property
    def zero_threshold(self) -> float:
        return ZERO_TOL * max(self.lambda_max, 0.0)

    @property
    def num_zero_modes(self) -> int:
        return int(np.count_nonzero(self.values < self.zero_threshold))


@dataclass(frozen=True)
class TruncatedBasis:
    """First ``k`` non-constant eigenvectors (``vectors``, N x k) and their eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _frozen(self.vectors))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.values.shape[0]:
            raise DimensionMismatch(
                f"basis has {self.vectors.shape} vectors but {self.values.shape} values"
            )

    @property
    def k(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_nodes(self) -> int:
        return self.vectors.shape[0]


def eigendecompose(L) -> EigenPairs:
    """Dense symmetric eigendecomposition with a fixed sign convention.

    ``numpy.linalg.LinAlgError`` from the solver is propagated unchanged.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise DimensionMismatch(f"Laplacian must be square, got {L.shape}")
    if not np.allclose(L, L.T, rtol=0.0, atol=1e-12):
        raise ValueError("Laplacian must be symmetric")
    values, vectors = np.linalg.eigh(L)
    return EigenPairs(values, _fix_signs(vectors))


def select_cutoff(values, lambda_ratio: float) -> int:
    """Number of non-constant eigenvalues at or below ``lambda_ratio * lambda_max``.

    Raises
    ------
    EmptyBand
        If no non-constant eigenvalue passes the threshold.
    """
    if not (0.0 < lambda_ratio <= 1.0):
        raise ValueError(f"lambda_ratio must be in (0, 1], got {lambda_ratio}")
    values = np.asarray(values, dtype=float)
    lmax = float(values[-1])
    zero = ZERO_TOL * lmax
    nonconst = values[values >= zero]
    if lmax <= 0.0 or nonconst.size == 0:
        raise EmptyBand("spectrum has no non-zero eigenvalue")
    k = int(np.count_nonzero(nonconst <= lambda_ratio * lmax))
    if k < 1:
        raise EmptyBand(
            f"no non-constant eigenvalue <= {lambda_ratio} * {lmax:.6g}; "
            f"smallest is {nonconst[0]:.6g}"
        )
    return k


def truncated_basis(eig: EigenPairs, k: int) -> TruncatedBasis:
    """Columns ``1..k`` of the eigenvector matrix, skipping the constant mode."""
    n = eig.vectors.shape[0]
    if eig.num_zero_modes > 1:
        raise DisconnectedGraph(
            f"{eig.num_zero_modes} eigenvalues below {eig.zero_threshold:.3g}; "
            "graph is not connected"
        )
    if not (1 <= k <= n - 1):
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    return TruncatedBasis(eig.vectors[:, 1 : k + 1], eig.values[1 : k + 1])


def project(basis: TruncatedBasis, x) -> np.ndarray:
    """Spectral coefficients ``U_k^T x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.num_nodes,):
        raise DimensionMismatch(f"signal of shape {x.shape} for N={basis.num_nodes}")
    return basis.vectors.T @ x


def reconstruct(basis: TruncatedBasis, coeffs) -> np.ndarray:
    """Vertex-domain signal ``U_k c``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.k,):
        raise DimensionMismatch(f"coefficients of shape {coeffs.shape} for k={basis.k}")
    return basis.vectors @ coeffs
