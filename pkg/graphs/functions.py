from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import sparse

from core.exceptions import DegreeZeroError, DimensionMismatch, InvalidInput

from .graph import Graph, Spectrum

SYMMETRY_TOL = 1e-10


def homophily_ratio(g: Graph) -> float:
    """Edge homophily: fraction of edges whose endpoints share a label."""
    if g.labels is None:
        raise InvalidInput("homophily ratio needs node labels")
    if g.m == 0:
        raise InvalidInput("homophily ratio needs at least one edge")
    same = g.labels[g.src] == g.labels[g.dst]
    return float(np.mean(same))


def _inverse_sqrt_degree(adj: sparse.csr_matrix) -> np.ndarray:
    deg = np.asarray(adj.sum(axis=1)).ravel()
    zero = np.flatnonzero(deg <= 0)
    if zero.size:
        raise DegreeZeroError(int(zero[0]))
    return 1.0 / np.sqrt(deg)


def normalize_symmetric(adj: sparse.spmatrix) -> sparse.csr_matrix:
    """D^{-1/2} A D^{-1/2} for a symmetric nonnegative adjacency."""
    adj = sparse.csr_matrix(adj)
    inv = sparse.diags(_inverse_sqrt_degree(adj))
    return sparse.csr_matrix(inv @ adj @ inv)


def normalized_adjacency(g: Graph, weights: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    return normalize_symmetric(g.adjacency(weights))


def laplacian(g: Graph, weights: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """Combinatorial Laplacian D - A."""
    adj = g.adjacency(weights)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return sparse.csr_matrix(sparse.diags(deg) - adj)


def normalized_laplacian(g: Graph, weights: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """I - D^{-1/2} A D^{-1/2}."""
    return sparse.csr_matrix(sparse.identity(g.n) - normalized_adjacency(g, weights))


def _dense(M) -> np.ndarray:
    return M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=np.float64)


def spectrum(M, vectors: bool = True) -> Spectrum:
    """Full eigendecomposition of a symmetric matrix, ascending."""
    A = _dense(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"spectrum needs a square matrix, got {A.shape}")
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL:
        raise InvalidInput("spectrum needs a symmetric matrix")
    A = 0.5 * (A + A.T)
    if vectors:
        values, vecs = np.linalg.eigh(A)
        return Spectrum(values, vecs)
    return Spectrum(np.linalg.eigvalsh(A))


def spectral_energy(spec: Spectrum, f: np.ndarray) -> np.ndarray:
    """Share of the signal's energy on each eigenvector, E_i = f_hat_i^2 / sum f_hat^2."""
    if spec.eigenvectors is None:
        raise InvalidInput("spectral energy needs eigenvectors")
    f = np.asarray(f, dtype=np.float64).ravel()
    if f.shape[0] != spec.eigenvectors.shape[0]:
        raise DimensionMismatch(f"signal length {f.shape[0]} != {spec.eigenvectors.shape[0]}")
    if not np.any(f):
        raise InvalidInput("spectral energy of the zero signal is undefined")
    f_hat = spec.eigenvectors.T @ f
    energy = f_hat ** 2
    return energy / energy.sum()
