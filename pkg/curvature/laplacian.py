from __future__ import annotations

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy import sparse

from core.exceptions import DegreeZeroError, DomainError, InvalidInput
from graphs.graph import Graph

from .orc import OrcResult, normalize

logger = logging.getLogger(__name__)

PSD_TOL = 1e-9
RANGE_TOL = 1e-9


def curvature_weight(orc):
    """
    exp(-1 / (1 - orc)); exactly 0 at orc = 1 and strictly decreasing below it.
    Accepts a scalar or an array.
    """
    k = np.asarray(orc, dtype=np.float64)
    if np.any(k > 1.0):
        raise DomainError(f"curvature weight undefined for orc > 1 (got {k.max()!r})")
    with np.errstate(divide="ignore"):
        w = np.where(k < 1.0, np.exp(-1.0 / np.where(k < 1.0, 1.0 - k, 1.0)), 0.0)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True, eq=False)
class CuspLaplacian:
    weights: Mapping[tuple[int, int], float]
    A_tilde: sparse.csr_matrix
    D_tilde: np.ndarray
    L_tilde: sparse.csr_matrix
    A_tilde_n: sparse.csr_matrix
    L_tilde_n: sparse.csr_matrix

    @property
    def n(self) -> int:
        return self.A_tilde.shape[0]

    def dense_adjacency(self) -> np.ndarray:
        """Normalized curvature adjacency as a dense array (propagation operator)."""
        return self.A_tilde_n.toarray()


@dataclass(frozen=True)
class SpectrumReport:
    min_eig: float
    max_eig: float
    psd: bool
    in_range: bool
    kernel_vector_residual: float

    @property
    def passed(self) -> bool:
        return self.psd and self.in_range

    def as_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} psd={self.psd} in_range={self.in_range} "
            f"min_eig={self.min_eig!r} max_eig={self.max_eig!r} "
            f"kernel_vector_residual={self.kernel_vector_residual!r}"
        )


def build(g: Graph, orc: OrcResult) -> CuspLaplacian:
    """
    Curvature-weighted Laplacian: A~_xy = w(orc_xy) * A_xy, L~ = D~ - A~ and the
    symmetric normalizations. Curvatures are clamped to [-1, 1] first.
    """
    try:
        kappa = normalize(orc.edge_values(g))
    except KeyError as e:
        raise InvalidInput(f"curvature missing for edge {e.args[0]}") from None
    w_bar = curvature_weight(kappa) if kappa.size else np.zeros(0)
    w_bar = np.atleast_1d(w_bar)
    effective = w_bar * g.weight

    keep = effective > 0
    if not np.all(keep):
        logger.warning("Dropped %d edges with curvature 1 (zero weight)", int((~keep).sum()))
    rows = np.concatenate([g.src[keep], g.dst[keep]])
    cols = np.concatenate([g.dst[keep], g.src[keep]])
    data = np.concatenate([effective[keep], effective[keep]])
    A = sparse.csr_matrix((data, (rows, cols)), shape=(g.n, g.n))

    D = np.asarray(A.sum(axis=1)).ravel()
    zero = np.flatnonzero(D <= 0)
    if zero.size:
        if g.degree[zero[0]] > 0:
            logger.warning("Node %d lost all edges to zero curvature weight", int(zero[0]))
        raise DegreeZeroError(int(zero[0]), f"node {int(zero[0])} has zero weighted degree")

    inv_sqrt = sparse.diags(1.0 / np.sqrt(D))
    A_n = sparse.csr_matrix(inv_sqrt @ A @ inv_sqrt)
    L = sparse.csr_matrix(sparse.diags(D) - A)
    L_n = sparse.csr_matrix(sparse.identity(g.n) - A_n)

    weights = {(int(u), int(v)): float(w) for u, v, w in zip(g.src, g.dst, w_bar)}
    return CuspLaplacian(MappingProxyType(weights), A, D, L, A_n, L_n)


def verify_spectrum(cl: CuspLaplacian) -> SpectrumReport:
    """Check that L~_n is PSD with spectrum in [0, 2] and that sqrt(D~) spans its kernel."""
    L_n = cl.L_tilde_n.toarray()
    eigs = np.linalg.eigvalsh(0.5 * (L_n + L_n.T))
    tau = np.sqrt(cl.D_tilde)
    tau = tau / np.linalg.norm(tau)
    residual = float(np.linalg.norm(L_n @ tau))
    min_eig, max_eig = float(eigs[0]), float(eigs[-1])
    return SpectrumReport(
        min_eig=min_eig,
        max_eig=max_eig,
        psd=min_eig >= -PSD_TOL,
        in_range=max_eig <= 2.0 + RANGE_TOL,
        kernel_vector_residual=residual,
    )
