"""
Generalized-PageRank filters on product manifolds.

Hop embeddings are produced by curvature-aware left multiplication with the
normalized CUSP adjacency; a filter combines hops 0..l with Mobius addition of
kappa-scaled hops, folded left to right.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from core import autograd as ag
from core.exceptions import ConfigError, DimensionMismatch, DomainError
from manifolds import stereo
from manifolds.product import ProductMatrix

logger = logging.getLogger(__name__)

LAMBDA_TOL = 1e-9
INIT_KINDS = ("ppr", "highpass", "custom")


@dataclass(frozen=True, eq=False)
class GprWeights:
    gamma: np.ndarray
    init_kind: str = "custom"
    alpha: Optional[float] = None
    trainable: bool = True

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64).ravel()
        if gamma.size == 0:
            raise DimensionMismatch("GPR weights need at least one entry")
        if not np.all(np.isfinite(gamma)):
            raise DomainError("GPR weights must be finite")
        if self.init_kind not in INIT_KINDS:
            raise ConfigError(f"unknown GPR init {self.init_kind!r}")
        if self.init_kind == "ppr" and (np.any(gamma < 0) or abs(gamma.sum() - 1.0) > 1e-12):
            raise DomainError("ppr weights must be nonnegative and sum to 1")
        gamma.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)

    @property
    def L(self) -> int:
        return self.gamma.size - 1

    def prefix(self, length: int) -> "GprWeights":
        """First `length` weights, as-is."""
        return GprWeights(self.gamma[:length], "custom", self.alpha, self.trainable)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _check_depth(L: int) -> None:
    if L < 0:
        raise DomainError(f"filter depth must be >= 0, got {L}")


def gpr_weights_ppr(alpha: float, L: int) -> GprWeights:
    """gamma_l = alpha (1 - alpha)^l for l < L, gamma_L = (1 - alpha)^L."""
    _check_alpha(alpha)
    _check_depth(L)
    gamma = alpha * (1.0 - alpha) ** np.arange(L + 1, dtype=np.float64)
    gamma[L] = (1.0 - alpha) ** L
    return GprWeights(gamma, "ppr", alpha)


def gpr_weights_highpass(alpha: float, L: int) -> GprWeights:
    """gamma_l = (-alpha)^l."""
    _check_alpha(alpha)
    _check_depth(L)
    return GprWeights((-alpha) ** np.arange(L + 1, dtype=np.float64), "highpass", alpha)


def gpr_weights(kind: str, alpha: float, L: int) -> GprWeights:
    if kind == "ppr":
        return gpr_weights_ppr(alpha, L)
    if kind == "highpass":
        return gpr_weights_highpass(alpha, L)
    raise ConfigError(f"unknown GPR init {kind!r}, expected ppr or highpass")


def _gamma(w):
    return w.gamma if isinstance(w, GprWeights) else w


def filter_response(w, lam):
    """g(lambda) = sum_l gamma_l lambda^l by Horner; scalar or array lambda."""
    gamma = np.asarray(ag.value_of(_gamma(w)), dtype=np.float64)
    lam_arr = np.asarray(lam, dtype=np.float64)
    if np.any(np.abs(lam_arr) > 1.0 + LAMBDA_TOL):
        raise DomainError("filter response is defined for |lambda| <= 1")
    acc = np.zeros_like(lam_arr)
    for g in gamma[::-1]:
        acc = acc * lam_arr + g
    return float(acc) if acc.ndim == 0 else acc


def bank_responses(weights: Sequence, lam) -> list:
    """
    Response of each bank entry: entry 0 propagates with the identity, so it is
    the constant sum of its weights; entry l uses the first l + 1 weights.
    """
    lam_arr = np.asarray(lam, dtype=np.float64)
    out = []
    for l, w in enumerate(weights):
        gamma = np.asarray(ag.value_of(_gamma(w)), dtype=np.float64)
        if l == 0:
            out.append(np.full_like(lam_arr, gamma.sum()))
        else:
            out.append(filter_response(gamma[: l + 1], lam_arr))
    return out


# -----------------------------
# Propagation
# -----------------------------

def propagate_step(A_n, H: ProductMatrix) -> ProductMatrix:
    """H^(l) = A_n [x]_kappa H^(l-1), one component at a time."""
    A = A_n.toarray() if hasattr(A_n, "toarray") else np.asarray(A_n, dtype=np.float64)
    if A.shape != (H.n, H.n):
        raise DimensionMismatch(f"operator {A.shape} does not fit {H.n} rows")
    return H.map(lambda block, kappa: stereo.kappa_left_matmul(A, block, kappa))


def propagate(A_n, H0: ProductMatrix, L: int) -> list[ProductMatrix]:
    """[H^(0), ..., H^(L)]."""
    A = A_n.toarray() if hasattr(A_n, "toarray") else np.asarray(A_n, dtype=np.float64)
    hops = [H0]
    for _ in range(L):
        hops.append(propagate_step(A, hops[-1]))
    return hops


def gpr_combine(w, hops: Sequence[ProductMatrix]) -> ProductMatrix:
    """
    Per component: (gamma_0 (x) H^(0)) (+) (gamma_1 (x) H^(1)) (+) ... folded left to
    right; Euclidean blocks reduce to sum_l gamma_l H^(l).
    """
    gamma = _gamma(w)
    if np.shape(ag.value_of(gamma))[0] != len(hops):
        raise DimensionMismatch(f"{np.shape(ag.value_of(gamma))[0]} weights for {len(hops)} hops")
    first = hops[0]
    blocks = []
    for q, kappa in enumerate(first.curvatures):
        acc = None
        for l, hop in enumerate(hops):
            term = stereo.kappa_scale(gamma[l], hop.blocks[q], kappa)
            acc = term if acc is None else stereo.mobius_add(acc, term, kappa)
        blocks.append(acc)
    return ProductMatrix(blocks, first.curvatures, first.signature)


@dataclass(eq=False)
class FilterBank:
    """Omega = [Z^I, Z^(1), ..., Z^(L)] with softmax mixing weights."""
    entries: list[ProductMatrix]
    weights: list
    epsilon_logits: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.entries) != len(self.weights):
            raise DimensionMismatch("one weight vector per bank entry")
        if self.epsilon_logits is None:
            self.epsilon_logits = np.zeros(len(self.entries))

    @property
    def L(self) -> int:
        return len(self.entries) - 1

    @property
    def epsilon(self) -> np.ndarray:
        return np.asarray(ag.value_of(ag.softmax(self.epsilon_logits)))

    def __len__(self):
        return len(self.entries)


def build_filter_bank(A_n, H0: ProductMatrix, banks: Sequence, L: Optional[int] = None,
                      epsilon_logits=None) -> FilterBank:
    """
    Entry 0 combines L + 1 copies of H0 (identity propagation); entry l combines
    hops 0..l with the first l + 1 weights of filter l.
    """
    L = len(banks) - 1 if L is None else L
    if L < 1:
        raise DomainError(f"a filter bank needs L >= 1, got {L}")
    if len(banks) != L + 1:
        raise DimensionMismatch(f"need {L + 1} weight vectors, got {len(banks)}")
    for l, w in enumerate(banks):
        size = np.shape(ag.value_of(_gamma(w)))[0]
        if size != L + 1:
            raise DimensionMismatch(f"filter {l} has {size} weights, expected {L + 1}")

    hops = propagate(A_n, H0, L)
    entries = [gpr_combine(_gamma(banks[0]), [H0] * (L + 1))]
    for l in range(1, L + 1):
        gamma = _gamma(banks[l])
        entries.append(gpr_combine(gamma[: l + 1], hops[: l + 1]))
    return FilterBank(entries, list(banks), epsilon_logits)
