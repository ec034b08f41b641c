from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from core import autograd as ag
from core.exceptions import DimensionMismatch, DomainError, InvalidInput
from manifolds import stereo
from manifolds.product import ProductMatrix, Signature

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ("gaussian", "samples")


def identity_projectors(signature: Signature, d_c: int) -> tuple[np.ndarray, ...]:
    """One 2d_C x d_q map per component, each picking its own run of Euclidean features."""
    projectors = []
    for s in signature.slices:
        P = np.zeros((2 * d_c, s.stop - s.start))
        P[np.arange(s.start, s.stop), np.arange(s.stop - s.start)] = 1.0
        projectors.append(P)
    return tuple(projectors)


@dataclass(frozen=True, eq=False)
class CurvatureEncoder:
    """
    Random Fourier features of node curvature: d_C frequencies give 2d_C
    Euclidean features; per-component projections take them to the product side.
    """
    frequencies: np.ndarray
    distribution: str = "gaussian"
    sigma: float = 1.0
    seed: int = 0
    signature: Optional[Signature] = None
    projectors: Optional[tuple[np.ndarray, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=np.float64).ravel()
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidInput(f"unknown frequency distribution {self.distribution!r}")
        if not np.all(np.isfinite(freqs)):
            raise DomainError("encoder frequencies must be finite")
        freqs.flags.writeable = False
        object.__setattr__(self, "frequencies", freqs)
        if self.signature is not None:
            if self.signature.dim != freqs.size:
                raise DimensionMismatch(
                    f"encoding signature has {self.signature.dim} columns, d_C is {freqs.size}"
                )
            projectors = self.projectors or identity_projectors(self.signature, freqs.size)
            if len(projectors) != len(self.signature):
                raise DimensionMismatch("one projector per encoding component")
            for P, comp in zip(projectors, self.signature):
                if np.shape(P) != (2 * freqs.size, comp.dim):
                    raise DimensionMismatch(
                        f"projector shape {np.shape(P)} != {(2 * freqs.size, comp.dim)}"
                    )
            object.__setattr__(self, "projectors", tuple(np.asarray(P, dtype=np.float64) for P in projectors))

    @classmethod
    def gaussian(cls, d_c: int, sigma: float = 1.0, seed: int = 0,
                 signature: Optional[Signature] = None) -> "CurvatureEncoder":
        """omega_i ~ N(0, sigma^2); the approximated kernel is exp(-sigma^2 (a - b)^2 / 2)."""
        if d_c < 1:
            raise DomainError(f"d_C must be >= 1, got {d_c}")
        if sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {sigma}")
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, sigma, size=d_c), "gaussian", sigma, seed, signature)

    @classmethod
    def from_samples(cls, samples: Sequence[float], signature: Optional[Signature] = None) -> "CurvatureEncoder":
        return cls(np.asarray(samples, dtype=np.float64), "samples", 0.0, 0, signature)

    @property
    def d_c(self) -> int:
        return int(self.frequencies.size)

    def with_signature(self, signature: Signature, projectors=None) -> "CurvatureEncoder":
        return CurvatureEncoder(self.frequencies, self.distribution, self.sigma, self.seed,
                                signature, projectors)


def phi_euclidean(enc: CurvatureEncoder, orc) -> np.ndarray:
    """
    sqrt(1/d_C) [cos(w_1 k), sin(w_1 k), ..., cos(w_d k), sin(w_d k)].
    A scalar gives a 2d_C vector, an array of n values an n x 2d_C matrix.
    """
    k = np.asarray(orc, dtype=np.float64)
    angles = np.multiply.outer(k, enc.frequencies)
    out = np.empty(angles.shape[:-1] + (2 * enc.d_c,))
    out[..., 0::2] = np.cos(angles)
    out[..., 1::2] = np.sin(angles)
    return out * np.sqrt(1.0 / enc.d_c)


def curvature_kernel(enc: CurvatureEncoder, a: float, b: float) -> float:
    """<Phi(a), Phi(b)> = (1/d_C) sum_i cos(w_i (a - b))."""
    return float(phi_euclidean(enc, a) @ phi_euclidean(enc, b))


def target_kernel(a: float, b: float, sigma: float = 1.0) -> float:
    """Characteristic function of N(0, sigma^2) at a - b."""
    return float(np.exp(-0.5 * (sigma * (a - b)) ** 2))


def product_kernel(enc: CurvatureEncoder, a: float, b: float) -> float:
    """
    Sum over encoding components of the origin metric <u, v>_0 = lambda_0^2 <u, v>
    applied to the Euclidean features before projection.
    """
    if enc.signature is None:
        raise InvalidInput("product kernel needs an encoding signature")
    base = curvature_kernel(enc, a, b)
    total = 0.0
    for comp in enc.signature:
        lam = float(np.ravel(stereo.conformal_factor(np.zeros(comp.dim), comp.curvature))[0])
        total += lam * lam * base
    return total


def project_encoding(features, projectors: Sequence, curvatures: Sequence,
                     signature: Optional[Signature] = None) -> ProductMatrix:
    """exp_0 of each component's linear image of the Euclidean features."""
    blocks = [stereo.exp0(features @ P, k) for P, k in zip(projectors, curvatures)]
    return ProductMatrix(blocks, tuple(curvatures), signature)


def phi_product(enc: CurvatureEncoder, orc: float) -> ProductMatrix:
    if enc.signature is None:
        raise InvalidInput("phi_product needs an encoding signature")
    return project_encoding(phi_euclidean(enc, float(orc)), enc.projectors,
                            enc.signature.curvatures, enc.signature)


def node_curvature_vector(node_orc, n: Optional[int] = None) -> np.ndarray:
    """Node curvatures as an array; a mapping must cover nodes 0..n-1."""
    if isinstance(node_orc, Mapping):
        if n is None:
            n = max(node_orc) + 1 if node_orc else 0
        missing = [x for x in range(n) if x not in node_orc]
        if missing:
            raise InvalidInput(f"no curvature for node {missing[0]}")
        values = np.array([node_orc[x] for x in range(n)], dtype=np.float64)
    else:
        values = np.asarray(node_orc, dtype=np.float64).ravel()
        if n is not None and values.size != n:
            raise DimensionMismatch(f"need {n} node curvatures, got {values.size}")
    if np.any(np.abs(values) > 1.0 + 1e-12):
        raise DomainError("node curvature must be clamped to [-1, 1] before encoding")
    return values


def encode_all(enc: CurvatureEncoder, node_orc, n: Optional[int] = None) -> ProductMatrix:
    """Row x = phi_product(k(x))."""
    if enc.signature is None:
        raise InvalidInput("encode_all needs an encoding signature")
    values = node_curvature_vector(node_orc, n)
    return project_encoding(phi_euclidean(enc, values), enc.projectors,
                            enc.signature.curvatures, enc.signature)


def trainable_projectors(enc: CurvatureEncoder) -> list:
    return [ag.parameter(P.copy(), name=f"pe.P.{q}") for q, P in enumerate(enc.projectors)]
