from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from core import autograd as ag
from core.exceptions import ConfigError, DimensionMismatch, DomainError, InvalidInput

from . import stereo

logger = logging.getLogger(__name__)

KINDS = ("H", "S", "E")
CURVATURE_FLOOR = 1e-6


def format_curvature(value: float) -> str:
    if value == 0:
        return "0"
    return format(float(value), ".10g")


@dataclass(frozen=True)
class Component:
    """One constant-curvature factor: kind H (kappa < 0), S (kappa > 0) or E (kappa = 0)."""
    kind: str
    dim: int
    curvature: float
    trainable: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown component kind {self.kind!r}")
        if int(self.dim) < 1:
            raise ConfigError(f"component dimension must be positive, got {self.dim}")
        c = float(self.curvature)
        if self.kind == "H" and not c < 0:
            raise ConfigError(f"H component needs curvature < 0, got {c}")
        if self.kind == "S" and not c > 0:
            raise ConfigError(f"S component needs curvature > 0, got {c}")
        if self.kind == "E" and c != 0:
            raise ConfigError(f"E component needs curvature 0, got {c}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "curvature", c)
        if self.kind == "E":
            object.__setattr__(self, "trainable", False)

    def __str__(self):
        return f"{self.kind}:{self.dim}:{format_curvature(self.curvature)}"


@dataclass(frozen=True)
class Signature:
    """Ordered product of components; block q occupies columns slices[q]."""
    components: tuple[Component, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigError("a signature needs at least one component")
        if sum(1 for c in comps if c.kind == "E") > 1:
            raise ConfigError("at most one E component is allowed")
        object.__setattr__(self, "components", comps)

    @classmethod
    def parse(cls, text: str) -> "Signature":
        """`H:16:-0.45,S:16:0.25,E:16:0`; the curvature may be omitted (H -> -1, S -> 1, E -> 0)."""
        comps = []
        for part in (p.strip() for p in text.split(",")):
            if not part:
                continue
            fields = part.split(":")
            if len(fields) not in (2, 3):
                raise ConfigError(f"bad signature component {part!r}, expected kind:dim:curvature")
            kind = fields[0].strip().upper()
            try:
                dim = int(fields[1])
                if len(fields) == 3:
                    curvature = float(fields[2])
                else:
                    curvature = {"H": -1.0, "S": 1.0, "E": 0.0}.get(kind, 0.0)
            except ValueError:
                raise ConfigError(f"bad signature component {part!r}") from None
            comps.append(Component(kind, dim, curvature))
        return cls(tuple(comps))

    @classmethod
    def euclidean(cls, dim: int) -> "Signature":
        return cls((Component("E", dim, 0.0),))

    def __str__(self):
        return ",".join(str(c) for c in self.components)

    def __len__(self):
        return len(self.components)

    def __iter__(self) -> Iterator[Component]:
        return iter(self.components)

    def __getitem__(self, q: int) -> Component:
        return self.components[q]

    @property
    def dim(self) -> int:
        return sum(c.dim for c in self.components)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.dim for c in self.components)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(c.kind for c in self.components)

    @property
    def curvatures(self) -> tuple[float, ...]:
        return tuple(c.curvature for c in self.components)

    @property
    def slices(self) -> tuple[slice, ...]:
        bounds = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        return tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))

    def with_curvatures(self, values: Sequence[float]) -> "Signature":
        if len(values) != len(self):
            raise DimensionMismatch(f"need {len(self)} curvatures, got {len(values)}")
        return Signature(tuple(
            Component(c.kind, c.dim, 0.0 if c.kind == "E" else float(v), c.trainable)
            for c, v in zip(self.components, values)
        ))

    def with_dims(self, dims: Sequence[int]) -> "Signature":
        if len(dims) != len(self):
            raise DimensionMismatch(f"need {len(self)} dims, got {len(dims)}")
        return Signature(tuple(
            Component(c.kind, int(d), c.curvature, c.trainable)
            for c, d in zip(self.components, dims)
        ))

    def rescaled(self, total: int) -> "Signature":
        """Same kinds and curvatures with `total` columns split in proportion to the current dims."""
        return self.with_dims(split_dims(self.dims, total))


def split_dims(weights: Sequence[float], total: int) -> list[int]:
    """
    Integer dims proportional to `weights` summing to `total`: floor, at least 1
    each, remainder handed to the largest weights (lower index wins ties).
    """
    w = np.asarray(weights, dtype=np.float64)
    k = w.size
    if k == 0:
        raise InvalidInput("no components to size")
    if total < k:
        raise DimensionMismatch(f"total dimension {total} is smaller than the {k} components")
    if np.any(w < 0) or w.sum() <= 0:
        raise InvalidInput("component weights must be nonnegative and not all zero")
    raw = w / w.sum() * total
    dims = np.maximum(np.floor(raw).astype(int), 1)
    order = sorted(range(k), key=lambda i: (-w[i], i))
    i = 0
    while dims.sum() < total:
        dims[order[i % k]] += 1
        i += 1
    while dims.sum() > total:
        for j in order:
            if dims[j] > 1:
                dims[j] -= 1
                break
    return [int(d) for d in dims]


# -----------------------------
# Block matrices
# -----------------------------

class ProductMatrix:
    """
    n x d matrix (or a single d-vector) whose column blocks live on separate
    components. Curvatures may be trainable tensors; the signature is kept for
    layout and may be absent for ad-hoc concatenations.
    """

    def __init__(self, blocks: Sequence, curvatures: Sequence, signature: Optional[Signature] = None):
        blocks = tuple(blocks)
        curvatures = tuple(curvatures)
        if len(blocks) != len(curvatures):
            raise DimensionMismatch(f"{len(blocks)} blocks but {len(curvatures)} curvatures")
        if signature is not None:
            if len(signature) != len(blocks):
                raise DimensionMismatch(f"signature has {len(signature)} components, got {len(blocks)} blocks")
            for q, (block, comp) in enumerate(zip(blocks, signature)):
                if np.shape(ag.value_of(block))[-1] != comp.dim:
                    raise DimensionMismatch(
                        f"block {q} has width {np.shape(ag.value_of(block))[-1]}, component needs {comp.dim}"
                    )
        rows = {np.shape(ag.value_of(b))[:-1] for b in blocks}
        if len(rows) > 1:
            raise DimensionMismatch("blocks disagree on the number of rows")
        self.blocks = blocks
        self.curvatures = curvatures
        self.signature = signature

    @classmethod
    def from_array(cls, X, signature: Signature, curvatures: Optional[Sequence] = None) -> "ProductMatrix":
        if np.shape(ag.value_of(X))[-1] != signature.dim:
            raise DimensionMismatch(f"width {np.shape(ag.value_of(X))[-1]} != signature dim {signature.dim}")
        curvatures = signature.curvatures if curvatures is None else curvatures
        blocks = [ag.getitem(X, (Ellipsis, s)) for s in signature.slices]
        return cls(blocks, curvatures, signature)

    def __len__(self):
        return len(self.blocks)

    @property
    def n(self) -> int:
        shape = np.shape(ag.value_of(self.blocks[0]))
        return shape[0] if len(shape) > 1 else 1

    @property
    def width(self) -> int:
        return sum(np.shape(ag.value_of(b))[-1] for b in self.blocks)

    def to_array(self):
        return ag.concatenate(list(self.blocks), axis=-1)

    def values(self) -> np.ndarray:
        return np.asarray(ag.value_of(self.to_array()))

    def map(self, fn) -> "ProductMatrix":
        """Apply `fn(block, kappa)` to every component."""
        return ProductMatrix([fn(b, k) for b, k in zip(self.blocks, self.curvatures)],
                             self.curvatures, self.signature)

    def concat(self, other: "ProductMatrix") -> "ProductMatrix":
        return ProductMatrix(self.blocks + other.blocks, self.curvatures + other.curvatures)

    def in_domain(self) -> bool:
        return all(stereo.in_domain(b, k) for b, k in zip(self.blocks, self.curvatures))


def _as_product(x, signature: Optional[Signature], curvatures) -> ProductMatrix:
    if isinstance(x, ProductMatrix):
        return x
    if signature is None:
        raise DimensionMismatch("a raw array needs a signature")
    return ProductMatrix.from_array(x, signature, curvatures)


def product_exp0(x, signature: Optional[Signature] = None, curvatures=None):
    """Componentwise exp at the origin; returns the input's kind (array or ProductMatrix)."""
    out = _as_product(x, signature, curvatures).map(stereo.exp0)
    return out if isinstance(x, ProductMatrix) else out.to_array()


def product_log0(x, signature: Optional[Signature] = None, curvatures=None):
    out = _as_product(x, signature, curvatures).map(stereo.log0)
    return out if isinstance(x, ProductMatrix) else out.to_array()


def product_sq_distance(x, y, signature: Optional[Signature] = None, curvatures=None):
    """Sum over components of squared geodesic distances, one value per row."""
    px = _as_product(x, signature, curvatures)
    py = _as_product(y, signature, curvatures)
    if len(px) != len(py) or any(float(ag.value_of(a)) != float(ag.value_of(b))
                                 for a, b in zip(px.curvatures, py.curvatures)):
        raise DimensionMismatch("points live on different products")
    total = 0.0
    for a, b, k in zip(px.blocks, py.blocks, px.curvatures):
        if np.shape(ag.value_of(a)) != np.shape(ag.value_of(b)):
            raise DimensionMismatch("block shapes differ")
        d = stereo.distance(a, b, k)
        total = total + d * d
    return total


def product_distance(x, y, signature: Optional[Signature] = None, curvatures=None):
    """sqrt(sum_q d_q(x_q, y_q)^2)."""
    return ag.sqrt(product_sq_distance(x, y, signature, curvatures))


# -----------------------------
# Trainable curvature
# -----------------------------

def clamp_trainable_curvature(raw, kind: str):
    """H -> -(softplus(raw) + 1e-6), S -> softplus(raw) + 1e-6, E -> 0."""
    if kind == "E":
        return 0.0
    if kind not in KINDS:
        raise ConfigError(f"unknown component kind {kind!r}")
    magnitude = ag.softplus(raw) + CURVATURE_FLOOR
    return -magnitude if kind == "H" else magnitude


def raw_from_curvature(curvature: float, kind: str) -> float:
    """Inverse of clamp_trainable_curvature for initialization."""
    if kind == "E":
        return 0.0
    magnitude = abs(float(curvature)) - CURVATURE_FLOOR
    if magnitude <= 0:
        raise DomainError(f"curvature {curvature} is too close to 0 for a {kind} component")
    # softplus^-1(m) = log(expm1(m)), rewritten for large m
    return float(magnitude + np.log(-np.expm1(-magnitude)))
