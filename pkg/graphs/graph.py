from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional

import networkx as nx
import numpy as np
from scipy import sparse

from core.exceptions import DimensionMismatch, InvalidInput

logger = logging.getLogger(__name__)


def _frozen(a: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is not None:
        a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Undirected simple weighted graph. Edges are stored once with u < v, in the
    order they were first seen; adjacency structures are built on demand.
    """
    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    features: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    node_ids: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput("graph needs at least one node")
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        weight = np.asarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == weight.shape):
            raise DimensionMismatch("edge arrays differ in length")
        if src.size:
            if np.any(src == dst):
                bad = int(np.flatnonzero(src == dst)[0])
                raise InvalidInput(f"self-loop at node {int(src[bad])}")
            if src.min() < 0 or max(src.max(), dst.max()) >= self.n or dst.min() < 0:
                raise InvalidInput(f"edge endpoint outside 0..{self.n - 1}")
            if np.any(~np.isfinite(weight)) or np.any(weight <= 0):
                raise InvalidInput("edge weights must be finite and > 0")
            if np.any(src > dst):
                raise InvalidInput("edges must be stored with u < v")
            keys = src * self.n + dst
            if np.unique(keys).size != keys.size:
                raise InvalidInput("duplicate undirected edge")
        object.__setattr__(self, "src", _frozen(src))
        object.__setattr__(self, "dst", _frozen(dst))
        object.__setattr__(self, "weight", _frozen(weight))
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != self.n:
                raise DimensionMismatch(f"features need {self.n} rows, got shape {feats.shape}")
            object.__setattr__(self, "features", _frozen(feats))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (self.n,):
                raise DimensionMismatch(f"labels need length {self.n}, got {labels.shape}")
            object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple],
        features: Optional[np.ndarray] = None,
        labels: Optional[np.ndarray] = None,
        node_ids: Optional[tuple] = None,
    ) -> "Graph":
        """
        Build from (u, v) or (u, v, w) tuples. Orientation is canonicalized and
        duplicates keep their first weight.
        """
        src, dst, weight = [], [], []
        seen: set[tuple[int, int]] = set()
        duplicates = 0
        for edge in edges:
            u, v = int(edge[0]), int(edge[1])
            w = float(edge[2]) if len(edge) > 2 else 1.0
            if u == v:
                raise InvalidInput(f"self-loop at node {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            src.append(key[0])
            dst.append(key[1])
            weight.append(w)
        if duplicates:
            logger.warning("Merged %d duplicate undirected edges", duplicates)
        return cls(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                   np.array(weight, dtype=np.float64), features, labels, node_ids)

    # -----------------------------
    # Derived structure
    # -----------------------------

    @property
    def m(self) -> int:
        return int(self.src.size)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(u), int(v), float(w)) for u, v, w in zip(self.src, self.dst, self.weight)]

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(u), int(v)): i for i, (u, v) in enumerate(zip(self.src, self.dst))}

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self.edge_index[key]
        except KeyError:
            raise InvalidInput(f"({u}, {v}) is not an edge") from None

    def has_edge(self, u: int, v: int) -> bool:
        return ((u, v) if u < v else (v, u)) in self.edge_index

    @cached_property
    def _adjacency_lists(self) -> tuple[tuple[int, ...], ...]:
        lists: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in zip(self.src.tolist(), self.dst.tolist()):
            lists[u].append(v)
            lists[v].append(u)
        return tuple(tuple(sorted(nb)) for nb in lists)

    def neighbors(self, x: int) -> tuple[int, ...]:
        return self._adjacency_lists[x]

    @cached_property
    def degree(self) -> np.ndarray:
        deg = np.bincount(self.src, minlength=self.n) + np.bincount(self.dst, minlength=self.n)
        return _frozen(deg.astype(np.int64))

    @property
    def is_unweighted(self) -> bool:
        return bool(np.all(self.weight == 1.0))

    def adjacency(self, weights: Optional[np.ndarray] = None) -> sparse.csr_matrix:
        """Symmetric CSR adjacency, optionally with per-edge weight override."""
        w = self.weight if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != (self.m,):
            raise DimensionMismatch(f"need {self.m} edge weights, got {w.shape}")
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        data = np.concatenate([w, w])
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        G.add_weighted_edges_from(self.edges)
        return G

    def with_edges(self, keep: np.ndarray) -> "Graph":
        """Same nodes, features and labels; only the edges where `keep` is true."""
        keep = np.asarray(keep, dtype=bool)
        return replace(self, src=self.src[keep].copy(), dst=self.dst[keep].copy(),
                       weight=self.weight[keep].copy())

    def with_features(self, features: Optional[np.ndarray]) -> "Graph":
        return replace(self, features=features)

    def with_labels(self, labels: Optional[np.ndarray]) -> "Graph":
        return replace(self, labels=labels)

    def __repr__(self):
        extra = ""
        if self.features is not None:
            extra += f", d_f={self.features.shape[1]}"
        if self.labels is not None:
            extra += f", classes={len(np.unique(self.labels))}"
        return f"Graph(n={self.n}, m={self.m}{extra})"


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues with optional orthonormal eigenvectors as columns."""
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        if vals.ndim != 1:
            raise DimensionMismatch("eigenvalues must be a vector")
        if np.any(np.diff(vals) < 0):
            raise InvalidInput("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", _frozen(vals))
        if self.eigenvectors is not None:
            vecs = np.asarray(self.eigenvectors, dtype=np.float64)
            if vecs.shape != (vals.size, vals.size):
                raise DimensionMismatch(f"eigenvectors need shape {(vals.size, vals.size)}")
            object.__setattr__(self, "eigenvectors", _frozen(vecs))

    def __len__(self):
        return int(self.eigenvalues.size)
