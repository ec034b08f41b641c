"""
Ollivier-Ricci curvature of edges and nodes.

kappa(x, y) = 1 - W1(m_x, m_y) / d(x, y) with the lazy walk measure m_x: mass
`delta` stays at x, the rest spreads uniformly over the neighbours. W1 is solved
exactly (network simplex), with log-domain Sinkhorn, or replaced by the
combinatorial bounds of the edge's degrees and triangle count.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from multiprocessing import Pool
from types import MappingProxyType
from typing import Mapping, Optional

import networkx as nx
import numpy as np
import ot

from core.exceptions import (
    DegreeZeroError,
    DimensionMismatch,
    InvalidInput,
    UnreachableSupport,
    UnsupportedMethod,
)
from graphs.graph import Graph

logger = logging.getLogger(__name__)

METHODS = ("exact", "sinkhorn", "bounds")
MASS_TOL = 1e-12
# adjacent nodes' supports are at most three hops apart
SUPPORT_CUTOFF = 3


# -----------------------------
# Types
# -----------------------------

@dataclass(frozen=True, eq=False)
class Measure:
    support: tuple[int, ...]
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        support = tuple(int(s) for s in self.support)
        if mass.shape != (len(support),):
            raise DimensionMismatch("support and mass differ in length")
        if len(set(support)) != len(support):
            raise InvalidInput("support ids must be distinct")
        if np.any(mass < 0):
            raise InvalidInput("masses must be nonnegative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise InvalidInput(f"masses sum to {mass.sum()!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support, self.mass.tolist()))


@dataclass(frozen=True)
class OrcConfig:
    delta: float = 0.5
    method: str = "exact"
    sinkhorn_eps: float = 0.0  # 0 -> 0.01 * median support distance
    sinkhorn_max_iters: int = 1000
    sinkhorn_tol: float = 1e-9
    normalize: bool = True
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidInput(f"delta must lie in [0, 1], got {self.delta}")
        if self.method not in METHODS:
            raise UnsupportedMethod(f"unknown ORC method {self.method!r}; choose from {METHODS}")
        if self.sinkhorn_eps < 0:
            raise InvalidInput("sinkhorn_eps must be positive (or 0 for auto)")
        if self.sinkhorn_max_iters < 1 or self.sinkhorn_tol <= 0:
            raise InvalidInput("sinkhorn_max_iters >= 1 and sinkhorn_tol > 0 required")
        if self.workers < 1:
            raise InvalidInput("workers must be >= 1")

    @classmethod
    def from_config(cls, config, workers: Optional[int] = None) -> "OrcConfig":
        from django.conf import settings

        return cls(
            delta=config["orc.delta"],
            method=config["orc.method"],
            sinkhorn_eps=config["orc.sinkhorn_eps"],
            sinkhorn_max_iters=config["orc.sinkhorn_max_iters"],
            sinkhorn_tol=config["orc.sinkhorn_tol"],
            normalize=config["orc.normalize"],
            workers=workers if workers is not None else settings.CUSP_WORKERS,
        )


@dataclass(frozen=True)
class TransportResult:
    value: float
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class OrcResult:
    edge_orc: Mapping[tuple[int, int], float]
    node_orc: Mapping[int, float]
    method: str
    normalized: bool
    unconverged: tuple[tuple[int, int], ...] = field(default=())

    @classmethod
    def from_edge_values(cls, g: Graph, values, method: str = "given",
                         normalized: bool = False) -> "OrcResult":
        """Wrap per-edge values (graph edge order) and derive node means."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (g.m,):
            raise DimensionMismatch(f"need {g.m} edge values, got {values.shape}")
        if normalized:
            values = normalize(values)
        edge_map = {(int(u), int(v)): float(k) for u, v, k in zip(g.src, g.dst, values)}
        node_map = {x: node_orc(edge_map, g, x) for x in range(g.n)}
        return cls(MappingProxyType(edge_map), MappingProxyType(node_map), method, normalized)

    def edge_values(self, g: Graph) -> np.ndarray:
        """Edge curvatures in the graph's edge order."""
        return np.array([self.edge(u, v) for u, v in zip(g.src.tolist(), g.dst.tolist())])

    def node_values(self, n: int) -> np.ndarray:
        return np.array([self.node_orc[x] for x in range(n)])

    def edge(self, u: int, v: int) -> float:
        return self.edge_orc[(u, v) if u < v else (v, u)]


# -----------------------------
# Measures and transport
# -----------------------------

def node_measure(g: Graph, x: int, delta: float) -> Measure:
    """Lazy walk measure at x; zero-mass atoms are left out of the support."""
    if not 0.0 <= delta <= 1.0:
        raise InvalidInput(f"delta must lie in [0, 1], got {delta}")
    nbrs = g.neighbors(x)
    if not nbrs:
        raise DegreeZeroError(x)
    share = (1.0 - delta) / len(nbrs)
    support, mass = [], []
    if delta > 0:
        support.append(x)
        mass.append(delta)
    if share > 0:
        support.extend(nbrs)
        mass.extend([share] * len(nbrs))
    return Measure(tuple(support), np.array(mass))


def _check_cost(mu: Measure, nu: Measure, dist: np.ndarray) -> np.ndarray:
    M = np.asarray(dist, dtype=np.float64)
    if M.shape != (len(mu.support), len(nu.support)):
        raise DimensionMismatch(
            f"distance matrix shape {M.shape} does not cover supports "
            f"{len(mu.support)}x{len(nu.support)}"
        )
    if not np.all(np.isfinite(M)):
        i, j = np.argwhere(~np.isfinite(M))[0]
        raise UnreachableSupport(f"no distance between {mu.support[i]} and {nu.support[j]}")
    if np.any(M < 0):
        raise InvalidInput("distances must be nonnegative")
    return M


def wasserstein_exact(mu: Measure, nu: Measure, dist: np.ndarray) -> float:
    """W1 as a min-cost transportation problem (network simplex)."""
    M = _check_cost(mu, nu, dist)
    return float(ot.emd2(mu.mass, nu.mass, M))


def sinkhorn_eps(M: np.ndarray, cfg: OrcConfig) -> float:
    if cfg.sinkhorn_eps > 0:
        return cfg.sinkhorn_eps
    positive = M[M > 0]
    return 0.01 * float(np.median(positive)) if positive.size else 0.01


def wasserstein_sinkhorn(mu: Measure, nu: Measure, dist: np.ndarray, cfg: OrcConfig) -> TransportResult:
    """
    Entropic transport cost <P, M> of the log-domain Sinkhorn plan. A run that hits
    `sinkhorn_max_iters` still returns its value, flagged as not converged.
    """
    M = _check_cost(mu, nu, dist)
    reg = sinkhorn_eps(M, cfg)
    plan, log = ot.sinkhorn(
        mu.mass, nu.mass, M, reg,
        method="sinkhorn_log",
        numItermax=cfg.sinkhorn_max_iters,
        stopThr=cfg.sinkhorn_tol,
        log=True,
        warn=False,
    )
    errors = log.get("err", [])
    converged = bool(errors) and float(errors[-1]) < cfg.sinkhorn_tol
    return TransportResult(float(np.sum(plan * M)), converged, int(log.get("niter", 0)))


# -----------------------------
# Edge and node curvature
# -----------------------------

class HopDistances:
    """Cached truncated BFS hop counts over one graph."""

    def __init__(self, g: Graph, cutoff: int = SUPPORT_CUTOFF):
        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(g.n))
        self.graph.add_edges_from(zip(g.src.tolist(), g.dst.tolist()))
        self.cutoff = cutoff
        self._from = lru_cache(maxsize=None)(self._bfs)

    def _bfs(self, source: int) -> dict[int, int]:
        return nx.single_source_shortest_path_length(self.graph, source, cutoff=self.cutoff)

    def matrix(self, sources, targets) -> np.ndarray:
        M = np.empty((len(sources), len(targets)))
        for i, s in enumerate(sources):
            reach = self._from(s)
            for j, t in enumerate(targets):
                d = reach.get(t)
                if d is None:
                    raise UnreachableSupport(f"nodes {s} and {t} are not connected within {self.cutoff} hops")
                M[i, j] = d
        return M


def _edge_curvature(g: Graph, u: int, v: int, cfg: OrcConfig, hops: HopDistances) -> tuple[float, bool]:
    if cfg.method == "bounds":
        if cfg.delta != 0.0:
            logger.debug("bounds method ignores delta=%s and uses the plain walk", cfg.delta)
        return orc_bounds(g, u, v)[2], True
    mu = node_measure(g, u, cfg.delta)
    nu = node_measure(g, v, cfg.delta)
    dist = hops.matrix(mu.support, nu.support)
    if cfg.method == "exact":
        return 1.0 - wasserstein_exact(mu, nu, dist), True
    result = wasserstein_sinkhorn(mu, nu, dist, cfg)
    return 1.0 - result.value, result.converged


def edge_orc(g: Graph, u: int, v: int, cfg: OrcConfig, hops: Optional[HopDistances] = None) -> float:
    """Curvature of edge (u, v); adjacent endpoints are at hop distance 1."""
    if not g.has_edge(u, v):
        raise InvalidInput(f"({u}, {v}) is not an edge")
    # solve with the endpoints in canonical order so (u, v) and (v, u) agree bitwise
    a, b = (u, v) if u < v else (v, u)
    value, _ = _edge_curvature(g, a, b, cfg, hops or HopDistances(g))
    return value


def node_orc(edge_values: Mapping[tuple[int, int], float], g: Graph, x: int) -> float:
    """Arithmetic mean over the edges incident to x."""
    nbrs = g.neighbors(x)
    if not nbrs:
        raise DegreeZeroError(x)
    values = []
    for y in nbrs:
        key = (x, y) if x < y else (y, x)
        if key not in edge_values:
            raise InvalidInput(f"edge {key} missing from curvature map")
        values.append(edge_values[key])
    return float(np.mean(values))


def orc_bounds(g: Graph, u: int, v: int) -> tuple[float, float, float]:
    """
    Lower and upper bound of the plain-walk (delta = 0) curvature from degrees
    and the triangle count, plus their mean as the linear-time estimate.
    """
    if not g.is_unweighted:
        raise UnsupportedMethod("curvature bounds are defined for unweighted graphs only")
    if not g.has_edge(u, v):
        raise InvalidInput(f"({u}, {v}) is not an edge")
    du, dv = len(g.neighbors(u)), len(g.neighbors(v))
    triangles = len(set(g.neighbors(u)) & set(g.neighbors(v)))
    lo_deg, hi_deg = min(du, dv), max(du, dv)
    base = 1.0 - 1.0 / du - 1.0 / dv
    upper = triangles / hi_deg
    lower = (
        -max(0.0, base - triangles / lo_deg)
        - max(0.0, base - triangles / hi_deg)
        + triangles / hi_deg
    )
    return lower, upper, 0.5 * (lower + upper)


# -----------------------------
# Whole-graph computation
# -----------------------------

# shared with pool workers (set by the initializer)
_worker_graph: Optional[Graph] = None
_worker_cfg: Optional[OrcConfig] = None
_worker_hops: Optional[HopDistances] = None


def _init_worker(g: Graph, cfg: OrcConfig) -> None:
    global _worker_graph, _worker_cfg, _worker_hops
    _worker_graph, _worker_cfg, _worker_hops = g, cfg, HopDistances(g)


def _worker_edges(edge_ids: list[int]) -> list[tuple[float, bool]]:
    g = _worker_graph
    return [
        _edge_curvature(g, int(g.src[i]), int(g.dst[i]), _worker_cfg, _worker_hops)
        for i in edge_ids
    ]


def _chunks(m: int, workers: int) -> list[list[int]]:
    size, extra = divmod(m, workers * 4)
    size += 1 if extra else 0
    size = max(size, 1)
    return [list(range(start, min(start + size, m))) for start in range(0, m, size)]


def _check_components(g: Graph) -> None:
    isolated = np.flatnonzero(g.degree == 0)
    if isolated.size:
        raise DegreeZeroError(int(isolated[0]), f"node {int(isolated[0])} is isolated; every component needs >= 2 nodes")


def compute_all(g: Graph, cfg: OrcConfig) -> OrcResult:
    """
    Edge and node curvature for the whole graph. Edges are independent and are
    spread over `cfg.workers` processes; results are assembled in edge order.
    """
    _check_components(g)
    chunks = _chunks(g.m, cfg.workers)
    if cfg.workers > 1 and g.m > 1:
        with Pool(processes=cfg.workers, initializer=_init_worker, initargs=(g, cfg)) as pool:
            parts = pool.map(_worker_edges, chunks)
    else:
        _init_worker(g, cfg)
        parts = [_worker_edges(chunk) for chunk in chunks]
    flat = [item for part in parts for item in part]

    values = np.array([value for value, _ in flat], dtype=np.float64)
    if cfg.normalize:
        values = normalize(values)
    unconverged = tuple(
        (int(g.src[i]), int(g.dst[i])) for i, (_, ok) in enumerate(flat) if not ok
    )
    if unconverged:
        logger.warning("Sinkhorn did not converge on %d of %d edges", len(unconverged), g.m)
    logger.info(
        "ORC (%s, delta=%s) on %s: mean %.4f, median %.4f",
        cfg.method, cfg.delta, g, float(values.mean()) if values.size else 0.0,
        float(np.median(values)) if values.size else 0.0,
    )
    result = OrcResult.from_edge_values(g, values, cfg.method, cfg.normalize)
    return replace(result, unconverged=unconverged)


def normalize(values: np.ndarray) -> np.ndarray:
    """Clamp curvatures to [-1, 1]."""
    return np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)


def histogram(values: np.ndarray, bins: int = 40, value_range: Optional[tuple[float, float]] = None):
    """Counts over `bins` equal-width bins; [-1, 1] unless a range is given."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = value_range or (-1.0, 1.0)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return counts, edges


def summary(values: np.ndarray) -> dict[str, float]:
    values = np.asarray(values, dtype=np.float64)
    return {
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "negative_fraction": float(np.mean(values < 0)),
    }
