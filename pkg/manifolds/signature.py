from __future__ import annotations

import logging
import warnings
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from core.exceptions import ConfigError, DimensionMismatch, InvalidInput

from .product import Component, Signature, split_dims

logger = logging.getLogger(__name__)

ELBOW_DROP = 0.10


def parse_preferred_dims(text: str) -> list[tuple[str, int]]:
    """`H:16,S:16` -> [("H", 16), ("S", 16)]; entries are matched to components of the same kind in order."""
    out = []
    for part in (p.strip() for p in (text or "").split(",")):
        if not part:
            continue
        kind, _, dim = part.partition(":")
        kind = kind.strip().upper()
        try:
            out.append((kind, int(dim)))
        except ValueError:
            raise ConfigError(f"bad preferred dimension {part!r}, expected kind:dim") from None
    return out


def _weighted_points(hist: Iterable[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    rows = [(float(c), float(f)) for c, f in hist]
    if not rows:
        raise InvalidInput("curvature histogram is empty")
    curv = np.array([c for c, _ in rows])
    freq = np.array([f for _, f in rows])
    if np.any(~np.isfinite(curv)) or np.any(~np.isfinite(freq)):
        raise InvalidInput("curvature histogram has non-finite entries")
    if np.any(freq < 0):
        raise InvalidInput("histogram frequencies must be nonnegative")
    if freq.sum() <= 0:
        raise InvalidInput("histogram frequencies are all zero")
    keep = freq > 0
    points, inverse = np.unique(curv[keep], return_inverse=True)
    weights = np.bincount(inverse, weights=freq[keep])
    return points, weights / weights.sum()


def _fit(points: np.ndarray, weights: np.ndarray, k: int, restarts: int, seed: int) -> KMeans:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        model = KMeans(n_clusters=k, n_init=restarts, random_state=seed)
        model.fit(points.reshape(-1, 1), sample_weight=weights)
    return model


def choose_clusters(points: np.ndarray, weights: np.ndarray, k_max: int,
                    restarts: int = 50, seed: int = 0) -> KMeans:
    """
    Elbow rule: the smallest K for which going to K + 1 clusters explains less
    than 10% of the total (K = 1) inertia, or whose inertia is already zero.
    """
    k_max = max(1, min(k_max, points.size))
    previous = _fit(points, weights, 1, restarts, seed)
    total = previous.inertia_
    for k in range(1, k_max):
        if previous.inertia_ <= 1e-15 * max(total, 1.0):
            return previous
        candidate = _fit(points, weights, k + 1, restarts, seed)
        drop = (previous.inertia_ - candidate.inertia_) / total
        if drop < ELBOW_DROP:
            return previous
        previous = candidate
    return previous


def estimate_signature(
    hist: Iterable[tuple[float, float]],
    eps: float = 0.05,
    h_max: int = 2,
    s_max: int = 2,
    d_m: int = 48,
    preferred_dims: Optional[str | Sequence[tuple[str, int]]] = None,
    restarts: int = 50,
    seed: int = 0,
) -> Signature:
    """
    Product signature from a curvature histogram: weighted k-means over the
    curvature values, centroids below -eps become H components, above eps S
    components, the rest is merged into one E component.
    """
    if eps <= 0:
        raise ConfigError(f"signature.eps must be > 0, got {eps}")
    if h_max < 0 or s_max < 0:
        raise ConfigError("signature.h_max and signature.s_max must be >= 0")
    points, weights = _weighted_points(hist)

    model = choose_clusters(points, weights, h_max + s_max + 1, restarts, seed)
    labels = model.labels_
    centroids = model.cluster_centers_.ravel()
    cluster_weight = np.bincount(labels, weights=weights, minlength=centroids.size)

    hyperbolic, spherical, flat = [], [], 0.0
    for c in sorted(range(centroids.size), key=lambda i: (-cluster_weight[i], i)):
        kappa, mass = float(centroids[c]), float(cluster_weight[c])
        if mass <= 0:
            continue
        if kappa < -eps and len(hyperbolic) < h_max:
            hyperbolic.append((kappa, mass))
        elif kappa > eps and len(spherical) < s_max:
            spherical.append((kappa, mass))
        else:
            if abs(kappa) > eps:
                kind, cap = ("H", h_max) if kappa < 0 else ("S", s_max)
                logger.warning("Curvature cluster %.4f (weight %.4f) exceeds %s_max=%d and is folded into E",
                               kappa, mass, kind.lower(), cap)
            flat += mass
    logger.debug("Clusters %s with weights %s", np.round(centroids, 4), np.round(cluster_weight, 4))

    parts = [("H", k, m) for k, m in sorted(hyperbolic)]
    parts += [("S", k, m) for k, m in sorted(spherical)]
    if flat > 0:
        parts.append(("E", 0.0, flat))

    if isinstance(preferred_dims, str):
        preferred_dims = parse_preferred_dims(preferred_dims)
    if preferred_dims:
        dims = _match_preferred(parts, preferred_dims)
        if sum(dims) != d_m:
            logger.warning("Preferred dims %s sum to %d and override d_M=%d", dims, sum(dims), d_m)
    else:
        if d_m < len(parts):
            raise DimensionMismatch(f"d_M={d_m} is smaller than the {len(parts)} estimated components")
        dims = split_dims([m for _, _, m in parts], d_m)

    comps = tuple(
        Component(kind, dim, 0.0 if kind == "E" else round(kappa, 4))
        for (kind, kappa, _), dim in zip(parts, dims)
    )
    signature = Signature(comps)
    logger.info("Estimated signature %s", signature)
    return signature


def _match_preferred(parts, preferred: Sequence[tuple[str, int]]) -> list[int]:
    queues: dict[str, list[int]] = {}
    for kind, dim in preferred:
        if dim < 1:
            raise ConfigError(f"preferred dimension must be positive, got {kind}:{dim}")
        queues.setdefault(kind, []).append(dim)
    dims = []
    for kind, _, _ in parts:
        if not queues.get(kind):
            raise ConfigError(f"no preferred dimension left for a {kind} component")
        dims.append(queues[kind].pop(0))
    leftover = [k for k, q in queues.items() if q]
    if leftover:
        raise ConfigError(f"preferred dimensions for {', '.join(leftover)} match no estimated component")
    return dims


def histogram_from_values(values: np.ndarray) -> list[tuple[float, float]]:
    """Exact histogram: every distinct curvature with its count."""
    uniq, counts = np.unique(np.asarray(values, dtype=np.float64), return_counts=True)
    return [(float(c), float(f)) for c, f in zip(uniq, counts)]


def signature_from_config(config, edge_orc: Optional[np.ndarray] = None, seed: int = 0) -> Signature:
    """`signature.spec` when set, otherwise estimated from the edge curvatures."""
    spec = config["signature.spec"].strip()
    if spec:
        return Signature.parse(spec)
    if edge_orc is None:
        raise ConfigError("signature.spec is empty and no curvature is available to estimate it")
    return estimate_signature(
        histogram_from_values(edge_orc),
        eps=config["signature.eps"],
        h_max=config["signature.h_max"],
        s_max=config["signature.s_max"],
        d_m=config["model.d_m"],
        preferred_dims=config["signature.preferred_dims"],
        restarts=config["signature.restarts"],
        seed=seed,
    )
