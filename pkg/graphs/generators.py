from __future__ import annotations

import logging
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from core.exceptions import InvalidInput

from .graph import Graph

logger = logging.getLogger(__name__)

MAX_RESEEDS = 100


def _from_networkx(G: nx.Graph, labels: Optional[np.ndarray] = None,
                   features: Optional[np.ndarray] = None) -> Graph:
    return Graph.from_edges(G.number_of_nodes(), G.edges(), features=features, labels=labels)


def _require_nodes(n: int) -> None:
    # one node would be isolated
    if n < 2:
        raise InvalidInput(f"generator needs at least 2 nodes, got {n}")


def _require_probability(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidInput(f"{name} must lie in [0, 1], got {p}")


def _has_isolated(G: nx.Graph) -> bool:
    return any(d == 0 for _, d in G.degree())


def path(n: int) -> Graph:
    _require_nodes(n)
    return _from_networkx(nx.path_graph(n))


def cycle(n: int) -> Graph:
    if n < 3:
        raise InvalidInput("cycle needs at least 3 nodes")
    return _from_networkx(nx.cycle_graph(n))


def star(n: int) -> Graph:
    """Hub 0 joined to n-1 leaves."""
    if n < 2:
        raise InvalidInput("star needs at least 2 nodes")
    return _from_networkx(nx.star_graph(n - 1))


def complete(n: int) -> Graph:
    _require_nodes(n)
    return _from_networkx(nx.complete_graph(n))


def tree(branching: int = 2, depth: int = 3) -> Graph:
    """Balanced tree; branching=2 gives the binary tree."""
    if branching < 1 or depth < 1:
        raise InvalidInput("tree needs branching >= 1 and depth >= 1")
    return _from_networkx(nx.balanced_tree(branching, depth))


def random_connected(n: int, p: float, seed: int = 0) -> Graph:
    """G(n, p) redrawn with the next seed until connected."""
    _require_nodes(n)
    _require_probability("p", p)
    for attempt in range(MAX_RESEEDS):
        G = nx.gnp_random_graph(n, p, seed=seed + attempt)
        if nx.is_connected(G):
            return _from_networkx(G)
    raise InvalidInput(f"no connected G({n}, {p}) within {MAX_RESEEDS} draws")


def sbm(
    blocks: Sequence[int],
    p_in: float,
    p_out: float,
    seed: int = 0,
    feature_noise: Optional[float] = None,
) -> Graph:
    """
    Stochastic block model labeled by block id. Draws with isolated nodes are
    rejected and redrawn with the next seed. With `feature_noise`, nodes get
    one-hot block features plus Gaussian noise of that scale.
    """
    blocks = [int(b) for b in blocks]
    if not blocks or any(b < 1 for b in blocks):
        raise InvalidInput("sbm needs positive block sizes")
    _require_probability("p_in", p_in)
    _require_probability("p_out", p_out)
    k = len(blocks)
    probs = [[p_in if i == j else p_out for j in range(k)] for i in range(k)]
    labels = np.repeat(np.arange(k), blocks)
    for attempt in range(MAX_RESEEDS):
        G = nx.stochastic_block_model(blocks, probs, seed=seed + attempt)
        if _has_isolated(G):
            continue
        if attempt:
            logger.info("sbm: reseeded %d times to avoid isolated nodes", attempt)
        features = None
        if feature_noise is not None:
            rng = np.random.default_rng(seed + attempt)
            features = np.eye(k)[labels] + feature_noise * rng.standard_normal((labels.size, k))
        return _from_networkx(nx.Graph(G), labels=labels, features=features)
    raise InvalidInput(f"sbm produced isolated nodes in {MAX_RESEEDS} draws")


GENERATORS = {
    "path": path,
    "cycle": cycle,
    "star": star,
    "complete": complete,
    "tree": tree,
    "sbm": sbm,
    "random": random_connected,
}


def generate(kind: str, **params) -> Graph:
    try:
        builder = GENERATORS[kind]
    except KeyError:
        raise InvalidInput(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}") from None
    try:
        return builder(**params)
    except TypeError as e:
        raise InvalidInput(f"{kind}: {e}") from None


def parse_generator_spec(text: str) -> tuple[str, dict]:
    """
    `sbm:blocks=100/100,p_in=0.1,p_out=0.01,seed=7` -> ("sbm", {...}).
    Slash-separated values become integer lists.
    """
    kind, _, rest = text.partition(":")
    params: dict = {}
    for item in filter(None, rest.split(",")):
        key, sep, raw = item.partition("=")
        if not sep:
            raise InvalidInput(f"generator parameter {item!r} needs key=value")
        key = key.strip()
        raw = raw.strip()
        if "/" in raw:
            params[key] = [int(x) for x in raw.split("/")]
        elif raw.lstrip("-").isdigit():
            params[key] = int(raw)
        else:
            try:
                params[key] = float(raw)
            except ValueError:
                raise InvalidInput(f"generator parameter {key}={raw!r} is not numeric") from None
    return kind.strip(), params
