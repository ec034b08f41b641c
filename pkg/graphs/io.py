from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from core.exceptions import DimensionMismatch, GraphFormatError, InvalidInput

from .graph import Graph

logger = logging.getLogger(__name__)


def _parse_line(line: str, lineno: int) -> Optional[tuple[str, str, float]]:
    """
    Split one `u v [w]` line; comments and blank lines return None.
    """
    body = line.split("#", 1)[0].strip()
    if not body:
        return None
    parts = body.split()
    if len(parts) not in (2, 3):
        raise GraphFormatError(f"expected 'u v [weight]', got {body!r}", line=lineno)
    u, v = parts[0], parts[1]
    if u == v:
        raise GraphFormatError(f"self-loop at node {u}", line=lineno)
    w = 1.0
    if len(parts) == 3:
        try:
            w = float(parts[2])
        except ValueError:
            raise GraphFormatError(f"weight {parts[2]!r} is not a number", line=lineno) from None
        if w < 0:
            raise GraphFormatError(f"negative weight {w}", line=lineno)
        if w == 0 or not np.isfinite(w):
            raise GraphFormatError(f"weight must be finite and > 0, got {w}", line=lineno)
    return u, v, w


def load_edge_list(path: str | Path, n_hint: Optional[int] = None) -> Graph:
    """
    Read a whitespace-separated edge list.

    Without `n_hint` node ids are compacted to 0..n-1 in first-appearance order
    (original ids are kept in `Graph.node_ids`). With `n_hint` and integer ids,
    ids are used verbatim and n = max(n_hint, max id + 1).
    """
    path = Path(path)
    rows: list[tuple[str, str, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parsed = _parse_line(line, lineno)
            if parsed is not None:
                rows.append(parsed)
    if not rows:
        raise InvalidInput(f"{path}: no edges found")

    verbatim = n_hint is not None and all(u.isdigit() and v.isdigit() for u, v, _ in rows)
    if verbatim:
        n = max(int(n_hint), 1 + max(max(int(u), int(v)) for u, v, _ in rows))
        edges = [(int(u), int(v), w) for u, v, w in rows]
        node_ids = None
    else:
        index: dict[str, int] = {}
        for u, v, _ in rows:
            for token in (u, v):
                if token not in index:
                    index[token] = len(index)
        n = len(index)
        edges = [(index[u], index[v], w) for u, v, w in rows]
        node_ids = tuple(index)
    g = Graph.from_edges(n, edges, node_ids=node_ids)
    logger.info("Loaded %s from %s", g, path)
    return g


def save_edge_list(g: Graph, path: str | Path) -> Path:
    """Write `u v w` lines behind a `# nodes: n` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes: {g.n}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {w!r}\n")
    return path


def read_node_count(path: str | Path) -> Optional[int]:
    """The `# nodes: n` header written by save_edge_list, if present."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("# nodes:"):
        try:
            return int(first.split(":", 1)[1])
        except ValueError:
            return None
    return None


def load_features(path: str | Path, n: Optional[int] = None) -> np.ndarray:
    """Headerless CSV, row i = node i."""
    feats = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if n is not None and feats.shape[0] != n:
        raise DimensionMismatch(f"{path}: expected {n} feature rows, got {feats.shape[0]}")
    return feats


def load_labels(path: str | Path, n: Optional[int] = None) -> np.ndarray:
    """Headerless single-column CSV of integer class ids."""
    labels = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=1)
    if labels.ndim != 1:
        raise DimensionMismatch(f"{path}: labels must be a single column")
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        raise InvalidInput(f"{path}: labels must be nonnegative integers")
    if n is not None and labels.shape[0] != n:
        raise DimensionMismatch(f"{path}: expected {n} labels, got {labels.shape[0]}")
    return labels.astype(np.int64)


def save_features(features: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, features, delimiter=",", fmt="%.17g")
    return path


def save_labels(labels: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(labels, dtype=np.int64), delimiter=",", fmt="%d")
    return path


def load_graph(path: str | Path, features: Optional[str | Path] = None,
               labels: Optional[str | Path] = None) -> Graph:
    """Edge list plus optional feature/label CSVs, as the commands take them."""
    g = load_edge_list(path, n_hint=read_node_count(path))
    if features:
        g = g.with_features(load_features(features, g.n))
    if labels:
        g = g.with_labels(load_labels(labels, g.n))
    return g
