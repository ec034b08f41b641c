from __future__ import annotations

from pathlib import Path

import numpy as np
from django.core.management.base import CommandError

from core.commands import CuspCommand, write_csv
from core.exceptions import InvalidInput
from graphs.functions import normalized_laplacian, spectral_energy, spectrum
from graphs.graph import Graph
from graphs.io import load_features, load_graph


def resolve_signal(g: Graph, source: str, eigenvectors: np.ndarray) -> np.ndarray:
    """
    Signal sources:
      labels[:c]     indicator of class c (default 0)
      eigenvector:k  the k-th eigenvector of the operator
      feature:j      column j of the node features
      <path>         headerless single-column CSV
    """
    kind, _, arg = source.partition(":")
    if kind == "labels":
        if g.labels is None:
            raise InvalidInput("signal 'labels' needs --labels")
        return (g.labels == int(arg or 0)).astype(np.float64)
    if kind == "eigenvector":
        k = int(arg or 0)
        if not 0 <= k < g.n:
            raise InvalidInput(f"eigenvector index {k} outside 0..{g.n - 1}")
        return eigenvectors[:, k].copy()
    if kind == "feature":
        if g.features is None:
            raise InvalidInput("signal 'feature' needs --features")
        return g.features[:, int(arg or 0)].copy()
    if Path(source).is_file():
        return load_features(source, g.n)[:, 0]
    raise InvalidInput(f"unknown signal source {source!r}")


def _cusp_laplacian(g: Graph, config):
    from curvature.laplacian import build
    from curvature.orc import OrcConfig, compute_all

    orc = compute_all(g, OrcConfig.from_config(config))
    return build(g, orc).L_tilde_n


class Command(CuspCommand):
    help = "Spectral energy of a node signal over the eigenvalues of the graph Laplacian (CSV: index,eigenvalue,energy)."

    def add_arguments(self, parser):
        parser.add_argument("graph", type=str, help="Edge list file.")
        parser.add_argument("--signal", type=str, default="labels", help="labels[:c] | eigenvector:k | feature:j | CSV path.")
        parser.add_argument("--labels", type=str, default=None)
        parser.add_argument("--features", type=str, default=None)
        parser.add_argument("--operator", choices=["laplacian", "cusp"], default="laplacian",
                            help="Normalized Laplacian of the graph or the curvature-weighted one.")
        parser.add_argument("--out", type=str, required=True, help="Output CSV path.")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        path = self.require_file(opts["graph"], "graph")
        config = self.load_config(opts)
        g = load_graph(path, features=opts.get("features"), labels=opts.get("labels"))

        L = normalized_laplacian(g) if opts["operator"] == "laplacian" else _cusp_laplacian(g, config)
        spec = spectrum(L)
        f = resolve_signal(g, opts["signal"], spec.eigenvectors)
        if not np.any(f):
            raise CommandError("signal is identically zero", returncode=2)
        energy = spectral_energy(spec, f)

        write_csv(opts["out"], ["index", "eigenvalue", "energy"],
                  ((i, lam, e) for i, (lam, e) in enumerate(zip(spec.eigenvalues, energy))))

        quartile = slice(0, max(1, len(spec) // 4))
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {len(spec)} rows to {opts['out']}; energy in lowest quartile {energy[quartile].sum():.4f}"
        ))
