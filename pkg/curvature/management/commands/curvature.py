from __future__ import annotations

from pathlib import Path

import numpy as np

from core.commands import CuspCommand, write_csv
from curvature.orc import OrcConfig, compute_all, histogram, summary
from graphs.io import load_graph

# edge and node curvature of a graph
#
#   CUSP_WORKERS=4 python manage.py curvature data/sbm/edges.txt --out out/sbm --config cusp.cfg


class Command(CuspCommand):
    help = "Ollivier-Ricci curvature per edge and node, plus a histogram (edges.csv, nodes.csv, histogram.csv)."

    def add_arguments(self, parser):
        parser.add_argument("graph", type=str, help="Edge list file.")
        parser.add_argument("--out", type=str, required=True, help="Output folder.")
        parser.add_argument("--workers", type=int, default=None, help="Worker processes (default: CUSP_WORKERS).")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        path = self.require_file(opts["graph"], "graph")
        config = self.load_config(opts)
        g = load_graph(path)
        cfg = OrcConfig.from_config(config, workers=opts.get("workers"))
        result = compute_all(g, cfg)

        out = Path(opts["out"])
        edge_values = result.edge_values(g)
        node_values = result.node_values(g.n)
        write_csv(out / "edges.csv", ["u", "v", "orc"],
                  ((u, v, k) for (u, v, _), k in zip(g.edges, edge_values)))
        write_csv(out / "nodes.csv", ["node", "orc"], enumerate(node_values))

        bins = config["orc.histogram_bins"]
        value_range = (-1.0, 1.0)
        if not result.normalized:
            lo = min(-1.0, float(np.min(edge_values)))
            hi = max(1.0, float(np.max(edge_values)))
            value_range = (lo, hi)
        edge_counts, bin_edges = histogram(edge_values, bins, value_range)
        node_counts, _ = histogram(node_values, bins, value_range)
        write_csv(out / "histogram.csv", ["bin_left", "bin_right", "edge_count", "node_count"],
                  zip(bin_edges[:-1], bin_edges[1:], edge_counts, node_counts))

        stats = summary(edge_values)
        if result.unconverged:
            self.stdout.write(self.style.WARNING(
                f"Sinkhorn did not converge on {len(result.unconverged)} edges"
            ))
        self.stdout.write(self.style.SUCCESS(
            f"Wrote curvature of {g.m} edges to {out} "
            f"(mean {stats['mean']:.4f}, median {stats['median']:.4f}, "
            f"negative {stats['negative_fraction']:.2%})"
        ))
