from __future__ import annotations

from pathlib import Path

from core.commands import CuspCommand
from graphs.functions import homophily_ratio
from graphs.generators import generate, parse_generator_spec
from graphs.io import save_edge_list, save_features, save_labels

# to write a labeled test graph
#
#   python manage.py generate_graph "sbm:blocks=100/100,p_in=0.1,p_out=0.01,seed=7,feature_noise=0.5" \
#       --out data/sbm


class Command(CuspCommand):
    help = "Generate a synthetic graph (path, cycle, star, complete, tree, sbm, random) and write it to disk."

    def add_arguments(self, parser):
        parser.add_argument("spec", type=str, help="kind:key=value,... e.g. 'complete:n=4' or 'sbm:blocks=100/100,p_in=0.1,p_out=0.01'.")
        parser.add_argument("--out", type=str, required=True, help="Output folder (edges.txt, features.csv, labels.csv).")

    def handle(self, *args, **opts):
        kind, params = parse_generator_spec(opts["spec"])
        g = generate(kind, **params)
        out = Path(opts["out"])
        save_edge_list(g, out / "edges.txt")
        if g.features is not None:
            save_features(g.features, out / "features.csv")
        if g.labels is not None:
            save_labels(g.labels, out / "labels.csv")

        summary = f"Wrote {g} to {out}"
        if g.labels is not None and g.m:
            summary += f" (homophily {homophily_ratio(g):.3f})"
        self.stdout.write(self.style.SUCCESS(summary))
