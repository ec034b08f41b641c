from __future__ import annotations

import csv
from pathlib import Path

from core.commands import CuspCommand
from core.exceptions import GraphFormatError
from curvature.orc import OrcConfig, compute_all
from graphs.io import load_graph
from manifolds.product import Signature
from manifolds.signature import estimate_signature, histogram_from_values

# estimate a product signature
#
#   python manage.py signature data/sbm/edges.txt --config cusp.cfg
#   python manage.py signature out/hist.csv          (columns: curvature,frequency)


def read_histogram(path: Path) -> list[tuple[float, float]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise GraphFormatError("expected 'curvature,frequency'", line=lineno) from None
    return rows


def is_histogram(path: Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return line.replace(" ", "").lower().startswith("curvature,frequency")
    return False


class Command(CuspCommand):
    help = "Estimate a product-manifold signature from a graph's curvature or from a curvature histogram CSV."

    def add_arguments(self, parser):
        parser.add_argument("source", type=str, help="Edge list, or CSV with header curvature,frequency.")
        parser.add_argument("--seed", type=int, default=None, help="k-means seed (default: train.seed).")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        path = self.require_file(opts["source"], "source")
        config = self.load_config(opts)

        spec = config["signature.spec"].strip()
        if spec:
            self.stdout.write(self.style.SUCCESS(str(Signature.parse(spec))))
            return

        if is_histogram(path):
            hist = read_histogram(path)
        else:
            g = load_graph(path)
            orc = compute_all(g, OrcConfig.from_config(config))
            hist = histogram_from_values(orc.edge_values(g))

        seed = opts["seed"] if opts.get("seed") is not None else config["train.seed"]
        signature = estimate_signature(
            hist,
            eps=config["signature.eps"],
            h_max=config["signature.h_max"],
            s_max=config["signature.s_max"],
            d_m=config["model.d_m"],
            preferred_dims=config["signature.preferred_dims"],
            restarts=config["signature.restarts"],
            seed=seed,
        )
        self.stdout.write(self.style.SUCCESS(str(signature)))
