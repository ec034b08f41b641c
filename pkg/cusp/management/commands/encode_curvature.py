from __future__ import annotations

from core.commands import CuspCommand, write_csv
from curvature.orc import OrcConfig, compute_all, normalize
from graphs.io import load_graph
from cusp.encoding import CurvatureEncoder, phi_euclidean

DUMP_WIDTH = 8


class Command(CuspCommand):
    help = "Debug dump of the curvature encoding: node, orc and the first 8 Euclidean feature values."

    def add_arguments(self, parser):
        parser.add_argument("graph", type=str, help="Edge list file.")
        parser.add_argument("--out", type=str, required=True, help="Output CSV path.")
        parser.add_argument("--seed", type=int, default=None, help="Frequency seed (default: train.seed).")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        path = self.require_file(opts["graph"], "graph")
        config = self.load_config(opts)
        g = load_graph(path)
        orc = compute_all(g, OrcConfig.from_config(config))
        node_orc = normalize(orc.node_values(g.n))

        seed = opts["seed"] if opts.get("seed") is not None else config["train.seed"]
        d_c = config["model.d_c"] or DUMP_WIDTH
        enc = CurvatureEncoder.gaussian(d_c, config["model.sigma"], seed)
        phi = phi_euclidean(enc, node_orc)[:, :DUMP_WIDTH]

        header = ["node", "orc"] + [f"phi_{i}" for i in range(phi.shape[1])]
        write_csv(opts["out"], header, ([x, node_orc[x], *phi[x]] for x in range(g.n)))
        self.stdout.write(self.style.SUCCESS(f"Wrote encoding of {g.n} nodes (d_C={d_c}) to {opts['out']}"))
