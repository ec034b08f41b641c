from __future__ import annotations

import numpy as np

from core.commands import CuspCommand, write_csv
from filters.gpr import bank_responses, gpr_weights

GRID_POINTS = 201

# frequency response of the filter bank over lambda in [-1, 1]
#
#   python manage.py filter_response --out out/response.csv --config cusp.cfg
#   python manage.py filter_response --out out/learned.csv --params out/sbm/params.npz


class Command(CuspCommand):
    help = "Filter bank responses g_l(lambda) on a 201-point grid (CSV: lambda,g_filter_0..g_filter_L)."

    def add_arguments(self, parser):
        parser.add_argument("--out", type=str, required=True, help="Output CSV path.")
        parser.add_argument("--params", type=str, default=None, help="Use the learned weights of a params.npz.")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        if opts.get("params"):
            from cusp.training import load_checkpoint

            ckpt = load_checkpoint(self.require_file(opts["params"], "params"))
            names = sorted((n for n in ckpt.params if n.startswith("gamma.")), key=lambda n: int(n.split(".")[1]))
            weights = [ckpt.params[n] for n in names]
            source = opts["params"]
        else:
            config = self.load_config(opts)
            L = config["model.L"]
            init = gpr_weights(config["model.gpr_init"], config["model.alpha"], L)
            weights = [init.gamma] * (L + 1)
            source = f"{init.init_kind}(alpha={init.alpha}) init"

        grid = np.linspace(-1.0, 1.0, GRID_POINTS)
        responses = bank_responses(weights, grid)
        header = ["lambda"] + [f"g_filter_{l}" for l in range(len(responses))]
        write_csv(opts["out"], header, ([lam, *(r[i] for r in responses)] for i, lam in enumerate(grid)))
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {GRID_POINTS} rows for {len(responses)} filters from {source} to {opts['out']}"
        ))
