from __future__ import annotations

import numpy as np

from core.commands import CuspCommand, write_csv
from core.exceptions import SpectrumCheckFailed
from curvature.laplacian import build, verify_spectrum
from curvature.orc import OrcConfig, compute_all
from graphs.io import load_graph


class Command(CuspCommand):
    help = "Eigenvalues of the curvature-weighted normalized Laplacian and a PASS/FAIL check of its spectral bounds."

    def add_arguments(self, parser):
        parser.add_argument("graph", type=str, help="Edge list file.")
        parser.add_argument("--out", type=str, required=True, help="Eigenvalue CSV path.")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        path = self.require_file(opts["graph"], "graph")
        config = self.load_config(opts)
        g = load_graph(path)
        orc = compute_all(g, OrcConfig.from_config(config))
        cl = build(g, orc)

        L_n = cl.L_tilde_n.toarray()
        eigs = np.linalg.eigvalsh(0.5 * (L_n + L_n.T))
        write_csv(opts["out"], ["index", "eigenvalue"], enumerate(eigs))

        report = verify_spectrum(cl)
        if not report.passed:
            raise SpectrumCheckFailed(report.as_line())
        self.stdout.write(self.style.SUCCESS(report.as_line()))
