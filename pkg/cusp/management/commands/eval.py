from __future__ import annotations

from core.commands import CuspCommand
from graphs.io import load_graph
from cusp.training import evaluate_checkpoint, load_checkpoint, metric_name


class Command(CuspCommand):
    help = "Evaluate a saved params.npz on the split it was trained with."

    def add_arguments(self, parser):
        parser.add_argument("graph", type=str, help="Edge list file the checkpoint was trained on.")
        parser.add_argument("--params", type=str, required=True, help="params.npz written by train.")
        parser.add_argument("--features", type=str, default=None)
        parser.add_argument("--labels", type=str, default=None)

    def handle(self, *args, **opts):
        path = self.require_file(opts["graph"], "graph")
        ckpt = load_checkpoint(self.require_file(opts["params"], "params"))
        g = load_graph(path, features=opts.get("features"), labels=opts.get("labels"))
        metrics = evaluate_checkpoint(g, ckpt)
        name = metric_name(ckpt.task)
        self.stdout.write(self.style.SUCCESS(
            f"val_{name} = {metrics['val']!r}\ntest_{name} = {metrics['test']!r}"
        ))
