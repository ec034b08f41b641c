from __future__ import annotations

from pathlib import Path

from core.commands import CuspCommand
from graphs.io import load_graph
from cusp.models import ExperimentRun
from cusp.outputs import run_and_write

# train on a labeled graph
#
#   python manage.py train data/sbm/edges.txt --features data/sbm/features.csv \
#       --labels data/sbm/labels.csv --config cusp.cfg --out out/sbm
#
# --enqueue stores the run and lets `python manage.py rqworker default` pick it up


class Command(CuspCommand):
    help = "Train the curvature-aware model; writes history.csv, report.txt and params.npz."

    def add_arguments(self, parser):
        parser.add_argument("graph", type=str, help="Edge list file.")
        parser.add_argument("--features", type=str, default=None, help="Headerless node feature CSV.")
        parser.add_argument("--labels", type=str, default=None, help="Headerless node label CSV (node classification).")
        parser.add_argument("--out", type=str, required=True, help="Output folder.")
        parser.add_argument("--enqueue", action="store_true", help="Queue the run for an rq worker instead of training now.")
        self.add_config_argument(parser)

    def handle(self, *args, **opts):
        path = self.require_file(opts["graph"], "graph")
        for label in ("features", "labels"):
            if opts.get(label):
                self.require_file(opts[label], label)
        config = self.load_config(opts)

        if opts["enqueue"]:
            run = ExperimentRun.objects.create(
                graph_path=str(path),
                features_path=opts.get("features") or "",
                labels_path=opts.get("labels") or "",
                config_text=Path(opts["config"]).read_text(encoding="utf-8") if opts.get("config") else "",
                output_dir=opts["out"],
            )
            self.stdout.write(self.style.SUCCESS(f"Queued run {run.pk} (job run-{run.pk}-train)"))
            return

        g = load_graph(path, features=opts.get("features"), labels=opts.get("labels"))
        results, summary = run_and_write(g, config, opts["out"])
        first = results[0]
        if len(results) == 1:
            line = (f"best epoch {first.best_epoch}: val {first.metric} {first.val_metric:.4f}, "
                    f"test {first.metric} {first.test_metric:.4f}")
        else:
            line = summary.as_line(first.metric)
        self.stdout.write(self.style.SUCCESS(f"{line}; outputs in {opts['out']}"))
