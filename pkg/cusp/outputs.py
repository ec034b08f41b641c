from __future__ import annotations

from pathlib import Path

from core.commands import write_csv
from core.config import Config
from graphs.graph import Graph

from .training import RepeatSummary, TrainResult, save_checkpoint, train_repeats

HISTORY_HEADER = ["epoch", "train_loss", "val_metric"]


def write_report(rows, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{k} = {v}\n" for k, v in rows), encoding="utf-8")
    return out


def write_result(result: TrainResult, out_dir: str | Path) -> Path:
    """history.csv, report.txt and params.npz for one run."""
    out = Path(out_dir)
    write_csv(out / "history.csv", HISTORY_HEADER, result.history)
    write_report(result.report(), out / "report.txt")
    save_checkpoint(result, out / "params.npz")
    return out


def run_and_write(g: Graph, config: Config, out_dir: str | Path) -> tuple[list[TrainResult], RepeatSummary]:
    """
    Train `train.repeats` times. A single run writes straight into `out_dir`,
    repeats go to `run_<i>/` with a summary.txt next to them.
    """
    out = Path(out_dir)
    results, summary = train_repeats(g, config)
    if len(results) == 1:
        write_result(results[0], out)
    else:
        for i, result in enumerate(results):
            write_result(result, out / f"run_{i}")
        write_report(
            [("metric", results[0].metric),
             ("runs", str(len(results))),
             ("test_metrics", ",".join(repr(m) for m in summary.metrics)),
             ("mean", repr(summary.mean)),
             ("half_width_95", repr(summary.half_width))],
            out / "summary.txt",
        )
    return results, summary
