# cusp/tasks.py
from __future__ import annotations

import logging
from typing import List

from django.db import transaction
from django.utils import timezone

from core.config import Config
from core.exceptions import CuspError
from graphs.io import load_graph

from .models import ExperimentRun
from .outputs import run_and_write

logger = logging.getLogger(__name__)


# -----------------------------
# Helpers
# -----------------------------

def _safe_config(text: str, errors: List[str]):
    """Parse the stored config text; collect a readable error instead of raising."""
    try:
        return Config.from_text(text or "")
    except CuspError as e:
        errors.append(f"[config] {e.detail}")
    return None


def _safe_load(run: ExperimentRun, errors: List[str]):
    try:
        return load_graph(run.graph_path, features=run.features_path or None,
                          labels=run.labels_path or None)
    except CuspError as e:
        errors.append(f"[graph] {type(e).__name__}: {e.detail}")
    except OSError as e:
        errors.append(f"[graph] cannot read {e.filename or run.graph_path}: {e.strerror or e}")
    return None


# -----------------------------
# Main task entry
# -----------------------------

def process_run(run_id: int) -> None:
    """
    Queue task:
      1 mark run as 'processing'
      2 load config and graph
      3 train (all repeats) and write history, report and checkpoint
      4 mark 'ready' with the mean test metric, else 'failed'; persist error summary
    """
    run = ExperimentRun.objects.get(pk=run_id)
    ExperimentRun.objects.filter(pk=run.pk).update(status="processing", error="")

    errors: List[str] = []
    metric_name, metric = "", None

    config = _safe_config(run.config_text, errors)
    g = _safe_load(run, errors) if config is not None else None
    if config is not None and g is not None:
        try:
            results, summary = run_and_write(g, config, run.output_dir)
            metric_name, metric = results[0].metric, summary.mean
        except CuspError as e:
            errors.append(f"[train] {type(e).__name__}: {e.detail}")
        except Exception as e:
            logger.exception("Run %s crashed", run.pk)
            errors.append(f"[train] unexpected: {e!r}")

    with transaction.atomic():
        run.status = "ready" if metric is not None and not errors else "failed"
        run.error = "" if not errors else "\n".join(errors)[:8000]
        run.metric_name = metric_name
        run.metric = metric
        run.finished_at = timezone.now()
        run.save()
