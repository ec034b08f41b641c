from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from .config import Config
from .exceptions import CuspError


class CuspCommand(BaseCommand):
    """
    Base for the pipeline commands: pipeline errors turn into a one-line
    CommandError carrying the exit code (2 bad input, 3 numerical failure).
    """

    def add_config_argument(self, parser):
        parser.add_argument("--config", type=str, default=None, help="Flat key = value config file.")

    def load_config(self, opts) -> Config:
        path = opts.get("config")
        if path and not Path(path).exists():
            raise CommandError(f"config file not found: {path}", returncode=2)
        return Config.from_file(path)

    def require_file(self, path: str | None, label: str) -> Path:
        if not path:
            raise CommandError(f"{label} is required", returncode=2)
        p = Path(path)
        if not p.is_file():
            raise CommandError(f"{label} not found: {p}", returncode=2)
        return p

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except CuspError as e:
            raise CommandError(f"{type(e).__name__}: {e.detail}", returncode=e.exit_code) from e
        except OSError as e:
            target = e.filename or ""
            raise CommandError(f"I/O error {target}: {e.strerror or e}", returncode=2) from e


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with a fixed header row; parent folders are created."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return out


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value
