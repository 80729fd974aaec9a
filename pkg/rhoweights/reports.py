"""Report writers: ``report.json`` with provenance and CSV tables at 17 significant digits."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from collections.abc import Iterable, Mapping, Sequence
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .grid import Ball, Domain

logger = logging.getLogger(__name__)

PINNED_PATH = os.path.join(os.path.dirname(__file__), "pinned.json")


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def to_jsonable(obj):
    """Plain JSON structure for reports built from dataclasses, numpy values and balls."""
    if isinstance(obj, Ball):
        return {"center": list(obj.center), "radius": obj.radius}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, tuple) and hasattr(obj, "_fields"):
        return {k: to_jsonable(v) for k, v in obj._asdict().items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def provenance(config_sha256: str, seeds: Mapping[str, int]) -> dict:
    from . import __version__

    return {
        "config_sha256": config_sha256,
        "version": __version__,
        "seeds": dict(seeds),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_json_report(directory: str | Path, summary: Mapping, config: Mapping, prov: Mapping) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "report.json"
    payload = {"summary": to_jsonable(summary), "config": to_jsonable(config), "provenance": dict(prov)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info("wrote %s", path)
    return path


def write_rows_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info("wrote %s", path)
    return path


def write_grid_csv(path: str | Path, domain: Domain, columns: Mapping[str, np.ndarray]) -> Path:
    """One row per cell in row-major order: center coordinates, then each column."""
    header = [f"x{a + 1}" for a in range(domain.dim)] + list(columns)
    data = [np.asarray(v, dtype=float) for v in columns.values()]
    rows = (list(domain.centers[i]) + [col[i] for col in data] for i in range(domain.size))
    return write_rows_csv(path, header, rows)


def read_rows_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def load_pinned() -> dict:
    """Regression fixtures shipped with the package."""
    with open(PINNED_PATH, encoding="utf-8") as fh:
        return json.load(fh)
