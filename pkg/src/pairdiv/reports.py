"""Report files.

CSV reports start with a ``# pairdiv <version> config=<sha256>`` line and
print reals with 6 significant digits. JSON reports wrap their payload as
``{"meta": {...}, "data": ...}`` and keep full float precision; NaN is
written as null. Keys are sorted so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from . import __version__

TOOL = "pairdiv"


def config_hash(config: Mapping) -> str:
    blob = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _plain(obj):
    """Convert numpy scalars/arrays, sets and NaN into JSON-ready values."""
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return [_plain(v) for v in sorted(obj)]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "" if math.isnan(v) else f"{v:.6g}"
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: Mapping) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {TOOL} {__version__} config={config_hash(config)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_json(path, data, config: Mapping) -> Path:
    path = Path(path)
    doc = {
        "meta": {"tool": TOOL, "version": __version__, "config_sha256": config_hash(config),
                 "config": _plain(config)},
        "data": _plain(data),
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_csv_report(path) -> tuple[str, list[dict]]:
    """Return the header comment and the rows of a CSV report."""
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        return first, list(csv.DictReader(fh))
