"""CSV/JSON writers with round-trip-exact number formatting."""

import csv
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in np.asarray(rows, dtype=float):
            writer.writerow([fmt(v) for v in row])


def read_csv(path):
    with Path(path).open(encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows).reshape(-1, len(header))


def write_density_csv(path, density):
    write_csv(path, ["x", "u"], np.column_stack([density.grid.nodes, density.values]))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # repr gives the shortest round-trip form; 17 significant digits is its upper bound
        return x if np.isfinite(x) else str(x)
    return obj


def dumps(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
