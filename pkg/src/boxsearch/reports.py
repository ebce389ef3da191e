"""Readers and writers for the files the command line emits.

Floats are written with 17 significant digits so every value survives a
round trip bit for bit. CSV files carry their resolved configuration as
``#``-prefixed JSON lines above the column header.
"""

from __future__ import annotations

import io
import json
import math

import numpy as np

SIM_COLUMNS = ("trial", "treasure_box", "discovery_time")


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    return format(x, ".17g")


def dumps(obj) -> str:
    """JSON text with floats at 17 significant digits and sorted keys."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {dumps(v)}" for k, v in sorted(obj.items()))
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text):
    return json.loads(text)


# ---------------------------------------------------------------------------
# simulation results


def write_sim_csv(config: dict, times, treasure, out) -> None:
    out.write("# config: " + dumps(config) + "\n")
    out.write(",".join(SIM_COLUMNS) + "\n")
    buf = io.StringIO()
    trials = np.arange(len(times))
    np.savetxt(buf, np.column_stack((trials, treasure, times)), fmt="%d", delimiter=",")
    out.write(buf.getvalue())


def read_sim_csv(src):
    """Return ``(config, times, treasure)`` from a file written by :func:`write_sim_csv`."""
    config = {}
    header = None
    rows = []
    for line in src:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config:"):
                config = loads(body[len("config:"):])
            continue
        if header is None:
            header = tuple(line.split(","))
            if header != SIM_COLUMNS:
                raise ValueError(f"unexpected columns {header}")
            continue
        rows.append([int(v) for v in line.split(",")])
    data = np.array(rows, dtype=np.int64).reshape(-1, 3)
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ValueError("trial column is not 0..n-1")
    return config, data[:, 2], data[:, 1]


def write_sim_json(config: dict, times, treasure, out) -> None:
    doc = {
        "config": config,
        "columns": list(SIM_COLUMNS),
        "rows": [[i, int(x), int(t)] for i, (x, t) in enumerate(zip(treasure, times))],
    }
    out.write(dumps(doc) + "\n")


def read_sim_json(src):
    doc = loads(src.read())
    if tuple(doc["columns"]) != SIM_COLUMNS:
        raise ValueError(f"unexpected columns {doc['columns']}")
    data = np.array(doc["rows"], dtype=np.int64).reshape(-1, 3)
    return doc["config"], data[:, 2], data[:, 1]


# ---------------------------------------------------------------------------
# survival matrices and tables


def write_matrix_csv(survival, out, horizon=None) -> None:
    """Rows are boxes, columns ``t = 0..horizon``; the last column is repeated to pad."""
    survival = np.asarray(survival, dtype=np.float64)
    H = survival.shape[1] - 1 if horizon is None else int(horizon)
    if H + 1 > survival.shape[1]:
        pad = np.repeat(survival[:, -1:], H + 1 - survival.shape[1], axis=1)
        survival = np.hstack((survival, pad))
    out.write("x," + ",".join(str(t) for t in range(H + 1)) + "\n")
    for x, row in enumerate(survival[:, : H + 1], start=1):
        out.write(str(x) + "," + ",".join(fmt_float(v) for v in row) + "\n")


def read_matrix_csv(src) -> np.ndarray:
    lines = [ln.rstrip("\n") for ln in src if ln.strip()]
    cols = lines[0].split(",")
    if cols[0] != "x":
        raise ValueError("matrix CSV must start with an 'x' column")
    rows = []
    for i, ln in enumerate(lines[1:], start=1):
        parts = ln.split(",")
        if int(parts[0]) != i:
            raise ValueError(f"row {i} is labelled box {parts[0]}")
        rows.append([float(v) for v in parts[1:]])
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(cols) - 1)


def write_table_csv(rows: list[dict], columns, out) -> None:
    out.write(",".join(columns) + "\n")
    for r in rows:
        cells = []
        for c in columns:
            v = r[c]
            cells.append(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v))
        out.write(",".join(cells) + "\n")


def read_table_csv(src, float_columns=()) -> list[dict]:
    lines = [ln.rstrip("\n") for ln in src if ln.strip() and not ln.startswith("#")]
    cols = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        row = dict(zip(cols, ln.split(",")))
        for c in float_columns:
            row[c] = float(row[c])
        out.append(row)
    return out
