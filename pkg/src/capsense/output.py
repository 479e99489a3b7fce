"""File writers with a pinned format so repeated runs are byte-identical."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

FORMATS = ("csv", "json", "svg")


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.8e}"
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "value") and not isinstance(value, (str, int)):
        return value.value
    return value


def json_text(out) -> str:
    header, rows = out.table
    doc = {
        "command": out.name,
        "report": out.report,
        "columns": header,
        "rows": rows,
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def svg_bytes(out) -> bytes:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        out.plot(ax)
        ax.set_title(out.name)
        fig.tight_layout()
        buf = io.BytesIO()
        # fixed hash salt and no date keep the SVG stable between runs
        with matplotlib.rc_context({"svg.hashsalt": "capsense"}):
            fig.savefig(buf, format="svg", metadata={"Date": None})
        return buf.getvalue()
    finally:
        plt.close(fig)


def write(out, directory: str | Path, formats=("csv", "json"), prefix: str = "") -> list[Path]:
    """Write the command output in each requested format; returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = prefix + out.name.replace("-", "_")
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = directory / f"{stem}.csv"
            path.write_text(csv_text(*out.table), encoding="utf-8")
            written.append(path)
            for name, table in sorted(out.extra_tables.items()):
                extra = directory / f"{stem}_{name}.csv"
                extra.write_text(csv_text(*table), encoding="utf-8")
                written.append(extra)
        elif fmt == "json":
            path = directory / f"{stem}.json"
            path.write_text(json_text(out), encoding="utf-8")
            written.append(path)
        elif fmt == "svg":
            if out.plot is None:
                continue
            path = directory / f"{stem}.svg"
            path.write_bytes(svg_bytes(out))
            written.append(path)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    return written
