"""CSV / JSON emitters.  Everything written here is a pure function of the
records, so identical runs give byte-identical files."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from collections import OrderedDict

from .experiment import TRIAL_COLUMNS

SUMMARY_METRICS = ("normwise_berr", "componentwise_berr", "forward_err", "ir_steps")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    if hasattr(v, "item"):  # numpy scalar
        return format_value(v.item())
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, rows, columns) -> None:
    write_text(path, render_csv(rows, columns))


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _num(s: str):
    if s in ("", None):
        return None
    try:
        return float(s)
    except ValueError:
        return None


def summarize(rows: list[dict]) -> dict:
    """Median / min / max of each metric per (kappa, method).

    Works on string-valued rows as read back from ``trials.csv``, so the
    summary is recomputable from the CSV alone.
    """
    rows = stringify_rows(rows)
    groups: "OrderedDict[tuple, list]" = OrderedDict()
    for row in rows:
        groups.setdefault((row["kappa_A"], row["method"]), []).append(row)
    out = []
    for (kappa, method), grp in groups.items():
        entry = {"kappa_A": float(kappa), "method": method, "trials": len(grp),
                 "ok": sum(1 for r in grp if r["status"] == "ok")}
        for m in SUMMARY_METRICS:
            vals = [v for v in (_num(r[m]) for r in grp) if v is not None and not math.isnan(v)]
            entry[m] = ({"median": statistics.median(vals), "min": min(vals), "max": max(vals)}
                        if vals else None)
        out.append(entry)
    return {"groups": out}


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True, default=_json_default) + "\n"


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def stringify_rows(rows: list[dict], columns=TRIAL_COLUMNS) -> list[dict]:
    return [{c: format_value(r.get(c)) for c in columns} for r in rows]
