"""Delimited output: one CSV row per run, plus a self-describing manifest.

The header is fixed: policy,k,f_k,rho,theta,seed,arrivals,warmup,
mean_response,ci95,p_helper,helper_util,p_helper_bound,critical_bound,
then resp_c{i},ph_c{i} for each class.  Cells use dot decimals regardless of
locale; unknown values stay empty.  The first line is a '#' comment recording
the tool version and the full parameterization, so every file can be re-run.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from typing import Iterable, TextIO

_BASE_COLUMNS = [
    "policy", "k", "f_k", "rho", "theta", "seed", "arrivals", "warmup",
    "mean_response", "ci95", "p_helper", "helper_util",
    "p_helper_bound", "critical_bound",
]
_EXTRA_COLUMNS = ["completed", "preemptions", "avg_in_system"]


def columns(n_classes: int) -> list[str]:
    cols = list(_BASE_COLUMNS)
    cols += [f"resp_c{i}" for i in range(n_classes)]
    cols += [f"ph_c{i}" for i in range(n_classes)]
    cols += _EXTRA_COLUMNS
    return cols


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def write_rows(out: TextIO, rows: list[dict], n_classes: int, manifest: str) -> None:
    out.write(f"# {manifest}\n")
    writer = csv.writer(out, lineterminator="\n")
    cols = columns(n_classes)
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in cols])


def rows_to_text(rows: list[dict], n_classes: int, manifest: str) -> str:
    buf = io.StringIO()
    write_rows(buf, rows, n_classes, manifest)
    return buf.getvalue()


def read_rows(path: str) -> list[dict]:
    """Read a results CSV back into row dicts, restoring numeric types."""
    rows: list[dict] = []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for rec in reader:
        row = {}
        for key, text in rec.items():
            if text is None or text == "":
                row[key] = None
            else:
                try:
                    num = float(text)
                    row[key] = int(num) if num.is_integer() and "." not in text else num
                except ValueError:
                    row[key] = text
        rows.append(row)
    return rows


def summarize(rows: Iterable[dict], x_key: str) -> dict[tuple, dict]:
    """Aggregate replications: mean and 95% CI per (grid value, policy).

    The CI is the normal approximation over per-seed run means; with a single
    replication it is zero.
    """
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row[x_key], row["policy"]), []).append(row)

    def _mci(values: list[float]) -> tuple[float, float]:
        vals = [v for v in values if v is not None and not math.isnan(v)]
        if not vals:
            return math.nan, math.nan
        if len(vals) == 1:
            return vals[0], 0.0
        return (
            statistics.fmean(vals),
            1.96 * statistics.stdev(vals) / math.sqrt(len(vals)),
        )

    out = {}
    for key, grp in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        resp, resp_ci = _mci([r["mean_response"] for r in grp])
        ph, ph_ci = _mci([r["p_helper"] for r in grp])
        out[key] = {
            "mean_response": resp,
            "mean_response_ci": resp_ci,
            "p_helper": ph,
            "p_helper_ci": ph_ci,
            "p_helper_bound": grp[0].get("p_helper_bound"),
            "critical_bound": grp[0].get("critical_bound"),
            "n": len(grp),
        }
    return out
