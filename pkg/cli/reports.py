"""
Report formatting for the ``scef`` command.

Every JSON report carries ``"schema": 1``.  CSV reports use a header row and
``\\n`` line endings; the complexity table is aligned plain text.
"""

import csv
import io
import json
import math
import sys
from pathlib import Path


def to_json(payload):
    return json.dumps(payload, indent=2) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def emit(text, out=None, stream=None):
    """Write *text* to the file *out* or, without one, to *stream* (stdout)."""
    if out is None:
        (stream or sys.stdout).write(text)
        return None
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


# ------------------------------------------------------------------
# analyze
# ------------------------------------------------------------------

def analysis_csv(analysis):
    width = max((len(r.histogram()) for r in analysis.reports), default=0)
    header = ["depth", "layer", "layer_rank", "zero_channels"]
    header += [f"density_r{k}" for k in range(1, width + 1)]
    rows = []
    for row in analysis.csv_rows():
        rows.append(row + [""] * (len(header) - len(row)))
    return to_csv(header, rows)


# ------------------------------------------------------------------
# complexity
# ------------------------------------------------------------------

COMPLEXITY_COLUMNS = ("index", "kind", "c_in", "c_out", "h", "stride", "rank", "input", "params", "flops")


def _complexity_cells(row):
    return [
        str(row.index), row.kind, str(row.c_in), str(row.c_out), str(row.h), str(row.stride),
        "" if row.rank is None else f"{row.rank}{'*' if row.frozen else ''}",
        f"{row.input_hw[0]}x{row.input_hw[1]}", str(row.cost.params), str(row.cost.flops),
    ]


def complexity_table(summary):
    """Aligned text table; ``*`` marks SCEF layers with frozen eigen-filters."""
    body = [_complexity_cells(row) for row in summary.rows]
    footer = ["total", "", "", "", "", "", "", "", str(summary.total_params), str(summary.total_flops)]
    lines = [list(COMPLEXITY_COLUMNS)] + body + [footer]
    widths = [max(len(line[c]) for line in lines) for c in range(len(COMPLEXITY_COLUMNS))]
    rule = "  ".join("-" * w for w in widths)

    def fmt(cells):
        return "  ".join(cell.rjust(w) for cell, w in zip(cells, widths)).rstrip()

    out = [f"{summary.name}", fmt(lines[0]), rule]
    out += [fmt(cells) for cells in body]
    out += [rule, fmt(footer)]
    return "\n".join(out) + "\n"


def complexity_csv(summary):
    rows = [_complexity_cells(row) for row in summary.rows]
    rows.append(["total", "", "", "", "", "", "", "", summary.total_params, summary.total_flops])
    return to_csv(COMPLEXITY_COLUMNS, rows)


# ------------------------------------------------------------------
# trajectory / experiment
# ------------------------------------------------------------------

def trajectory_csv(trajectory):
    rows = [[epoch, *row.tolist()] for epoch, row in zip(trajectory.epochs, trajectory.table)]
    return to_csv(["epoch", *trajectory.layers], rows)


def experiment_csv(result):
    header = ["variant", "val_acc", "train_acc", "final_total_loss", "trainable_params", "flops", "max_defect"]
    rows = [[getattr(row, name) for name in header] for row in result.rows]
    return to_csv(header, rows)


def format_accuracy(value):
    return "n/a" if value is None or math.isnan(value) else f"{100.0 * value:.1f}%"
