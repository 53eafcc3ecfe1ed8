"""CSV persistence of trace records and multi-seed aggregation."""
from __future__ import annotations

import csv
import math

import numpy as np

from ..exceptions import MismatchedCadence
from ..metrics import TRACE_FIELDS, TraceRecord

STATIONARITY_FIELDS = ("grad_phi_norm", "gamma_grad_norm")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def _parse(value, integer=False):
    if value == "":
        return None
    return int(value) if integer else float(value)


def write_trace(records, path):
    """Write records with the fixed header; absent metrics become empty fields."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_FIELDS) + "\n")
        for rec in records:
            row = rec.as_dict() if isinstance(rec, TraceRecord) else rec
            fh.write(",".join(_fmt(row.get(k)) for k in TRACE_FIELDS) + "\n")


def read_trace(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            TraceRecord(**{k: _parse(row[k], integer=(k == "s")) for k in TRACE_FIELDS})
            for row in reader
        ]


def _running_min(values):
    out, best = [], math.inf
    for v in values:
        if v is not None and v < best:
            best = v
        out.append(None if best == math.inf else best)
    return out


def aggregate(traces):
    """Seed-average of several traces.

    ``traces`` holds paths or record lists.  Returns one dict per recorded
    step with every trace column averaged over seeds (absent values skipped),
    plus ``<metric>_runmin`` columns: the per-seed running minimum of each
    stationarity metric, averaged over seeds.
    """
    loaded = [read_trace(t) if not isinstance(t, list) else t for t in traces]
    if not loaded:
        raise ValueError("need at least one trace")
    steps = [rec.s for rec in loaded[0]]
    for tr in loaded[1:]:
        if [rec.s for rec in tr] != steps:
            raise MismatchedCadence("traces were recorded at different outer steps")

    runmins = {
        k: [_running_min([getattr(r, k) for r in tr]) for tr in loaded] for k in STATIONARITY_FIELDS
    }
    rows = []
    for j, s in enumerate(steps):
        row = {"s": s}
        for k in TRACE_FIELDS[1:]:
            vals = [getattr(tr[j], k) for tr in loaded if getattr(tr[j], k) is not None]
            row[k] = float(np.mean(vals)) if vals else None
        for k in STATIONARITY_FIELDS:
            vals = [rm[j] for rm in runmins[k] if rm[j] is not None]
            row[f"{k}_runmin"] = float(np.mean(vals)) if vals else None
        rows.append(row)
    return rows


def write_summary(rows, path):
    columns = list(rows[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[k]) for k in columns) + "\n")
