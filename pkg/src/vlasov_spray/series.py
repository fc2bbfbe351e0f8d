"""Time series of functional records and their CSV form."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

from .diagnostics import FunctionalRecord, record_columns
from .errors import SeriesFormatError


@dataclass
class TimeSeries:
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    dim: int = 1

    def __len__(self):
        return len(self.records)

    def append(self, record: FunctionalRecord):
        if self.records and not record.t > self.records[-1].t:
            raise SeriesFormatError(f"record time {record.t} does not increase past {self.records[-1].t}")
        self.records.append(record)

    def times(self):
        return [r.t for r in self.records]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_series(series: TimeSeries, path, write_meta: bool = True):
    """Write the records as CSV (17 significant digits) plus a JSON sidecar."""
    path = os.fspath(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(record_columns(series.dim))
        for rec in series.records:
            writer.writerow([_fmt(v) for v in rec.as_row()])
    if write_meta:
        meta = dict(series.meta)
        meta["dim"] = series.dim
        with open(path + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def read_series(path) -> TimeSeries:
    """Inverse of :func:`write_series`; the sidecar is optional."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SeriesFormatError(f"{path}: empty file (row 1: missing header)")
    header = rows[0]
    n_vec = len(header) - 12
    if n_vec < 2 or n_vec % 2:
        raise SeriesFormatError(f"{path}: row 1: header has {len(header)} columns, expected 12 + 2*dim")
    dim = n_vec // 2
    if header != record_columns(dim):
        raise SeriesFormatError(f"{path}: row 1: unexpected header {header}")
    series = TimeSeries(dim=dim)
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SeriesFormatError(f"{path}: row {i}: expected {len(header)} fields, got {len(row)}")
        try:
            rec = FunctionalRecord.from_row(row, dim)
        except ValueError as exc:
            raise SeriesFormatError(f"{path}: row {i}: {exc}") from None
        try:
            series.append(rec)
        except SeriesFormatError as exc:
            raise SeriesFormatError(f"{path}: row {i}: {exc}") from None
    meta_path = path + ".meta.json"
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            series.meta = json.load(fh)
    return series
