"""CSV and JSON formats for series, clusters, reports and models.

Floats are written with ``repr`` so every file parses back bit-exactly.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .clustering import ClusterProfile, Dendrogram
from .timeseries import SeriesError, WeekIndex, WeeklySeries

__all__ = [
    "InputError",
    "parse_week",
    "parse_terms_csv",
    "parse_role_csv",
    "terms_csv_text",
    "records_csv_text",
    "centroids_csv_text",
    "clusters_json_text",
    "load_clusters_json",
    "dumps",
]

WEEK_FORMATS = ("iso", "sunday", "date")


class InputError(ValueError):
    """Malformed or missing input file."""


def parse_week(text: str, week_format: str = "iso") -> WeekIndex:
    """Week label to :class:`WeekIndex`.

    ``iso`` expects ``YYYY-Www``. ``date`` takes a ``YYYY-MM-DD`` day and uses
    its ISO week. ``sunday`` treats the date as the Sunday that starts a
    Sunday-Saturday week (the Google Trends export style) and maps it to the
    ISO week holding the following Monday.
    """
    text = text.strip()
    if week_format == "iso":
        return WeekIndex.parse(text)
    if week_format not in WEEK_FORMATS:
        raise InputError(f"unknown week format {week_format!r}")
    try:
        day = _dt.date.fromisoformat(text)
    except ValueError:
        raise InputError(f"bad date {text!r}, expected YYYY-MM-DD") from None
    if week_format == "sunday":
        day += _dt.timedelta(days=1)
    return WeekIndex.from_date(day)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def parse_terms_csv(path, week_format: str = "iso") -> list[WeeklySeries]:
    """Read a ``week,<id>,<id>...`` file into one series per value column.

    Weeks must be strictly consecutive; every cell must be a finite number.
    Google Trends ``<1`` markers are rejected rather than guessed.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "week":
        raise InputError(f"{path}: first column must be 'week'")
    ids = header[1:]
    if not ids:
        raise InputError(f"{path}: no value columns")
    seen = set()
    for i in ids:
        if not i:
            raise InputError(f"{path}: empty column name in header")
        if i in seen:
            raise InputError(f"{path}: duplicate header {i!r}")
        seen.add(i)
    if len(rows) < 2:
        raise InputError(f"{path}: no data rows")
    weeks: list[WeekIndex] = []
    values = np.empty((len(rows) - 1, len(ids)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        try:
            week = parse_week(row[0], week_format)
        except (SeriesError, InputError) as exc:
            raise InputError(f"{path}: row {r}: {exc}") from None
        if weeks and week - weeks[-1] != 1:
            raise InputError(f"{path}: row {r}: week {week} does not follow {weeks[-1]} (gap or disorder)")
        weeks.append(week)
        for c, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "":
                raise InputError(f"{path}: row {r}, column {ids[c]!r}: empty cell")
            if cell.startswith("<"):
                raise InputError(
                    f"{path}: row {r}, column {ids[c]!r}: censored value {cell!r} is not supported"
                )
            try:
                v = float(cell)
            except ValueError:
                raise InputError(f"{path}: row {r}, column {ids[c]!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}: row {r}, column {ids[c]!r}: non-finite value {cell!r}")
            values[r - 2, c] = v
    return [WeeklySeries(i, weeks[0], values[:, c]) for c, i in enumerate(ids)]


def parse_role_csv(path, week_format: str = "iso") -> WeeklySeries:
    """Media or case file: the same layout with exactly one value column."""
    series = parse_terms_csv(path, week_format)
    if len(series) != 1:
        raise InputError(f"{path}: expected one value column, found {len(series)}")
    return series[0]


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def terms_csv_text(series: Sequence[WeeklySeries]) -> str:
    if not series:
        raise SeriesError("nothing to write")
    span = series[0].span
    for s in series:
        if s.span != span:
            raise SeriesError(f"series {s.id!r} does not share the common span")
    weeks = series[0].weeks()
    return _csv_text(
        ["week"] + [s.id for s in series],
        ([str(w)] + [s.values[k] for s in series] for k, w in enumerate(weeks)),
    )


def records_csv_text(records: Sequence[dict], columns: Sequence[str]) -> str:
    return _csv_text(columns, ([rec.get(c) for c in columns] for rec in records))


def centroids_csv_text(profiles: Sequence[ClusterProfile]) -> str:
    cols = []
    for p in profiles:
        cols += [p.centroid, p.dispersion]
    return terms_csv_text(cols)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, WeekIndex):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # JSON has no inf/nan; encode them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, default=_json_default, allow_nan=False) + "\n"


def clusters_json_text(
    clusters: Sequence[Sequence[str]],
    clustering_range: tuple[WeekIndex, WeekIndex],
    degenerate: Sequence[str] = (),
) -> str:
    return dumps(
        {
            "k": len(clusters),
            "clustering_range": [str(clustering_range[0]), str(clustering_range[1])],
            "clusters": [{"id": i, "members": list(m)} for i, m in enumerate(clusters, start=1)],
            "degenerate": list(degenerate),
        }
    )


def load_clusters_json(path) -> tuple[list[tuple[str, ...]], tuple[WeekIndex, WeekIndex]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"clusters file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        items = sorted(data["clusters"], key=lambda c: int(c["id"]))
        clusters = [tuple(c["members"]) for c in items]
        rng = tuple(WeekIndex.parse(w) for w in data["clustering_range"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed clusters file ({exc})") from None
    return clusters, rng


def dendrogram_json_text(dendro: Dendrogram) -> str:
    return dumps(dendro.to_dict())
