"""Week-indexed series, panels, and the preprocessing transforms.

Everything here is an immutable value; transforms return new objects.
"""
from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "SeriesError",
    "WeekIndex",
    "WeeklySeries",
    "Panel",
    "SplitPlan",
    "rescale_0_100",
    "standardize",
    "normalize_to_max",
    "diff1",
    "align_panel",
    "seasonal_split_plan",
    "wave_split_plan",
]

_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$")


class SeriesError(ValueError):
    """Raised when a series or panel violates a precondition."""


@dataclass(frozen=True, order=True)
class WeekIndex:
    """An ISO-8601 week, e.g. ``WeekIndex(2009, 17)`` for ``2009-W17``."""

    iso_year: int
    iso_week: int

    def __post_init__(self):
        try:
            _dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)
        except ValueError as exc:
            raise SeriesError(f"invalid ISO week {self.iso_year}-W{self.iso_week:02d}") from exc

    @classmethod
    def parse(cls, text: str) -> "WeekIndex":
        m = _WEEK_RE.match(text.strip())
        if m is None:
            raise SeriesError(f"bad week label {text!r}, expected YYYY-Www")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_date(cls, day: _dt.date) -> "WeekIndex":
        year, week, _ = day.isocalendar()
        return cls(year, week)

    def monday(self) -> _dt.date:
        return _dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)

    def __add__(self, weeks: int) -> "WeekIndex":
        if not isinstance(weeks, (int, np.integer)):
            return NotImplemented
        return WeekIndex.from_date(self.monday() + _dt.timedelta(weeks=int(weeks)))

    def __sub__(self, other):
        if isinstance(other, WeekIndex):
            return (self.monday() - other.monday()).days // 7
        if isinstance(other, (int, np.integer)):
            return self + (-int(other))
        return NotImplemented

    def __str__(self) -> str:
        return f"{self.iso_year:04d}-W{self.iso_week:02d}"


def _as_week(w) -> WeekIndex:
    return w if isinstance(w, WeekIndex) else WeekIndex.parse(str(w))


@dataclass(frozen=True, eq=False)
class WeeklySeries:
    """One named series with a value per consecutive week starting at ``start``.

    ``degenerate`` is set by :func:`rescale_0_100` when the input was constant.
    """

    id: str
    start: WeekIndex
    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise SeriesError(f"series {self.id!r}: values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise SeriesError(f"series {self.id!r}: non-finite value")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start", _as_week(self.start))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeeklySeries):
            return NotImplemented
        return (
            self.id == other.id
            and self.start == other.start
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def end(self) -> WeekIndex:
        """Last covered week (inclusive)."""
        return self.start + (len(self.values) - 1)

    @property
    def span(self) -> tuple[WeekIndex, WeekIndex]:
        return (self.start, self.end)

    def weeks(self) -> list[WeekIndex]:
        return [self.start + k for k in range(len(self.values))]

    def with_values(self, values, start: Optional[WeekIndex] = None, **kw) -> "WeeklySeries":
        return WeeklySeries(kw.pop("id", self.id), start or self.start, values, **kw)

    def window(self, first: WeekIndex, last: WeekIndex) -> "WeeklySeries":
        """Sub-series covering ``first..last`` inclusive."""
        i, j = first - self.start, last - self.start
        if i < 0 or j >= len(self.values) or j < i:
            raise SeriesError(f"series {self.id!r}: window {first}..{last} outside {self.start}..{self.end}")
        return WeeklySeries(self.id, first, self.values[i : j + 1])


@dataclass(frozen=True)
class Panel:
    """Week-aligned term series plus optional media and case series."""

    terms: tuple[WeeklySeries, ...]
    media: Optional[WeeklySeries] = None
    cases: Optional[WeeklySeries] = None
    span: tuple[WeekIndex, WeekIndex] = field(default=None)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        everything = list(terms) + [s for s in (self.media, self.cases) if s is not None]
        if not everything:
            raise SeriesError("panel has no series")
        span = self.span or everything[0].span
        for s in everything:
            if s.span != tuple(span):
                raise SeriesError(f"series {s.id!r} covers {s.start}..{s.end}, panel is {span[0]}..{span[1]}")
        ids = [t.id for t in terms]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise SeriesError(f"duplicate term id(s): {', '.join(dup)}")
        object.__setattr__(self, "span", tuple(span))

    @property
    def term_ids(self) -> list[str]:
        return [t.id for t in self.terms]

    @property
    def n_weeks(self) -> int:
        return self.span[1] - self.span[0] + 1

    def term(self, term_id: str) -> WeeklySeries:
        for t in self.terms:
            if t.id == term_id:
                return t
        raise SeriesError(f"unknown term id {term_id!r}")

    def matrix(self, ids: Optional[Sequence[str]] = None) -> np.ndarray:
        """Weeks x terms array for ``ids`` (all terms by default)."""
        series = self.terms if ids is None else [self.term(i) for i in ids]
        return np.column_stack([s.values for s in series])

    def window(self, first: WeekIndex, last: WeekIndex) -> "Panel":
        cut = lambda s: None if s is None else s.window(first, last)
        return Panel(
            tuple(t.window(first, last) for t in self.terms),
            cut(self.media),
            cut(self.cases),
            (first, last),
        )


@dataclass(frozen=True)
class SplitPlan:
    """Train ranges and a test range, all inclusive ``(first, last)`` week pairs."""

    train: tuple[tuple[WeekIndex, WeekIndex], ...]
    test: tuple[WeekIndex, WeekIndex]

    def __post_init__(self):
        train = tuple((_as_week(a), _as_week(b)) for a, b in self.train)
        test = (_as_week(self.test[0]), _as_week(self.test[1]))
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)
        ranges = list(train) + [test]
        for a, b in ranges:
            if b < a:
                raise SeriesError(f"empty range {a}..{b}")
        ordered = sorted(ranges)
        for (_, b), (c, _) in zip(ordered, ordered[1:]):
            if c <= b:
                raise SeriesError("train and test ranges overlap")

    def train_weeks(self) -> list[WeekIndex]:
        return [a + k for a, b in self.train for k in range(b - a + 1)]

    def test_weeks(self) -> list[WeekIndex]:
        a, b = self.test
        return [a + k for k in range(b - a + 1)]

    def label(self) -> str:
        return f"{self.test[0]}..{self.test[1]}"


def _require_nonempty(series: WeeklySeries):
    if len(series) == 0:
        raise SeriesError("empty series")


def rescale_0_100(series: WeeklySeries) -> WeeklySeries:
    """Min-max rescale onto [0, 100].

    A constant series maps to zeros and comes back with ``degenerate=True``
    so callers can report it instead of failing.
    """
    _require_nonempty(series)
    x = series.values
    lo, hi = x.min(), x.max()
    if hi == lo:
        return series.with_values(np.zeros_like(x), degenerate=True)
    # divide first so the maximum lands on exactly 100
    return series.with_values((x - lo) / (hi - lo) * 100.0)


def standardize(series: WeeklySeries) -> WeeklySeries:
    """Zero mean, unit population standard deviation."""
    x = series.values
    if len(x) < 2:
        raise SeriesError(f"series {series.id!r}: standardize needs at least 2 values")
    dev = x - x.mean()
    peak = np.abs(dev).max()
    if peak == 0 or np.ptp(x) == 0:
        raise SeriesError(f"series {series.id!r}: zero variance")
    # scale before squaring so tiny spreads do not underflow
    dev = dev / peak
    return series.with_values(dev / dev.std())


def normalize_to_max(series: WeeklySeries) -> WeeklySeries:
    _require_nonempty(series)
    top = series.values.max()
    if top <= 0:
        raise SeriesError(f"series {series.id!r}: non-positive maximum")
    return series.with_values(series.values / top)


def diff1(series: WeeklySeries) -> WeeklySeries:
    """First difference; the result starts one week later."""
    if len(series) < 2:
        raise SeriesError(f"series {series.id!r}: diff1 needs at least 2 values")
    return series.with_values(np.diff(series.values), start=series.start + 1)


def align_panel(
    series_list: Iterable[WeeklySeries],
    media: Optional[WeeklySeries] = None,
    cases: Optional[WeeklySeries] = None,
) -> Panel:
    """Truncate every series to the weeks they all share."""
    terms = list(series_list)
    if not terms:
        raise SeriesError("at least one term series is required")
    ids = [t.id for t in terms]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise SeriesError(f"duplicate term id(s): {', '.join(dup)}")
    everything = terms + [s for s in (media, cases) if s is not None]
    first = max(s.start for s in everything)
    last = min(s.end for s in everything)
    if last < first:
        raise SeriesError("no common weeks")
    cut = lambda s: None if s is None else s.window(first, last)
    return Panel(tuple(cut(t) for t in terms), cut(media), cut(cases), (first, last))


def seasonal_split_plan(
    season_boundaries: Sequence[WeekIndex], train_count: int = 3, test_index: int = 3
) -> SplitPlan:
    """Sliding-window split: the ``train_count`` seasons before ``test_index``.

    ``season_boundaries`` are fence posts: season ``i`` covers
    ``boundaries[i]`` up to the week before ``boundaries[i + 1]``, so ``k``
    seasons need ``k + 1`` boundaries.
    """
    bounds = [_as_week(b) for b in season_boundaries]
    if any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise SeriesError("season boundaries must be strictly increasing")
    n_seasons = len(bounds) - 1
    if train_count < 1:
        raise SeriesError("train_count must be positive")
    if n_seasons < train_count + 1:
        raise SeriesError(f"need at least {train_count + 1} seasons, got {max(n_seasons, 0)}")
    if not train_count <= test_index < n_seasons:
        raise SeriesError(f"test_index must be in {train_count}..{n_seasons - 1}, got {test_index}")
    season = lambda i: (bounds[i], bounds[i + 1] - 1)
    return SplitPlan(
        tuple(season(i) for i in range(test_index - train_count, test_index)),
        season(test_index),
    )


def season_ranges(season_boundaries: Sequence[WeekIndex]) -> list[tuple[WeekIndex, WeekIndex]]:
    bounds = [_as_week(b) for b in season_boundaries]
    return [(a, b - 1) for a, b in zip(bounds, bounds[1:])]


def wave_split_plan(
    cases: WeeklySeries, search_range: tuple[WeekIndex, WeekIndex]
) -> SplitPlan:
    """Split at the week with fewest cases inside ``search_range``.

    Ties go to the earliest week. Train runs from the series start up to the
    week before the split; test runs from the split week to the series end.
    """
    first, last = (_as_week(w) for w in search_range)
    if last < first or first < cases.start or last > cases.end:
        raise SeriesError(f"search range {first}..{last} outside cases span {cases.start}..{cases.end}")
    window = cases.window(first, last).values
    split = first + int(np.argmin(window))
    if split == cases.start:
        raise SeriesError("split at the first week leaves no training data")
    return SplitPlan(((cases.start, split - 1),), (split, cases.end))
