import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchcast.timeseries import (
    Panel,
    SeriesError,
    SplitPlan,
    WeekIndex,
    WeeklySeries,
    align_panel,
    diff1,
    normalize_to_max,
    rescale_0_100,
    seasonal_split_plan,
    standardize,
    wave_split_plan,
)

W = WeekIndex.parse


def series(values, start="2009-W01", id="s"):
    return WeeklySeries(id, W(start), values)


finite_lists = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False), min_size=2, max_size=40
)


class TestWeekIndex:
    def test_round_trip_text(self):
        for text in ("2009-W01", "2015-W53", "2020-W10"):
            assert str(W(text)) == text

    def test_consecutive_across_year_end(self):
        assert W("2015-W53") + 1 == W("2016-W01")
        assert W("2016-W01") - W("2015-W52") == 2

    def test_order(self):
        assert W("2009-W52") < W("2010-W01") < W("2010-W02")

    @pytest.mark.parametrize("bad", ["2009-W54", "2019-W53", "2009W10", "09-W10", ""])
    def test_rejects_bad_labels(self, bad):
        with pytest.raises(SeriesError):
            W(bad)

    @given(st.integers(0, 2000))
    def test_add_then_subtract(self, k):
        start = W("2001-W20")
        assert (start + k) - start == k


class TestWeeklySeries:
    def test_rejects_non_finite(self):
        with pytest.raises(SeriesError):
            series([1.0, np.nan])

    def test_values_are_read_only(self):
        s = series([1, 2, 3])
        with pytest.raises(ValueError):
            s.values[0] = 5

    def test_end_and_window(self):
        s = series([1, 2, 3, 4], start="2010-W52")
        assert s.end == W("2011-W03")
        w = s.window(W("2011-W01"), W("2011-W02"))
        assert list(w.values) == [2, 3] and w.start == W("2011-W01")


class TestRescale:
    def test_affine(self):
        assert list(rescale_0_100(series([5, 10, 15])).values) == [0, 50, 100]

    def test_identity_when_already_0_100(self):
        assert list(rescale_0_100(series([0, 40, 100])).values) == [0, 40, 100]

    def test_constant_series_flagged(self):
        out = rescale_0_100(series([7, 7, 7]))
        assert list(out.values) == [0, 0, 0] and out.degenerate

    def test_empty(self):
        with pytest.raises(SeriesError, match="empty series"):
            rescale_0_100(series([]))

    @given(finite_lists)
    def test_idempotent(self, xs):
        s = series(xs)
        once = rescale_0_100(s)
        if once.degenerate:
            return
        twice = rescale_0_100(once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-9)
        assert once.values.min() == 0 and once.values.max() == 100


class TestStandardize:
    def test_three_points(self):
        np.testing.assert_allclose(standardize(series([1, 2, 3])).values, [-1.224744871391589, 0, 1.224744871391589], atol=1e-15)

    def test_two_points(self):
        np.testing.assert_allclose(standardize(series([10, 20])).values, [-1, 1], atol=1e-15)

    def test_zero_variance(self):
        with pytest.raises(SeriesError, match="zero variance"):
            standardize(series([3, 3, 3]))

    def test_too_short(self):
        with pytest.raises(SeriesError):
            standardize(series([1.0]))

    def test_tiny_spread_does_not_underflow(self):
        z = standardize(series([0.0, 1.6712697558842047e-159])).values
        np.testing.assert_allclose(z, [-1.0, 1.0], atol=1e-15)

    @given(finite_lists)
    def test_moments(self, xs):
        s = series(xs)
        if np.ptp(s.values) == 0 or s.values.std() == 0:
            return
        z = standardize(s).values
        # relative to the input spread: tiny spreads on large offsets lose digits
        scale = max(1.0, np.abs(s.values).max() / s.values.std())
        assert abs(z.mean()) < 1e-12 * len(z) * scale
        assert abs(z.std() - 1) < 1e-12 * scale

    @given(finite_lists, st.floats(0.01, 100), st.floats(-1e3, 1e3))
    def test_affine_invariance(self, xs, a, b):
        s = series(xs)
        if s.values.std() < 1e-3:
            return
        np.testing.assert_allclose(
            standardize(series(a * s.values + b)).values, standardize(s).values, atol=1e-9
        )

    def test_idempotent(self):
        z = standardize(series([4, 8, 15, 16, 23, 42]))
        np.testing.assert_allclose(standardize(z).values, z.values, atol=1e-12)


class TestNormalizeAndDiff:
    def test_normalize(self):
        assert list(normalize_to_max(series([2, 4, 8])).values) == [0.25, 0.5, 1.0]
        assert list(normalize_to_max(series([1, 1])).values) == [1, 1]
        assert list(normalize_to_max(series([0, 5])).values) == [0, 1]

    def test_normalize_non_positive(self):
        with pytest.raises(SeriesError, match="non-positive maximum"):
            normalize_to_max(series([-3, 0]))

    def test_diff(self):
        d = diff1(series([1, 3, 6], start="2009-W10"))
        assert list(d.values) == [2, 3] and d.start == W("2009-W11")
        assert list(diff1(series([4, 4, 4])).values) == [0, 0]
        assert list(diff1(series([5, 2])).values) == [-3]
        with pytest.raises(SeriesError):
            diff1(series([1.0]))

    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=60))
    def test_diff_inverts_cumsum(self, xs):
        x = np.array(xs)
        d = diff1(series(np.cumsum(x))).values
        # cumsum rounding grows with the running magnitude
        tol = 1e-9 * max(1.0, np.abs(np.cumsum(np.abs(x))).max())
        np.testing.assert_allclose(d, x[1:], atol=tol, rtol=0)


class TestAlign:
    def test_intersection(self):
        a = WeeklySeries("a", W("2009-W10"), np.arange(31.0))
        b = WeeklySeries("b", W("2009-W20"), np.arange(31.0))
        p = align_panel([a, b])
        assert p.span == (W("2009-W20"), W("2009-W40"))
        assert p.term("a").values[0] == 10 and p.term("b").values[-1] == 20

    def test_identical_spans_unchanged(self):
        a, b = series([1, 2, 3], id="a"), series([4, 5, 6], id="b")
        p = align_panel([a, b])
        assert p.term("a") == a and p.term("b") == b

    def test_disjoint(self):
        a = series([1, 2], id="a", start="2009-W01")
        b = series([1, 2], id="b", start="2009-W10")
        with pytest.raises(SeriesError, match="no common weeks"):
            align_panel([a, b])

    def test_duplicate_ids(self):
        with pytest.raises(SeriesError, match="duplicate"):
            align_panel([series([1, 2], id="a"), series([3, 4], id="a")])

    @given(st.lists(st.tuples(st.integers(0, 30), st.integers(1, 30)), min_size=1, max_size=6))
    def test_span_is_maximal_common(self, specs):
        base = W("2012-W01")
        items = [WeeklySeries(f"t{i}", base + s, np.ones(n)) for i, (s, n) in enumerate(specs)]
        first = max(s.start for s in items)
        last = min(s.end for s in items)
        if last < first:
            with pytest.raises(SeriesError):
                align_panel(items)
            return
        p = align_panel(items)
        assert p.span == (first, last)
        for s in items:
            assert s.start <= p.span[0] and p.span[1] <= s.end


class TestSplits:
    bounds = [W("2010-W40") + 52 * i for i in range(10)]  # 9 seasons

    def test_first_window(self):
        plan = seasonal_split_plan(self.bounds, 3, 3)
        assert plan.train == tuple((self.bounds[i], self.bounds[i + 1] - 1) for i in range(3))
        assert plan.test == (self.bounds[3], self.bounds[4] - 1)

    def test_last_window(self):
        plan = seasonal_split_plan(self.bounds, 3, 8)
        assert plan.train[0][0] == self.bounds[5] and plan.test[0] == self.bounds[8]

    def test_too_few_seasons(self):
        with pytest.raises(SeriesError):
            seasonal_split_plan(self.bounds[:4], 3, 3)

    def test_wave_split(self):
        cases = series([9, 4, 1, 6, 8])
        plan = wave_split_plan(cases, (W("2009-W02"), W("2009-W04")))
        assert plan.train == ((W("2009-W01"), W("2009-W02")),)
        assert plan.test == (W("2009-W03"), W("2009-W05"))

    def test_wave_tie_goes_early(self):
        cases = series([9, 1, 1, 6, 8])
        plan = wave_split_plan(cases, (W("2009-W02"), W("2009-W04")))
        assert plan.test[0] == W("2009-W02")

    def test_wave_single_week_range(self):
        cases = series([9, 4, 1, 6, 8])
        plan = wave_split_plan(cases, (W("2009-W04"), W("2009-W04")))
        assert plan.test[0] == W("2009-W04")

    def test_wave_range_outside(self):
        with pytest.raises(SeriesError):
            wave_split_plan(series([1, 2, 3]), (W("2009-W02"), W("2009-W09")))

    @given(st.lists(st.integers(0, 100), min_size=3, max_size=40), st.data())
    def test_wave_partition_contiguous(self, xs, data):
        cases = series(xs)
        lo = data.draw(st.integers(1, len(xs) - 1))
        hi = data.draw(st.integers(lo, len(xs) - 1))
        plan = wave_split_plan(cases, (cases.start + lo, cases.start + hi))
        train, test = set(plan.train_weeks()), set(plan.test_weeks())
        assert not train & test
        assert sorted(train | test) == cases.weeks()

    def test_overlap_rejected(self):
        with pytest.raises(SeriesError):
            SplitPlan(((W("2009-W01"), W("2009-W05")),), (W("2009-W05"), W("2009-W08")))


def test_panel_requires_common_span():
    with pytest.raises(SeriesError):
        Panel((series([1, 2], id="a"), series([1, 2, 3], id="b")))
