"""Experiment runners, metrics and the synthetic benchmark panel."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import comb

from .models import (
    DesignMatrix,
    ForestHyper,
    ForestModel,
    LinearModel,
    forest_fit,
    grid_search_cv,
    ols_fit,
)
from .timeseries import (
    Panel,
    SeriesError,
    SplitPlan,
    WeekIndex,
    WeeklySeries,
    rescale_0_100,
    season_ranges,
    seasonal_split_plan,
    wave_split_plan,
)

__all__ = [
    "FeatureSetSpec",
    "EvalReport",
    "SynthSpec",
    "SynthPanel",
    "r2_score",
    "rmse_score",
    "adjusted_rand_index",
    "resolve_feature_set",
    "run_seasonal_eval",
    "run_wave_eval",
    "summarize_reports",
    "generate_synthetic",
    "REPORT_COLUMNS",
]

MODELS = ("linreg", "rf")


def r2_score(actual, predicted) -> float:
    """Coefficient of determination; negative when worse than the mean."""
    y, yhat = np.asarray(actual, dtype=float), np.asarray(predicted, dtype=float)
    if len(y) == 0 or len(y) != len(yhat):
        raise SeriesError(f"length mismatch: {len(y)} vs {len(yhat)}")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0 or np.ptp(y) == 0:
        raise SeriesError("zero variance")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def rmse_score(actual, predicted) -> float:
    """Root mean squared error. Inputs should already be on the standardized scale."""
    y, yhat = np.asarray(actual, dtype=float), np.asarray(predicted, dtype=float)
    if len(y) == 0 or len(y) != len(yhat):
        raise SeriesError(f"length mismatch: {len(y)} vs {len(yhat)}")
    return math.sqrt(float(np.mean((y - yhat) ** 2)))


def adjusted_rand_index(labels_a: Sequence, labels_b: Sequence) -> float:
    """Chance-corrected agreement between two labelings of the same items."""
    a, b = list(labels_a), list(labels_b)
    if len(a) != len(b):
        raise ValueError("labelings differ in length")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    sum_cells = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    total = comb(len(a), 2)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


@dataclass(frozen=True)
class FeatureSetSpec:
    name: str
    resolved_ids: tuple[str, ...]


def resolve_feature_set(
    name: Union[str, Sequence[str]], panel: Panel, clusters: Optional[Sequence[Sequence[str]]] = None
) -> FeatureSetSpec:
    """``"all"``, ``"cluster:<id>"`` (1-based) or an explicit list of term ids."""
    if not isinstance(name, str):
        ids = tuple(name)
        label = "+".join(ids)
    elif name == "all":
        return FeatureSetSpec("all", tuple(panel.term_ids))
    elif name.startswith("cluster:"):
        if clusters is None:
            raise SeriesError(f"feature set {name!r} needs cluster assignments")
        try:
            cid = int(name.split(":", 1)[1])
        except ValueError:
            raise SeriesError(f"bad feature set {name!r}") from None
        if not 1 <= cid <= len(clusters):
            raise SeriesError(f"no cluster {cid}; have 1..{len(clusters)}")
        ids, label = tuple(clusters[cid - 1]), name
    else:
        ids = tuple(i for i in name.split("+") if i)
        label = name
    known = set(panel.term_ids)
    missing = [i for i in ids if i not in known]
    if missing or not ids:
        raise SeriesError(f"feature set {label!r}: unknown term id(s) {', '.join(missing) or '(none)'}")
    return FeatureSetSpec(label, ids)


@dataclass(frozen=True, eq=False)
class EvalReport:
    """One experiment cell. ``error`` is set instead of metrics when the cell failed."""

    model: str
    feature_set: FeatureSetSpec
    period: str
    r2: float = math.nan
    rmse: float = math.nan
    split: Optional[SplitPlan] = None
    predictions: Optional[WeeklySeries] = None
    actual: Optional[WeeklySeries] = None
    hyper: Optional[ForestHyper] = None
    fitted: Union[LinearModel, ForestModel, None] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def one_minus_r2(self) -> float:
        return 1.0 - self.r2

    def as_record(self) -> dict:
        return {
            "model": self.model,
            "feature_set": self.feature_set.name,
            "period": self.period,
            "r2": self.r2,
            "rmse": self.rmse,
            "one_minus_r2": self.one_minus_r2,
            "hyper": "" if self.hyper is None else self.hyper.label(),
            "error": self.error or "",
        }


REPORT_COLUMNS = ("model", "feature_set", "period", "r2", "rmse", "one_minus_r2", "hyper", "error")


def _standardize_with(x: np.ndarray, ref: np.ndarray, what: str) -> np.ndarray:
    sd = ref.std()
    if len(ref) < 2 or sd == 0 or np.ptp(ref) == 0:
        raise SeriesError(f"{what}: zero variance")
    return (x - ref.mean()) / sd


def _fit_predict(model: str, train: DesignMatrix, test_X: np.ndarray, seed: int, rf_hyper, rf_grid, cv_folds, n_jobs):
    if model == "linreg":
        fitted = ols_fit(train)
        return fitted, fitted.predict(test_X), None
    if model == "rf":
        hyper = rf_hyper
        if hyper is None:
            hyper, _ = grid_search_cv(train, rf_grid, folds=cv_folds, seed=seed, n_jobs=n_jobs)
        fitted = forest_fit(train, hyper, seed, n_jobs)
        return fitted, fitted.predict(test_X), hyper
    raise SeriesError(f"unknown model {model!r}; expected one of {', '.join(MODELS)}")


def _run_cell(model, fs, period, split, X_train, y_train, X_test, y_test, test_start, opts) -> EvalReport:
    try:
        train = DesignMatrix(X_train, y_train, fs.resolved_ids)
        fitted, yhat, hyper = _fit_predict(model, train, X_test, **opts)
        r2 = r2_score(y_test, yhat)
        rmse = rmse_score(y_test, yhat)
    except (SeriesError, ValueError) as exc:
        return EvalReport(model, fs, period, split=split, error=str(exc))
    return EvalReport(
        model,
        fs,
        period,
        r2,
        rmse,
        split,
        WeeklySeries("prediction", test_start, yhat),
        WeeklySeries("actual", test_start, y_test),
        hyper,
        fitted,
    )


def _resolve_all(feature_sets, panel, clusters):
    resolved = []
    for fs in feature_sets:
        if isinstance(fs, FeatureSetSpec):
            resolved.append((fs, None))
            continue
        try:
            resolved.append((resolve_feature_set(fs, panel, clusters), None))
        except SeriesError as exc:
            label = fs if isinstance(fs, str) else "+".join(fs)
            resolved.append((FeatureSetSpec(label, ()), str(exc)))
    return resolved


def run_seasonal_eval(
    panel: Panel,
    season_boundaries: Sequence[WeekIndex],
    feature_sets: Sequence,
    models: Sequence[str] = MODELS,
    clusters: Optional[Sequence[Sequence[str]]] = None,
    train_count: int = 3,
    seed: int = 0,
    rf_hyper: Optional[ForestHyper] = None,
    rf_grid: Optional[dict] = None,
    cv_folds: int = 5,
    n_jobs: int = 1,
) -> list[EvalReport]:
    """Sliding-window evaluation: fit on ``train_count`` seasons, test on the next.

    Every series (cases and terms) is standardized within each season on its
    own. Returns one report per (test season, feature set, model), in that
    nesting order; failed cells carry ``error`` instead of metrics. Use
    :func:`summarize_reports` for the mean over test seasons.
    """
    if panel.cases is None:
        raise SeriesError("panel has no cases series")
    seasons = season_ranges(season_boundaries)
    if len(seasons) < train_count + 1:
        raise SeriesError(f"need at least {train_count + 1} seasons, got {len(seasons)}")
    for a, b in seasons:
        if a < panel.span[0] or b > panel.span[1]:
            raise SeriesError(f"season {a}..{b} outside panel span {panel.span[0]}..{panel.span[1]}")
    opts = dict(seed=seed, rf_hyper=rf_hyper, rf_grid=rf_grid, cv_folds=cv_folds, n_jobs=n_jobs)
    resolved = _resolve_all(feature_sets, panel, clusters)

    def season_block(ids, a, b):
        sub = panel.window(a, b)
        y = sub.cases.values
        y = _standardize_with(y, y, f"cases in season {a}..{b}")
        cols = []
        for i in ids:
            x = sub.term(i).values
            cols.append(_standardize_with(x, x, f"term {i!r} in season {a}..{b}"))
        return np.column_stack(cols), y

    reports = []
    for test_index in range(train_count, len(seasons)):
        plan = seasonal_split_plan(season_boundaries, train_count, test_index)
        for fs, fs_error in resolved:
            for model in models:
                period = plan.label()
                if fs_error is not None:
                    reports.append(EvalReport(model, fs, period, split=plan, error=fs_error))
                    continue
                try:
                    blocks = [season_block(fs.resolved_ids, a, b) for a, b in plan.train]
                    X_test, y_test = season_block(fs.resolved_ids, *plan.test)
                except SeriesError as exc:
                    reports.append(EvalReport(model, fs, period, split=plan, error=str(exc)))
                    continue
                X_train = np.vstack([blk[0] for blk in blocks])
                y_train = np.concatenate([blk[1] for blk in blocks])
                reports.append(
                    _run_cell(model, fs, period, plan, X_train, y_train, X_test, y_test, plan.test[0], opts)
                )
    return reports


def run_wave_eval(
    panel: Panel,
    search_range: tuple[WeekIndex, WeekIndex],
    feature_sets: Sequence,
    models: Sequence[str] = MODELS,
    clusters: Optional[Sequence[Sequence[str]]] = None,
    seed: int = 0,
    rf_hyper: Optional[ForestHyper] = None,
    rf_grid: Optional[dict] = None,
    cv_folds: int = 5,
    n_jobs: int = 1,
) -> list[EvalReport]:
    """Train on the first wave, test on the second.

    The split week is the case minimum inside ``search_range``. Each series is
    standardized with its training-wave mean and sd, applied to both waves.
    """
    if panel.cases is None:
        raise SeriesError("panel has no cases series")
    plan = wave_split_plan(panel.cases, search_range)
    (tr_a, tr_b), (te_a, te_b) = plan.train[0], plan.test
    n_train = tr_b - tr_a + 1
    start_off = tr_a - panel.span[0]
    opts = dict(seed=seed, rf_hyper=rf_hyper, rf_grid=rf_grid, cv_folds=cv_folds, n_jobs=n_jobs)

    def scaled(values, what):
        train = values[start_off : start_off + n_train]
        return _standardize_with(values, train, what)

    reports = []
    period = plan.label()
    for fs, fs_error in _resolve_all(feature_sets, panel, clusters):
        for model in models:
            if fs_error is not None:
                reports.append(EvalReport(model, fs, period, split=plan, error=fs_error))
                continue
            try:
                y = scaled(panel.cases.values, "cases in training wave")
                X = np.column_stack(
                    [scaled(panel.term(i).values, f"term {i!r} in training wave") for i in fs.resolved_ids]
                )
            except SeriesError as exc:
                reports.append(EvalReport(model, fs, period, split=plan, error=str(exc)))
                continue
            tr = slice(start_off, start_off + n_train)
            te = slice(start_off + n_train, None)
            reports.append(_run_cell(model, fs, period, plan, X[tr], y[tr], X[te], y[te], te_a, opts))
    return reports


def summarize_reports(reports: Sequence[EvalReport]) -> list[EvalReport]:
    """Mean R² and RMSE over test periods per (model, feature set).

    Cells with errors are skipped; a group with no successful cell yields an
    error row.
    """
    groups: dict[tuple[str, str], list[EvalReport]] = {}
    order = []
    for r in reports:
        key = (r.model, r.feature_set.name)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        cells = groups[key]
        good = [c for c in cells if c.ok]
        fs = cells[0].feature_set
        if not good:
            out.append(EvalReport(key[0], fs, "mean", error=cells[0].error))
            continue
        hypers = {c.hyper for c in good}
        out.append(
            EvalReport(
                key[0],
                fs,
                "mean",
                float(np.mean([c.r2 for c in good])),
                float(np.mean([c.rmse for c in good])),
                hyper=hypers.pop() if len(hypers) == 1 else None,
            )
        )
    return out


# --- synthetic benchmark -----------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the synthetic two-wave panel.

    ``wave_peaks`` are ``(week, height, width)`` Gaussian bumps for cases;
    ``media_peak`` is ``(week, height, rise_width, decay_weeks)``. Weeks are
    offsets from ``start``. ``noise_sd`` is on the 0-100 term scale.
    """

    seed: int = 0
    weeks: int = 104
    wave_peaks: tuple[tuple[float, float, float], ...] = ((22.0, 100.0, 5.0), (70.0, 80.0, 7.0))
    media_peak: tuple[float, float, float, float] = (14.0, 100.0, 1.5, 8.0)
    cluster_sizes: tuple[int, int, int] = (8, 8, 8)
    noise_sd: float = 5.0
    start: WeekIndex = WeekIndex(2009, 10)

    def __post_init__(self):
        if self.weeks < 52:
            raise SeriesError("synthetic panel needs at least 52 weeks")
        if len(self.cluster_sizes) != 3 or any(int(s) < 1 for s in self.cluster_sizes):
            raise SeriesError("cluster_sizes must be three positive counts")
        if self.noise_sd < 0:
            raise SeriesError("noise_sd must be nonnegative")
        if not self.wave_peaks:
            raise SeriesError("need at least one wave peak")
        for w, h, width in self.wave_peaks:
            if h <= 0 or width <= 0:
                raise SeriesError("wave heights and widths must be positive")
        _, mh, mw, md = self.media_peak
        if mh <= 0 or mw <= 0 or md <= 0:
            raise SeriesError("media peak height, width and decay must be positive")

    def default_search_range(self) -> tuple[WeekIndex, WeekIndex]:
        """Weeks between the first two case peaks, for the wave split."""
        peaks = sorted(p[0] for p in self.wave_peaks)
        if len(peaks) < 2:
            raise SeriesError("wave split needs two wave peaks")
        return (self.start + int(math.ceil(peaks[0])), self.start + int(math.floor(peaks[1])))


@dataclass(frozen=True)
class SynthPanel:
    panel: Panel
    labels: dict[str, int]
    spec: SynthSpec


def _smooth_noise(rng: np.random.Generator, n: int, width: float = 4.0) -> np.ndarray:
    kernel = np.exp(-0.5 * (np.arange(-12, 13) / width) ** 2)
    raw = rng.standard_normal(n + len(kernel) - 1)
    return np.convolve(raw, kernel / kernel.sum(), mode="valid")


def _to_0_100(x: np.ndarray) -> np.ndarray:
    return (x - x.min()) / (x.max() - x.min()) * 100.0


def generate_synthetic(spec: SynthSpec = SynthSpec()) -> SynthPanel:
    """Three-cluster panel with known membership.

    Cases are a sum of Gaussian waves; media is a sharp early bump with
    exponential decay; cluster 1 terms follow cases, cluster 2 follow media,
    cluster 3 follow an unrelated smooth curve. Each term is an affine copy of
    its driver plus Gaussian noise, then rescaled to 0-100.
    """
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.weeks, dtype=float)
    cases = np.zeros(spec.weeks)
    for week, height, width in spec.wave_peaks:
        cases += height * np.exp(-0.5 * ((t - week) / width) ** 2)
    cases += 0.5  # keeps the trough strictly positive
    mw, mh, rise, decay = spec.media_peak
    media = np.where(t <= mw, mh * np.exp(-0.5 * ((t - mw) / rise) ** 2), mh * np.exp(-(t - mw) / decay))
    media += 0.5
    background = _to_0_100(_smooth_noise(rng, spec.weeks, width=6.0))
    drivers = (_to_0_100(cases), _to_0_100(media), background)
    terms, labels = [], {}
    for cluster, (size, driver) in enumerate(zip(spec.cluster_sizes, drivers), start=1):
        for k in range(int(size)):
            gain = rng.uniform(0.5, 1.5)
            offset = rng.uniform(0.0, 20.0)
            noisy = gain * driver + offset + spec.noise_sd * rng.standard_normal(spec.weeks)
            tid = f"c{cluster}_term{k:02d}"
            terms.append(rescale_0_100(WeeklySeries(tid, spec.start, noisy)))
            labels[tid] = cluster
    panel = Panel(
        tuple(terms),
        WeeklySeries("media", spec.start, media),
        WeeklySeries("cases", spec.start, cases),
    )
    return SynthPanel(panel, labels, spec)
