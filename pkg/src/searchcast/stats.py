"""Correlation with significance stars, lag selection and Granger tests."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .clustering import ClusterProfile
from .timeseries import Panel, SeriesError, WeeklySeries, diff1

__all__ = [
    "CorrelationResult",
    "GrangerResult",
    "DriverRow",
    "DriverReport",
    "t_two_sided_p",
    "chi2_upper_p",
    "significance_stars",
    "correlate",
    "select_lag",
    "granger_test",
    "cluster_driver_report",
    "REPORT_COLUMNS",
]


def t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided p-value of a Student-t statistic."""
    if math.isinf(t):
        return 0.0
    return float(special.betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def chi2_upper_p(g: float, dof: float) -> float:
    """Upper-tail probability of a chi-squared statistic."""
    if math.isinf(g):
        return 0.0
    return float(min(1.0, max(0.0, special.gammaincc(dof / 2.0, max(g, 0.0) / 2.0))))


def significance_stars(p: float) -> str:
    """``"**"`` below 0.001, ``"*"`` in [0.001, 0.05), else ``"ns"``."""
    if p < 0.001:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int
    stars: str


@dataclass(frozen=True)
class GrangerResult:
    order: int
    g_statistic: float
    p_value: float
    direction: tuple[str, str]
    n_eff: int
    rss_restricted: float
    rss_unrestricted: float

    @property
    def f_dof(self) -> tuple[int, int]:
        return self.order, self.n_eff - (2 * self.order + 1)

    def f_statistic(self) -> float:
        """Wald F form, as reported by F-based Granger tools."""
        num, den = self.f_dof
        if self.rss_unrestricted == 0:
            return math.inf
        return ((self.rss_restricted - self.rss_unrestricted) / num) / (self.rss_unrestricted / den)

    def f_p_value(self) -> float:
        f = self.f_statistic()
        if math.isinf(f):
            return 0.0
        num, den = self.f_dof
        return float(special.fdtrc(num, den, max(f, 0.0)))


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, WeeklySeries) else np.asarray(s, dtype=float)


def correlate(x, y) -> CorrelationResult:
    """Pearson r with a two-sided t-test p-value (n - 2 degrees of freedom)."""
    a, b = _values(x), _values(y)
    if len(a) != len(b):
        raise SeriesError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 3:
        raise SeriesError("correlate needs at least 3 points")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(float(da @ da)), math.sqrt(float(db @ db))
    if sa == 0 or sb == 0 or np.ptp(a) == 0 or np.ptp(b) == 0:
        raise SeriesError("zero variance")
    r = float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = t_two_sided_p(t, n - 2)
    return CorrelationResult(r, p, n, significance_stars(p))


def _lagged_design(target: np.ndarray, source: Optional[np.ndarray], order: int, skip: int):
    """Rows ``t = skip..n-1`` regressing target(t) on intercept and lags 1..order."""
    n = len(target)
    cols = [np.ones(n - skip)]
    cols += [target[skip - k : n - k] for k in range(1, order + 1)]
    if source is not None:
        cols += [source[skip - k : n - k] for k in range(1, order + 1)]
    return np.column_stack(cols), target[skip:]


def _rss(X: np.ndarray, y: np.ndarray) -> float:
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SeriesError("collinear lags")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return float(resid @ resid)


_PENALTY = {
    "aic": lambda n: 2.0,
    "bic": lambda n: math.log(n),
    "hq": lambda n: 2.0 * math.log(math.log(n)),
}


def select_lag(target, source, max_lag: int = 4, criterion: str = "bic") -> int:
    """Pick the lag order of the bivariate lagged regression.

    Fits target(t) on an intercept plus ``L`` lags of both series for
    ``L = 1..max_lag`` on a common sample (the first ``max_lag`` weeks are
    dropped for every candidate) and returns the ``L`` minimising
    ``n*ln(RSS/n) + penalty*(2L + 1)``. Ties go to the smaller ``L``.

    ``criterion`` is ``"bic"`` (Schwarz, default), ``"aic"`` or ``"hq"``.
    Inputs are expected to be differenced already.
    """
    y_all, x_all = _values(target), _values(source)
    if len(y_all) != len(x_all):
        raise SeriesError(f"length mismatch: {len(y_all)} vs {len(x_all)}")
    if max_lag < 1:
        raise SeriesError("max_lag must be at least 1")
    if len(y_all) < max_lag + 8:
        raise SeriesError(f"series too short for max_lag={max_lag}: need {max_lag + 8} weeks")
    try:
        penalty = _PENALTY[criterion]
    except KeyError:
        raise SeriesError(f"unknown criterion {criterion!r}") from None
    best, best_lag = np.inf, 1
    for lag in range(1, max_lag + 1):
        X, y = _lagged_design(y_all, x_all, lag, max_lag)
        n_eff = len(y)
        rss = max(_rss(X, y), np.finfo(float).tiny)
        score = n_eff * math.log(rss / n_eff) + penalty(n_eff) * (2 * lag + 1)
        if score < best:
            best, best_lag = score, lag
    return best_lag


def granger_test(target, source, order: int) -> GrangerResult:
    """Likelihood-ratio Granger test of ``source`` preceding ``target``.

    Both regressions include an intercept and share the sample left after
    dropping the first ``order`` weeks. ``G = n_eff * ln(RSS_r / RSS_u)``,
    compared against chi-squared with ``order`` degrees of freedom.
    """
    y_all, x_all = _values(target), _values(source)
    if len(y_all) != len(x_all):
        raise SeriesError(f"length mismatch: {len(y_all)} vs {len(x_all)}")
    if not 1 <= order <= 4:
        raise SeriesError(f"order must be in 1..4, got {order}")
    if len(y_all) <= 3 * order + 2:
        raise SeriesError(f"series too short for order {order}")
    Xr, y = _lagged_design(y_all, None, order, order)
    Xu, _ = _lagged_design(y_all, x_all, order, order)
    rss_r, rss_u = _rss(Xr, y), _rss(Xu, y)
    n_eff = len(y)
    if rss_u <= 0.0:
        g = math.inf if rss_r > 0 else 0.0
    elif rss_r <= 0.0:
        g = 0.0
    else:
        g = max(0.0, n_eff * math.log(rss_r / rss_u))
    name = lambda s, default: s.id if isinstance(s, WeeklySeries) else default
    return GrangerResult(
        order,
        g,
        chi2_upper_p(g, order),
        (name(source, "source"), name(target, "target")),
        n_eff,
        rss_r,
        rss_u,
    )


REPORT_COLUMNS = ("cluster", "vs", "r", "p", "stars", "granger_order", "G", "granger_p", "selected")


@dataclass(frozen=True)
class DriverRow:
    cluster: int
    vs: str
    correlation: CorrelationResult
    granger: Optional[GrangerResult] = None
    selected: bool = False

    def as_record(self) -> dict:
        g = self.granger
        return {
            "cluster": self.cluster,
            "vs": self.vs,
            "r": self.correlation.r,
            "p": self.correlation.p_value,
            "stars": self.correlation.stars,
            "granger_order": None if g is None else g.order,
            "G": None if g is None else g.g_statistic,
            "granger_p": None if g is None else g.p_value,
            "selected": self.selected,
        }


@dataclass(frozen=True)
class DriverReport:
    rows: tuple[DriverRow, ...]
    disease_cluster: Optional[int]
    media_cluster: Optional[int]

    def records(self) -> list[dict]:
        return [r.as_record() for r in self.rows]

    def granger_details(self) -> list[dict]:
        return [
            {
                "cluster": r.cluster,
                "vs": r.vs,
                **asdict(r.granger),
                "F": r.granger.f_statistic(),
                "F_p": r.granger.f_p_value(),
            }
            for r in self.rows
            if r.granger is not None
        ]


def _argmax_lowest(scores: dict[int, float]) -> int:
    best = max(scores.values())
    return min(c for c, v in scores.items() if v == best)


def cluster_driver_report(
    panel: Panel,
    profiles: Sequence[ClusterProfile],
    roles: Sequence[str] = ("cases", "media"),
    granger: bool = True,
    max_lag: int = 4,
    criterion: str = "bic",
) -> DriverReport:
    """Correlate every centroid with cases and media and run Granger tests.

    Granger inputs are first differenced; the order per test comes from
    :func:`select_lag`. The disease cluster maximises r against cases
    (lowest cluster id on ties); the media cluster likewise against media.
    """
    drivers = {}
    for role in roles:
        series = getattr(panel, role, None) if role in ("cases", "media") else None
        if role not in ("cases", "media"):
            raise SeriesError(f"unknown role {role!r}")
        if series is None:
            raise SeriesError(f"panel has no {role} series")
        drivers[role] = series
    r_by_role: dict[str, dict[int, float]] = {role: {} for role in drivers}
    pending = []
    for prof in sorted(profiles, key=lambda p: p.cluster_id):
        for role, series in drivers.items():
            corr = correlate(prof.centroid, series)
            r_by_role[role][prof.cluster_id] = corr.r
            g = None
            if granger:
                tgt, src = diff1(prof.centroid), diff1(series)
                lag = select_lag(tgt, src, max_lag=max_lag, criterion=criterion)
                g = granger_test(tgt, src, lag)
            pending.append((prof.cluster_id, role, corr, g))
    disease = _argmax_lowest(r_by_role["cases"]) if "cases" in r_by_role else None
    media = _argmax_lowest(r_by_role["media"]) if "media" in r_by_role else None
    rows = tuple(
        DriverRow(cid, role, corr, g, selected=(role == "cases" and cid == disease))
        for cid, role, corr, g in pending
    )
    return DriverReport(rows, disease, media)
