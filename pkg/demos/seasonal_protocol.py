"""
Sliding-window seasons
======================

Three seasons train, the next one tests, then the window moves on.
Each series is standardized within each season.
"""

import numpy as np
from searchcast import Panel, WeekIndex, WeeklySeries, run_seasonal_eval, summarize_reports

rng = np.random.default_rng(0)
start = WeekIndex(2010, 40)
weeks = 52 * 6
t = np.arange(weeks)
cases = 30 + 25 * np.sin(2 * np.pi * t / 52) ** 2 + rng.normal(0, 2, weeks)
terms = (
    WeeklySeries("fever", start, 0.8 * cases + rng.normal(0, 3, weeks)),
    WeeklySeries("cough", start, 0.5 * cases + rng.normal(0, 5, weeks)),
    WeeklySeries("holiday", start, 50 + 20 * np.cos(2 * np.pi * t / 52) + rng.normal(0, 3, weeks)),
)
panel = Panel(terms, cases=WeeklySeries("cases", start, cases))

# k seasons need k + 1 boundaries
bounds = [start + 52 * i for i in range(7)]
reports = run_seasonal_eval(panel, bounds, ["fever+cough", "holiday"], ["linreg"])
for r in reports + summarize_reports(reports):
    print(f"{r.period:22s} {r.feature_set.name:12s} R^2 {r.r2:+.3f} 1-R^2 {r.one_minus_r2:.3f} RMSE {r.rmse:.3f}")
