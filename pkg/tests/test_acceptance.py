"""Acceptance suite: one recorded pass/fail line per criterion.

Tolerances and seed counts are pinned here; the summary block printed at the
end of the pytest run lists every criterion with its measured values.
"""
import csv
import json
import math
import re
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from oracles import brute_force_ward, t_two_sided_quad
from searchcast.cli import main
from searchcast.clustering import cluster_panel, cluster_profiles, euclidean_distances, ward_linkage
from searchcast.evaluation import SynthSpec, generate_synthetic, run_wave_eval
from searchcast.models import DesignMatrix, ForestHyper, _r2, forest_fit, ols_fit
from searchcast.stats import chi2_upper_p, cluster_driver_report, correlate, granger_test, select_lag
from searchcast.timeseries import Panel, WeekIndex, WeeklySeries
from simdata import lead_lag_pair, null_pair

README = Path(__file__).resolve().parents[1] / "README.md"

WARD_TOL = 1e-9
HAND_TOL = 1e-12
T_TOL = 1e-8
NULL_BAND = (0.05, 0.15)
NULL_SIMS, NULL_WEEKS = 1000, 78
LEADLAG_SEEDS, LEADLAG_WEEKS = 100, 200
OLS_TOL = 1e-8
SINE_R2 = 0.95
CLAIM_SEEDS, CLAIM_MIN_WINS = 10, 8
CLAIM_GRID = {"n_estimators": [50], "max_features": [0.6, "sqrt"], "max_depth": [2, 4]}


def _panel(rows):
    start = WeekIndex(2009, 10)
    return Panel(tuple(WeeklySeries(f"t{i:02d}", start, r) for i, r in enumerate(rows)))


def test_1_ward_matches_brute_force(criterion):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst, order_ok = 0.0, True
    for _ in range(100):
        n = int(rng.integers(2, 13))
        pts = rng.uniform(0, 100, size=(n, int(rng.integers(1, 30))))
        steps = ward_linkage(euclidean_distances(_panel(list(pts)))).steps
        for st, (a, b, h, size) in zip(steps, brute_force_ward(pts)):
            order_ok &= (st.left, st.right, st.size) == (a, b, size)
            worst = max(worst, abs(st.height - h))
    elapsed = time.perf_counter() - t0
    ok = order_ok and worst <= WARD_TOL and elapsed < 10
    criterion(1, "Ward vs O(n^3) oracle, 100 panels", ok,
              f"merge order {'identical' if order_ok else 'DIFFERS'}, max |dh| {worst:.2e} (tol {WARD_TOL}), {elapsed:.2f}s (<10s)")


def test_2_hand_checked_heights(criterion):
    steps = ward_linkage(euclidean_distances(_panel([[0.0], [2.0], [10.0]]))).steps
    d1, d2 = abs(steps[0].height - 2.0), abs(steps[1].height - math.sqrt(108))
    ok = d1 <= HAND_TOL and d2 <= HAND_TOL and (steps[0].left, steps[0].right) == (0, 1)
    criterion(2, "{0,2,10} merge heights 2 and sqrt(108)", ok,
              f"heights {steps[0].height!r}, {steps[1].height!r}; errors {d1:.1e}, {d2:.1e} (tol {HAND_TOL})")


def test_3a_correlation_p_values(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(50):
        n = int(rng.integers(5, 120))
        x = rng.normal(size=n)
        y = (k / 50) * x + rng.normal(size=n)
        res = correlate(x, y)
        t = res.r * math.sqrt((n - 2) / (1 - res.r**2))
        worst = max(worst, abs(res.p_value - t_two_sided_quad(t, n - 2)))
    criterion(3, "(a) correlate p vs quadrature t-CDF, 50 points", worst <= T_TOL,
              f"max |dp| {worst:.2e} (tol {T_TOL})")


def test_3b_granger_null_calibration(criterion):
    t0 = time.perf_counter()
    rejections = 0
    for seed in range(NULL_SIMS):
        y, x = null_pair(seed, weeks=NULL_WEEKS)
        rejections += granger_test(y, x, select_lag(y, x)).p_value < 0.05
    elapsed = time.perf_counter() - t0
    rate = rejections / NULL_SIMS
    ok = NULL_BAND[0] <= rate <= NULL_BAND[1] and elapsed < 60
    criterion(3, "(b) Granger null rejection rate at 5%", ok,
              f"{rejections}/{NULL_SIMS} = {rate:.1%} (band {NULL_BAND[0]:.0%}-{NULL_BAND[1]:.0%}), "
              f"{NULL_WEEKS}-week AR(1) pairs, lag by BIC, {elapsed:.1f}s (<60s)")


def test_4_granger_power_and_direction(criterion):
    forward = reverse = lag2 = 0
    for seed in range(LEADLAG_SEEDS):
        y, x = lead_lag_pair(seed, weeks=LEADLAG_WEEKS)
        lag = select_lag(y, x)
        lag2 += lag == 2
        forward += granger_test(y, x, lag).p_value < 0.01
        reverse += granger_test(x, y, select_lag(x, y)).p_value > 0.05
    ok = forward >= 90 and reverse >= 90 and lag2 >= 95
    criterion(4, "lead-lag benchmark, 100 seeds", ok,
              f"forward p<0.01 in {forward} (>=90), reverse p>0.05 in {reverse} (>=90), lag 2 chosen in {lag2} (>=95)")


def _f_tail(g, order, den=60):
    return float(special.fdtrc(order, den, g))


# (order, G, reported p) rows of the published Granger table; the order-45 row is a typo and skipped
PUBLISHED_ROWS = [
    (2, 1.95, 0.15), (4, 1.94, 0.11), (3, 0.52, 0.67), (4, 11.95, 3e-7), (2, 1.91, 0.16),
    (1, 0.03, 0.86), (1, 0.15, 0.70), (1, 0.95, 0.34), (1, 0.03, 0.86), (2, 0.76, 0.48), (1, 0.79, 0.38),
]


def test_5_published_granger_scaling(criterion):
    p = chi2_upper_p(11.95, 4)
    ratio = p / 3e-7
    consistent = 0.1 <= ratio <= 10
    # which tail reproduces the published p column? score each on log scale
    log_err = lambda a, b: abs(math.log10(a) - math.log10(b))
    chi_err = max(log_err(chi2_upper_p(g, L), pv) for L, g, pv in PUBLISHED_ROWS)
    f_err = max(log_err(_f_tail(g, L), pv) for L, g, pv in PUBLISHED_ROWS)
    text = README.read_text(encoding="utf-8") if README.exists() else ""
    documented = "0.0177" in text and "F statistic" in text
    ok = consistent or documented
    verdict = "within one order of magnitude" if consistent else (
        "NOT within one order of magnitude; deviation documented in README" if documented
        else "NOT within one order of magnitude and NOT documented")
    criterion(5, "chi2(4) tail at G=11.95 vs published 3e-7", ok,
              f"tail {p:.4g}, ratio {ratio:.3g}: {verdict}; over the 11 table rows the F(L,60) tail is within "
              f"{f_err:.2f} decades of the printed p, chi2(L) within {chi_err:.2f}")


def test_6a_ols_planted(criterion):
    rng = np.random.default_rng(6)
    beta = rng.normal(size=5)
    A = rng.normal(size=(60, 5))
    m = ols_fit(DesignMatrix(A, 1.25 + A @ beta))
    err = max(float(np.max(np.abs(m.coefficients - beta))), abs(m.intercept - 1.25))
    criterion(6, "(a) OLS recovers planted coefficients", err <= OLS_TOL, f"max error {err:.1e} (tol {OLS_TOL})")


def test_6b_forest_sine(criterion):
    x = np.linspace(0, 2 * np.pi, 200)
    X = DesignMatrix(x, np.sin(x))
    r2 = _r2(X.target, forest_fit(X, ForestHyper(500, "all", 6), seed=0).predict(X))
    criterion(6, "(b) forest training R^2 on seeded sine", r2 > SINE_R2, f"R^2 {r2:.5f} (>{SINE_R2}), 500 trees, depth 6")


def test_6c_forest_thread_independence(criterion):
    rng = np.random.default_rng(66)
    X = DesignMatrix(rng.normal(size=(80, 6)), rng.normal(size=80))
    hyper = ForestHyper(64, "sqrt", 5)
    probe = rng.normal(size=(200, 6))
    outs = {j: forest_fit(X, hyper, seed=11, n_jobs=j).predict(probe).tobytes() for j in (1, 4, 8)}
    ok = outs[1] == outs[4] == outs[8]
    criterion(6, "(c) forest bit-identical for 1/4/8 threads", ok,
              "identical bytes" if ok else "predictions differ between thread counts")


def _claim_run(seed):
    synth = generate_synthetic(SynthSpec(seed=seed))
    _, clusters = cluster_panel(synth.panel, 3)
    report = cluster_driver_report(synth.panel, cluster_profiles(synth.panel, clusters), granger=False)
    disease, media = report.disease_cluster, report.media_cluster
    sets = [f"cluster:{disease}", f"cluster:{media}", "all"]
    reports = run_wave_eval(
        synth.panel, synth.spec.default_search_range(), sets, ["linreg", "rf"], clusters,
        seed=seed, rf_grid=CLAIM_GRID,
    )
    r2 = {(r.model, r.feature_set.name): r.r2 for r in reports}
    return {m: r2[(m, sets[0])] > max(r2[(m, sets[1])], r2[(m, sets[2])]) for m in ("linreg", "rf")}, r2, sets


def test_7_disease_cluster_beats_media_and_all(criterion):
    t0 = time.perf_counter()
    wins = {"linreg": 0, "rf": 0}
    medians = {"linreg": [], "rf": []}
    for seed in range(CLAIM_SEEDS):
        won, r2, sets = _claim_run(seed)
        for m in wins:
            wins[m] += won[m]
            medians[m].append(r2[(m, sets[0])])
    elapsed = time.perf_counter() - t0
    ok = all(w >= CLAIM_MIN_WINS for w in wins.values()) and elapsed < 120
    med = ", ".join(f"{m} median disease R^2 {np.median(v):.3f}" for m, v in medians.items())
    criterion(7, "disease cluster beats media cluster and all terms (wave split)", ok,
              f"linreg {wins['linreg']}/10, rf {wins['rf']}/10 (need >={CLAIM_MIN_WINS}); {med}; {elapsed:.1f}s (<120s)")


def _pipeline(root: Path) -> dict[str, bytes]:
    data = root / "data"
    assert main(["synth", "--seed", "5", "--out", str(data)]) == 0
    cfg = json.loads((data / "config.json").read_text())
    cfg["rf_grid"] = CLAIM_GRID
    cfg["feature_sets"] = ["cluster:1", "cluster:2", "cluster:3", "all"]
    (data / "config.json").write_text(json.dumps(cfg))
    for cmd in ("cluster", "correlate", "granger", "nowcast"):
        assert main([cmd, "--config", str(data / "config.json")]) == 0
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_8_pipeline_determinism(criterion, tmp_path):
    first = _pipeline(tmp_path / "run1")
    second = _pipeline(tmp_path / "run2")
    same = first.keys() == second.keys() and all(first[k] == second[k] for k in first)
    diff = sorted(k for k in first if first.get(k) != second.get(k))
    criterion(8, "synth->cluster->correlate->granger->nowcast byte-identical twice", same,
              f"{len(first)} files identical" if same else f"differing: {diff[:5]}")


def test_9_table_layout(criterion, tmp_path):
    data = tmp_path / "d"
    assert main(["synth", "--seed", "2", "--out", str(data)]) == 0
    cfg = str(data / "config.json")
    assert main(["cluster", "--config", cfg]) == 0
    sets = ["cluster:1", "cluster:2", "cluster:3", "all"]
    assert main(["nowcast", "--config", cfg, "--feature-sets", ",".join(sets), "--rf-hyper", "50,sqrt,4"]) == 0
    with open(data / "eval_table.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
        header = list(rows[0].keys()) if rows else []
    want = ["feature_set"] + [f"{m}_{k}" for m in ("linreg", "rf") for k in ("r2", "rmse", "one_minus_r2")]
    problems = []
    if header != want:
        problems.append(f"header {header}")
    if [r["feature_set"] for r in rows] != sets:
        problems.append(f"rows {[r['feature_set'] for r in rows]}")
    for r in rows:
        for m in ("linreg", "rf"):
            r2, rmse, omr = (float(r[f"{m}_{k}"]) for k in ("r2", "rmse", "one_minus_r2"))
            if not (r2 <= 1 and rmse >= 0 and abs(omr - (1 - r2)) < 1e-12):
                problems.append(f"{r['feature_set']}/{m} values")
    criterion(9, "eval_table: feature set x model x {R^2, RMSE, 1-R^2}", not problems,
              f"{len(rows)} rows x {len(header)} columns match the results-table layout"
              if not problems else "; ".join(problems))
