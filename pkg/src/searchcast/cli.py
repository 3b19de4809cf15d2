"""Command-line entry point: ``searchcast {synth,cluster,correlate,granger,nowcast}``.

Exit codes: 0 success (failed nowcast cells become error rows), 1 every
nowcast cell failed, 2 bad configuration or input. Outputs are assembled in
memory and only written once every computation has succeeded.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Optional

from . import io as sio
from .clustering import cluster_profiles, cut_dendrogram, euclidean_distances, ward_linkage
from .evaluation import (
    REPORT_COLUMNS as EVAL_COLUMNS,
    SynthSpec,
    generate_synthetic,
    run_seasonal_eval,
    run_wave_eval,
    summarize_reports,
)
from .models import ForestHyper, ModelError, PAPER_GRID
from .stats import REPORT_COLUMNS as DRIVER_COLUMNS, cluster_driver_report
from .timeseries import Panel, SeriesError, WeekIndex, align_panel, rescale_0_100

DEFAULTS = {
    "terms": None,
    "media": None,
    "cases": None,
    "clusters": None,
    "cluster_k": 3,
    "clustering_range": None,
    "protocol": None,
    "season_boundaries": None,
    "wave_search_range": None,
    "models": ["linreg", "rf"],
    "feature_sets": None,
    "seed": 0,
    "out": "out",
    "rf_hyper": None,
    "rf_grid": "paper",
    "cv_folds": 5,
    "n_jobs": 1,
    "week_format": "iso",
    "max_lag": 4,
    "lag_criterion": "bic",
}


class ConfigError(ValueError):
    pass


# --- configuration -----------------------------------------------------------


def _week_range(value) -> Optional[tuple[WeekIndex, WeekIndex]]:
    if value is None:
        return None
    parts = value.split(":") if isinstance(value, str) else list(value)
    if len(parts) != 2:
        raise ConfigError(f"week range must be FIRST:LAST, got {value!r}")
    try:
        return WeekIndex.parse(str(parts[0])), WeekIndex.parse(str(parts[1]))
    except SeriesError as exc:
        raise ConfigError(str(exc)) from None


def _split_list(value):
    if value is None or isinstance(value, list):
        return value
    return [v.strip() for v in str(value).split(",") if v.strip()]


def load_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    base = Path.cwd()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
        base = path.parent
        for key in ("terms", "media", "cases", "clusters", "out"):
            if data.get(key) is not None:
                data[key] = str((base / data[key]).resolve()) if not Path(data[key]).is_absolute() else data[key]
        cfg.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["models"] = _split_list(cfg["models"])
    cfg["feature_sets"] = _split_list(cfg["feature_sets"])
    cfg["season_boundaries"] = _split_list(cfg["season_boundaries"])
    try:
        cfg["cluster_k"] = int(cfg["cluster_k"])
        cfg["seed"] = int(cfg["seed"])
        cfg["cv_folds"] = int(cfg["cv_folds"])
        cfg["n_jobs"] = int(cfg["n_jobs"])
        cfg["max_lag"] = int(cfg["max_lag"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad numeric option ({exc})") from None
    if cfg["cluster_k"] < 1:
        raise ConfigError("cluster_k must be at least 1")
    for m in cfg["models"]:
        if m not in ("linreg", "rf"):
            raise ConfigError(f"unknown model {m!r}; expected linreg or rf")
    if cfg["week_format"] not in sio.WEEK_FORMATS:
        raise ConfigError(f"week_format must be one of {', '.join(sio.WEEK_FORMATS)}")
    cfg["clustering_range"] = _week_range(cfg["clustering_range"])
    cfg["wave_search_range"] = _week_range(cfg["wave_search_range"])
    if cfg["season_boundaries"] is not None:
        try:
            cfg["season_boundaries"] = [WeekIndex.parse(str(w)) for w in cfg["season_boundaries"]]
        except SeriesError as exc:
            raise ConfigError(str(exc)) from None
    cfg["rf_hyper"] = _parse_hyper(cfg["rf_hyper"])
    cfg["rf_grid"] = _parse_grid(cfg["rf_grid"])
    cfg["out"] = Path(cfg["out"])
    return cfg


def _parse_hyper(value) -> Optional[ForestHyper]:
    if value is None or isinstance(value, ForestHyper):
        return value
    if isinstance(value, str):
        parts = value.split(",")
        if len(parts) != 3:
            raise ConfigError("--rf-hyper must be N_ESTIMATORS,MAX_FEATURES,MAX_DEPTH")
        value = dict(zip(("n_estimators", "max_features", "max_depth"), parts))
    try:
        mf = value.get("max_features", "all")
        if isinstance(mf, str) and mf not in ("all", "sqrt", "auto"):
            mf = float(mf)
        depth = value.get("max_depth")
        depth = None if depth in (None, "", "none", "None") else int(depth)
        return ForestHyper(int(value["n_estimators"]), mf, depth)
    except (KeyError, TypeError, ValueError, ModelError) as exc:
        raise ConfigError(f"bad rf_hyper ({exc})") from None


def _parse_grid(value) -> dict:
    if value in (None, "paper"):
        return PAPER_GRID
    if isinstance(value, str):
        raise ConfigError(f"rf_grid must be 'paper' or an object, got {value!r}")
    try:
        grid = {k: list(value[k]) for k in ("n_estimators", "max_features", "max_depth")}
        for mf in grid["max_features"]:
            ForestHyper(1, mf, None)
    except (KeyError, TypeError, ModelError) as exc:
        raise ConfigError(f"bad rf_grid ({exc})") from None
    return grid


def _require(cfg: dict, *keys):
    for key in keys:
        if cfg.get(key) in (None, []):
            raise ConfigError(f"missing required option {key!r} (flag --{key.replace('_', '-')})")


def load_panel(cfg: dict, need_terms: bool = True) -> Panel:
    fmt = cfg["week_format"]
    terms = sio.parse_terms_csv(cfg["terms"], fmt) if need_terms else []
    media = sio.parse_role_csv(cfg["media"], fmt) if cfg.get("media") else None
    cases = sio.parse_role_csv(cfg["cases"], fmt) if cfg.get("cases") else None
    if media is not None:
        media = media.with_values(media.values, id="media")
    if cases is not None:
        cases = cases.with_values(cases.values, id="cases")
    return align_panel(terms, media, cases)


def _clustering_panel(panel: Panel, cfg: dict) -> tuple[Panel, list[str]]:
    """Window to the clustering range and rescale every term to 0-100."""
    rng = cfg["clustering_range"] or panel.span
    try:
        sub = panel.window(*rng)
    except SeriesError as exc:
        raise ConfigError(f"clustering range: {exc}") from None
    scaled = [rescale_0_100(t) for t in sub.terms]
    degenerate = [t.id for t in scaled if t.degenerate]
    return Panel(tuple(scaled), sub.media, sub.cases, sub.span), degenerate


def _clusters_path(cfg: dict) -> Path:
    return Path(cfg["clusters"]) if cfg.get("clusters") else cfg["out"] / "clusters.json"


def _write_all(out: Path, files: dict[str, str]):
    for rel, text in files.items():
        target = out / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")


# --- commands ----------------------------------------------------------------


def cmd_synth(cfg: dict, args) -> int:
    try:
        sizes = tuple(int(s) for s in str(args.cluster_sizes).split(","))
        spec = SynthSpec(
            seed=cfg["seed"],
            weeks=int(args.weeks),
            cluster_sizes=sizes,
            noise_sd=float(args.noise_sd),
            start=WeekIndex.parse(args.start),
        )
    except (ValueError, SeriesError) as exc:
        raise ConfigError(f"invalid synth option: {exc}") from None
    synth = generate_synthetic(spec)
    p = synth.panel
    search = spec.default_search_range()
    files = {
        "terms.csv": sio.terms_csv_text(list(p.terms)),
        "media.csv": sio.terms_csv_text([p.media]),
        "cases.csv": sio.terms_csv_text([p.cases]),
        "truth.json": sio.dumps(
            {
                "seed": spec.seed,
                "labels": synth.labels,
                "wave_search_range": [str(search[0]), str(search[1])],
                "spec": {
                    "weeks": spec.weeks,
                    "wave_peaks": spec.wave_peaks,
                    "media_peak": spec.media_peak,
                    "cluster_sizes": spec.cluster_sizes,
                    "noise_sd": spec.noise_sd,
                    "start": str(spec.start),
                },
            }
        ),
        "config.json": sio.dumps(
            {
                "terms": "terms.csv",
                "media": "media.csv",
                "cases": "cases.csv",
                "cluster_k": 3,
                "protocol": "wave",
                "wave_search_range": f"{search[0]}:{search[1]}",
                "seed": spec.seed,
                "out": ".",
            }
        ),
    }
    _write_all(cfg["out"], files)
    print(f"wrote synthetic panel ({len(p.terms)} terms, {p.n_weeks} weeks) to {cfg['out']}")
    return 0


def cmd_cluster(cfg: dict, args) -> int:
    _require(cfg, "terms")
    panel, degenerate = _clustering_panel(load_panel(cfg), cfg)
    for tid in degenerate:
        print(f"warning: term {tid!r} is constant over the clustering range (rescaled to zeros)", file=sys.stderr)
    if cfg["cluster_k"] > len(panel.terms):
        raise ConfigError(f"cluster_k={cfg['cluster_k']} exceeds the {len(panel.terms)} terms")
    dendro = ward_linkage(euclidean_distances(panel))
    clusters = cut_dendrogram(dendro, cfg["cluster_k"])
    profiles = cluster_profiles(panel, clusters)
    files = {
        "dendrogram.json": sio.dendrogram_json_text(dendro),
        "dendrogram.nwk": dendro.to_newick() + "\n",
        "clusters.json": sio.clusters_json_text(clusters, panel.span, degenerate),
        "centroids.csv": sio.centroids_csv_text(profiles),
    }
    _write_all(cfg["out"], files)
    sizes = ", ".join(str(len(c)) for c in clusters)
    print(f"{len(clusters)} clusters (sizes {sizes}) written to {cfg['out']}")
    return 0


def _driver(cfg: dict, granger: bool) -> int:
    _require(cfg, "terms")
    clusters, rng = sio.load_clusters_json(_clusters_path(cfg))
    cfg = dict(cfg, clustering_range=cfg["clustering_range"] or rng)
    panel, _ = _clustering_panel(load_panel(cfg), cfg)
    roles = [r for r in ("cases", "media") if getattr(panel, r) is not None]
    for missing in sorted({"cases", "media"} - set(roles)):
        print(f"warning: no {missing} series given; {missing} rows omitted", file=sys.stderr)
    if not roles:
        raise ConfigError("need at least one of --cases or --media")
    profiles = cluster_profiles(panel, clusters)
    report = cluster_driver_report(
        panel, profiles, roles, granger=granger, max_lag=cfg["max_lag"], criterion=cfg["lag_criterion"]
    )
    files = {
        "driver_report.csv": sio.records_csv_text(report.records(), DRIVER_COLUMNS),
        "driver_report.json": sio.dumps(
            {
                "disease_cluster": report.disease_cluster,
                "media_cluster": report.media_cluster,
                "rows": report.records(),
                "granger": report.granger_details(),
            }
        ),
    }
    _write_all(cfg["out"], files)
    if report.disease_cluster is not None:
        print(f"disease cluster: {report.disease_cluster}")
    return 0


def cmd_correlate(cfg: dict, args) -> int:
    return _driver(cfg, granger=False)


def cmd_granger(cfg: dict, args) -> int:
    return _driver(cfg, granger=True)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-")


def _table_rows(summary) -> list[dict]:
    """One row per feature set, one R²/RMSE/1-R² triple per model."""
    models = list(dict.fromkeys(r.model for r in summary))
    rows: dict[str, dict] = {}
    for r in summary:
        row = rows.setdefault(r.feature_set.name, {"feature_set": r.feature_set.name})
        row[f"{r.model}_r2"] = r.r2
        row[f"{r.model}_rmse"] = r.rmse
        row[f"{r.model}_one_minus_r2"] = r.one_minus_r2
    cols = ["feature_set"] + [f"{m}_{k}" for m in models for k in ("r2", "rmse", "one_minus_r2")]
    return list(rows.values()), cols


def cmd_nowcast(cfg: dict, args) -> int:
    _require(cfg, "terms", "cases", "protocol")
    panel = load_panel(cfg)
    feature_sets = cfg["feature_sets"]
    clusters = None
    cpath = _clusters_path(cfg)
    if feature_sets is None or any(f.startswith("cluster:") for f in feature_sets):
        if cpath.is_file():
            clusters, _ = sio.load_clusters_json(cpath)
        elif feature_sets is not None:
            raise ConfigError(f"cluster feature sets need a clusters file: {cpath} not found")
    if feature_sets is None:
        feature_sets = [f"cluster:{i}" for i in range(1, len(clusters or []) + 1)] + ["all"]
    opts = dict(
        models=cfg["models"],
        clusters=clusters,
        seed=cfg["seed"],
        rf_hyper=cfg["rf_hyper"],
        rf_grid=cfg["rf_grid"],
        cv_folds=cfg["cv_folds"],
        n_jobs=cfg["n_jobs"],
    )
    if cfg["protocol"] == "seasonal":
        _require(cfg, "season_boundaries")
        reports = run_seasonal_eval(panel, cfg["season_boundaries"], feature_sets, **opts)
    elif cfg["protocol"] == "wave":
        _require(cfg, "wave_search_range")
        reports = run_wave_eval(panel, cfg["wave_search_range"], feature_sets, **opts)
    else:
        raise ConfigError(f"protocol must be 'seasonal' or 'wave', got {cfg['protocol']!r}")
    summary = summarize_reports(reports) if cfg["protocol"] == "seasonal" else list(reports)
    rows = [r.as_record() for r in reports]
    if cfg["protocol"] == "seasonal":
        rows += [r.as_record() for r in summary]
    table, table_cols = _table_rows(summary)
    files = {
        "eval_report.csv": sio.records_csv_text(rows, EVAL_COLUMNS),
        "eval_report.json": sio.dumps(rows),
        "eval_table.csv": sio.records_csv_text(table, table_cols),
    }
    for r in reports:
        if not r.ok:
            continue
        stem = _slug(f"{r.model}__{r.feature_set.name}__{r.period}")
        files[f"predictions/{stem}.csv"] = sio.terms_csv_text([r.actual, r.predictions])
        files[f"models/{stem}.json"] = sio.dumps(r.fitted.to_dict())
    _write_all(cfg["out"], files)
    failed = [r for r in reports if not r.ok]
    for r in failed:
        print(f"warning: {r.model} / {r.feature_set.name} / {r.period}: {r.error}", file=sys.stderr)
    print(f"{len(reports) - len(failed)}/{len(reports)} cells succeeded; report in {cfg['out']}")
    return 1 if len(failed) == len(reports) else 0


COMMANDS = {
    "synth": cmd_synth,
    "cluster": cmd_cluster,
    "correlate": cmd_correlate,
    "granger": cmd_granger,
    "nowcast": cmd_nowcast,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand from resetting a value given before it
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with run options (flags override it)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--terms", help="terms CSV (week + one column per search term)")
    data.add_argument("--media", help="media CSV (week + one value column)")
    data.add_argument("--cases", help="cases CSV (week + one value column)")
    data.add_argument("--week-format", dest="week_format", choices=sio.WEEK_FORMATS)
    data.add_argument("--clusters", help="clusters.json (default: OUT/clusters.json)")
    data.add_argument("--clustering-range", dest="clustering_range", help="FIRST:LAST, e.g. 2009-W10:2010-W35")

    parser = argparse.ArgumentParser(prog="searchcast", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic three-cluster dataset")
    p.add_argument("--weeks", type=int, default=104)
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=5.0)
    p.add_argument("--cluster-sizes", dest="cluster_sizes", default="8,8,8")
    p.add_argument("--start", default="2009-W10")

    p = sub.add_parser("cluster", parents=[common, data], help="Ward clustering of the term series")
    p.add_argument("--cluster-k", dest="cluster_k", type=int)

    for name, text in (("correlate", "correlate centroids with cases/media"), ("granger", "correlations plus Granger tests")):
        p = sub.add_parser(name, parents=[common, data], help=text)
        p.add_argument("--max-lag", dest="max_lag", type=int)
        p.add_argument("--lag-criterion", dest="lag_criterion", choices=("bic", "aic", "hq"))

    p = sub.add_parser("nowcast", parents=[common, data], help="fit and evaluate the nowcast models")
    p.add_argument("--protocol", choices=("seasonal", "wave"))
    p.add_argument("--season-boundaries", dest="season_boundaries", help="comma-separated season start weeks plus the week after the last season")
    p.add_argument("--wave-search-range", dest="wave_search_range", help="FIRST:LAST weeks searched for the inter-wave minimum")
    p.add_argument("--models", help="comma-separated subset of linreg,rf")
    p.add_argument("--feature-sets", dest="feature_sets", help="comma-separated: all, cluster:<id>, or term ids joined by +")
    p.add_argument("--rf-hyper", dest="rf_hyper", help="fixed forest N,MAX_FEATURES,MAX_DEPTH (skips grid search)")
    p.add_argument("--cv-folds", dest="cv_folds", type=int)
    p.add_argument("--n-jobs", dest="n_jobs", type=int)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, sio.InputError, SeriesError, ModelError, OSError) as exc:
        print(f"searchcast {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
