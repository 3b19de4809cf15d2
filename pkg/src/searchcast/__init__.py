"""Separate media-driven from disease-driven search signals and nowcast cases."""
from .timeseries import (
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
from .clustering import (
    ClusterProfile,
    Dendrogram,
    DistanceMatrix,
    MergeStep,
    cluster_panel,
    cluster_profiles,
    cut_dendrogram,
    euclidean_distances,
    ward_linkage,
)
from .stats import (
    CorrelationResult,
    DriverReport,
    GrangerResult,
    cluster_driver_report,
    correlate,
    granger_test,
    select_lag,
)
from .models import (
    PAPER_GRID,
    DesignMatrix,
    ForestHyper,
    ForestModel,
    LinearModel,
    ModelError,
    forest_fit,
    grid_search_cv,
    ols_fit,
    ols_predict,
    tree_fit,
)
from .evaluation import (
    EvalReport,
    FeatureSetSpec,
    SynthSpec,
    adjusted_rand_index,
    generate_synthetic,
    r2_score,
    rmse_score,
    run_seasonal_eval,
    run_wave_eval,
    summarize_reports,
)

__version__ = "0.1.0"
