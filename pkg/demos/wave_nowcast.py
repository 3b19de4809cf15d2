"""
Nowcasting a second wave from the first
=======================================

Train on the first wave of a synthetic outbreak and predict the second,
using the case-driven cluster, the media-driven cluster, or every term.
"""

from searchcast import (ForestHyper, SynthSpec, cluster_driver_report, cluster_panel,
                        cluster_profiles, generate_synthetic, run_wave_eval)

synth = generate_synthetic(SynthSpec(seed=3))
_, clusters = cluster_panel(synth.panel, k=3)
drivers = cluster_driver_report(synth.panel, cluster_profiles(synth.panel, clusters), granger=False)
sets = [f"cluster:{drivers.disease_cluster}", f"cluster:{drivers.media_cluster}", "all"]

reports = run_wave_eval(synth.panel, synth.spec.default_search_range(), sets, ["linreg", "rf"],
                        clusters, rf_hyper=ForestHyper(100, "sqrt", 4))
print("split:", reports[0].period)
for r in reports:
    print(f"{r.model:6s} {r.feature_set.name:10s} R^2 {r.r2:+.3f} RMSE {r.rmse:.3f}")
