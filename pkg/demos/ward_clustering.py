"""
Grouping search terms with Ward linkage
=======================================

Three points on a line, then a synthetic panel of 24 search terms.
"""

import numpy as np
from searchcast import (Panel, WeekIndex, WeeklySeries, cluster_panel, cluster_profiles,
                        euclidean_distances, generate_synthetic, SynthSpec, ward_linkage)

# the smallest interesting case: points 0, 2 and 10
start = WeekIndex(2009, 10)
tiny = Panel(tuple(WeeklySeries(name, start, [v]) for name, v in [("p0", 0.0), ("p2", 2.0), ("p10", 10.0)]))
dendro = ward_linkage(euclidean_distances(tiny))
for step in dendro.steps:
    print(f"merge {step.left} + {step.right} at height {step.height:.6f} (size {step.size})")
print("sqrt(108) =", np.sqrt(108))
print(dendro.to_newick())

# a panel with three planted groups: case-driven, media-driven, background
synth = generate_synthetic(SynthSpec(seed=1))
dendro, clusters = cluster_panel(synth.panel, k=3)
for cid, members in enumerate(clusters, start=1):
    truth = sorted({synth.labels[m] for m in members})
    print(f"cluster {cid}: {len(members)} terms, planted group(s) {truth}")

# centroid and spread per cluster, week by week
profiles = cluster_profiles(synth.panel, clusters)
for p in profiles:
    print(p.centroid.id, "peak week", p.centroid.weeks()[int(np.argmax(p.centroid.values))],
          "mean sd", round(float(p.dispersion.values.mean()), 2))
