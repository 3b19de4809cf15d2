"""Ward hierarchical clustering of term series.

Node ids follow the usual convention: leaves are ``0..n-1`` in panel order,
the merge at step ``k`` creates node ``n + k``. Heights are Ward distances
(the same scale scipy's ``linkage(method="ward")`` reports), not variance
increments.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .timeseries import Panel, SeriesError, WeeklySeries

__all__ = [
    "DistanceMatrix",
    "MergeStep",
    "Dendrogram",
    "ClusterProfile",
    "euclidean_distances",
    "ward_linkage",
    "cut_dendrogram",
    "cluster_profiles",
    "cluster_panel",
]


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        d = np.array(self.values, dtype=float)
        n = len(self.labels)
        if d.shape != (n, n):
            raise SeriesError(f"distance matrix shape {d.shape} does not match {n} labels")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise SeriesError("distances must be finite and nonnegative")
        if np.any(d != d.T) or np.any(np.diag(d) != 0):
            raise SeriesError("distance matrix must be symmetric with zero diagonal")
        d.flags.writeable = False
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", d)

    @property
    def n(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class MergeStep:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[str, ...]
    steps: tuple[MergeStep, ...]

    def __post_init__(self):
        n = len(self.leaves)
        if len(self.steps) != n - 1:
            raise SeriesError(f"dendrogram over {n} leaves needs {n - 1} steps, got {len(self.steps)}")
        sizes = [1] * n
        used = set()
        for k, st in enumerate(self.steps):
            for node in (st.left, st.right):
                if node >= n + k or node in used:
                    raise SeriesError(f"step {k} references unavailable node {node}")
                used.add(node)
            if st.size != sizes[st.left] + sizes[st.right]:
                raise SeriesError(f"step {k} size mismatch")
            sizes.append(st.size)

    @property
    def heights(self) -> np.ndarray:
        return np.array([s.height for s in self.steps])

    def linkage_matrix(self) -> np.ndarray:
        """scipy-style ``(n-1) x 4`` linkage matrix."""
        return np.array([[s.left, s.right, s.height, s.size] for s in self.steps], dtype=float)

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "height_convention": "ward_distance",
            "steps": [
                {"left": s.left, "right": s.right, "height": s.height, "size": s.size}
                for s in self.steps
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Dendrogram":
        steps = tuple(
            MergeStep(int(s["left"]), int(s["right"]), float(s["height"]), int(s["size"]))
            for s in data["steps"]
        )
        return cls(tuple(data["leaves"]), steps)

    def to_newick(self) -> str:
        """Newick text; branch lengths are parent height minus child height."""
        n = len(self.leaves)
        if n == 1:
            return f"{_newick_label(self.leaves[0])};"
        heights = [0.0] * n + [s.height for s in self.steps]

        def render(node: int, parent_height: float) -> str:
            length = parent_height - heights[node]
            if node < n:
                body = _newick_label(self.leaves[node])
            else:
                st = self.steps[node - n]
                body = f"({render(st.left, st.height)},{render(st.right, st.height)})"
            return f"{body}:{length!r}"

        root = self.steps[-1]
        return f"({render(root.left, root.height)},{render(root.right, root.height)});"


def _newick_label(label: str) -> str:
    if any(c in label for c in " ()[]':;,\t\n"):
        return "'" + label.replace("'", "''") + "'"
    return label


@dataclass(frozen=True)
class ClusterProfile:
    cluster_id: int
    members: tuple[str, ...]
    centroid: WeeklySeries
    dispersion: WeeklySeries


def euclidean_distances(panel: Panel) -> DistanceMatrix:
    """Pairwise Euclidean distances between term series.

    Each pair is computed on its own, so the result does not depend on
    evaluation order.
    """
    terms = panel.terms
    if len(terms) < 2:
        raise SeriesError("need at least 2 term series to cluster")
    n = len(terms)
    length = len(terms[0])
    d = np.zeros((n, n))
    for i in range(n):
        xi = terms[i].values
        for j in range(i + 1, n):
            xj = terms[j].values
            if len(xj) != length or len(xi) != length:
                raise SeriesError("term series lengths differ")
            d[i, j] = d[j, i] = math.sqrt(float(np.sum((xi - xj) ** 2)))
    return DistanceMatrix(tuple(panel.term_ids), d)


def ward_linkage(d: DistanceMatrix) -> Dendrogram:
    """Agglomerative Ward clustering via the Lance-Williams update.

    Works on squared distances; at each step merges the active pair with the
    smallest Ward distance, ties resolved by the smallest ``(left, right)``
    node-id pair.
    """
    n = d.n
    if n < 2:
        raise SeriesError("ward_linkage needs at least 2 series")
    total = 2 * n - 1
    sq = np.full((total, total), np.inf)
    sq[:n, :n] = d.values**2
    size = np.zeros(total, dtype=int)
    size[:n] = 1
    active = list(range(n))
    steps = []
    for k in range(n - 1):
        best, pair = np.inf, None
        # active is kept sorted, so the first minimum found is the smallest id pair
        for a_pos, a in enumerate(active):
            row = sq[a]
            for b in active[a_pos + 1 :]:
                if row[b] < best:
                    best, pair = row[b], (a, b)
        a, b = pair
        new = n + k
        na, nb = size[a], size[b]
        active.remove(a)
        active.remove(b)
        for c in active:
            nc = size[c]
            val = ((na + nc) * sq[a, c] + (nb + nc) * sq[b, c] - nc * best) / (na + nb + nc)
            sq[new, c] = sq[c, new] = max(val, 0.0)
        active.append(new)
        size[new] = na + nb
        steps.append(MergeStep(a, b, math.sqrt(max(best, 0.0)), int(na + nb)))
    return Dendrogram(d.labels, tuple(steps))


def cut_dendrogram(dendro: Dendrogram, k: int) -> list[tuple[str, ...]]:
    """Undo the ``k - 1`` highest merges and return the ``k`` member sets.

    Clusters come back ordered by decreasing size, ties broken by the
    lexicographically smallest member id; cluster ``i`` in the returned list
    is labelled ``i + 1`` everywhere else. Members within a cluster are sorted.
    """
    n = len(dendro.leaves)
    if not 1 <= k <= n:
        raise SeriesError(f"k must be in 1..{n}, got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j, st in enumerate(dendro.steps[: n - k]):
        parent[find(st.left)] = n + j
        parent[find(st.right)] = n + j
    groups: dict[int, list[str]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(dendro.leaves[leaf])
    clusters = [tuple(sorted(g)) for g in groups.values()]
    clusters.sort(key=lambda c: (-len(c), c[0]))
    return clusters


def cluster_profiles(panel: Panel, member_sets: Sequence[Sequence[str]]) -> list[ClusterProfile]:
    """Per-week centroid (mean) and dispersion (population sd) per cluster."""
    known = set(panel.term_ids)
    seen: set[str] = set()
    profiles = []
    for idx, members in enumerate(member_sets, start=1):
        members = tuple(members)
        if not members:
            raise SeriesError(f"cluster {idx} is empty")
        for m in members:
            if m not in known:
                raise SeriesError(f"unknown member id {m!r}")
            if m in seen:
                raise SeriesError(f"member {m!r} appears in more than one cluster")
            seen.add(m)
        x = panel.matrix(members)
        start = panel.span[0]
        profiles.append(
            ClusterProfile(
                idx,
                members,
                WeeklySeries(f"cluster:{idx}", start, x.mean(axis=1)),
                WeeklySeries(f"cluster:{idx}:sd", start, x.std(axis=1)),
            )
        )
    if seen != known:
        missing = sorted(known - seen)
        raise SeriesError(f"clusters do not cover term(s): {', '.join(missing)}")
    return profiles


def cluster_panel(panel: Panel, k: int = 3):
    """Distances, linkage and cut in one call; returns ``(dendrogram, clusters)``."""
    dendro = ward_linkage(euclidean_distances(panel))
    return dendro, cut_dendrogram(dendro, k)
