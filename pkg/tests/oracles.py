"""Slow, independent reference implementations used only by the tests."""
import itertools
import math

import mpmath as mp
import numpy as np


def naive_distances(rows):
    n = len(rows)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            total = 0.0
            for a, b in zip(rows[i], rows[j]):
                total += (a - b) ** 2
            d[i][j] = math.sqrt(total)
    return np.array(d)


def brute_force_ward(points):
    """Ward clustering recomputing every cluster mean at every step.

    Uses the closed form ``sqrt(2 |A||B| / (|A|+|B|)) * ||mean_A - mean_B||``
    rather than any distance update. Returns ``[(left, right, height, size)]``
    with the same node numbering and tie rule as the library.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    members = {i: [i] for i in range(n)}
    steps = []
    for k in range(n - 1):
        best, pair = None, None
        for a, b in itertools.combinations(sorted(members), 2):
            A, B = members[a], members[b]
            ma, mb = pts[A].mean(axis=0), pts[B].mean(axis=0)
            w = math.sqrt(2.0 * len(A) * len(B) / (len(A) + len(B))) * float(np.linalg.norm(ma - mb))
            if best is None or w < best:
                best, pair = w, (a, b)
        a, b = pair
        members[n + k] = members.pop(a) + members.pop(b)
        steps.append((a, b, best, len(members[n + k])))
    return steps


def naive_profile(matrix):
    """Per-week mean and population sd with explicit loops."""
    weeks, m = len(matrix), len(matrix[0])
    means, sds = [], []
    for t in range(weeks):
        row = [matrix[t][j] for j in range(m)]
        mu = sum(row) / m
        means.append(mu)
        sds.append(math.sqrt(sum((v - mu) ** 2 for v in row) / m))
    return np.array(means), np.array(sds)


def t_two_sided_quad(t, dof, dps=40):
    """Two-sided Student-t tail by quadrature of the density."""
    with mp.workdps(dps):
        dof = mp.mpf(dof)
        c = mp.gamma((dof + 1) / 2) / (mp.sqrt(dof * mp.pi) * mp.gamma(dof / 2))
        pdf = lambda u: c * (1 + u * u / dof) ** (-(dof + 1) / 2)
        return float(2 * mp.quad(pdf, [abs(mp.mpf(t)), mp.inf]))


def chi2_upper_quad(g, dof, dps=40):
    """Chi-squared upper tail by quadrature of the density."""
    with mp.workdps(dps):
        k = mp.mpf(dof)
        c = 1 / (2 ** (k / 2) * mp.gamma(k / 2))
        pdf = lambda u: c * u ** (k / 2 - 1) * mp.e ** (-u / 2)
        g = mp.mpf(g)
        if g <= 0:
            return 1.0
        return float(mp.quad(pdf, [g, g + 10, mp.inf]))


def best_split_1d(x, y):
    """Every threshold between distinct sorted values; minimal total SSE."""
    pairs = sorted(zip(x, y))
    best = (math.inf, None)
    for k in range(1, len(pairs)):
        if pairs[k][0] == pairs[k - 1][0]:
            continue
        left = [v for _, v in pairs[:k]]
        right = [v for _, v in pairs[k:]]
        sse = sum((v - sum(left) / len(left)) ** 2 for v in left) + sum(
            (v - sum(right) / len(right)) ** 2 for v in right
        )
        if sse < best[0] - 1e-12:
            best = (sse, 0.5 * (pairs[k - 1][0] + pairs[k][0]))
    return best


def naive_rmse(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / len(a))
