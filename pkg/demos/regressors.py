"""
Linear regression and random forest
===================================

Planted coefficients, a sine curve, and a small grid search.
"""

import numpy as np
from searchcast import DesignMatrix, ForestHyper, forest_fit, grid_search_cv, ols_fit, r2_score

rng = np.random.default_rng(0)
A = rng.normal(size=(60, 3))
beta = np.array([1.5, -2.0, 0.5])
model = ols_fit(DesignMatrix(A, 4.0 + A @ beta, ("a", "b", "c")))
print("intercept", model.intercept, "coefficients", model.coefficients)

x = np.linspace(0, 2 * np.pi, 200)
sine = DesignMatrix(x, np.sin(x))
forest = forest_fit(sine, ForestHyper(200, "all", 6), seed=0)
print("sine training R^2", r2_score(sine.target, forest.predict(sine)))

# thread count does not change the forest
same = np.array_equal(forest.predict(sine), forest_fit(sine, ForestHyper(200, "all", 6), seed=0, n_jobs=4).predict(sine))
print("identical with 4 threads:", same)

# folds are contiguous blocks of rows, so a 1-D curve sorted by x would ask
# the forest to extrapolate; use unordered rows with two informative columns
B = rng.uniform(-2, 2, size=(120, 4))
noisy = DesignMatrix(B, np.sin(B[:, 0]) + 0.5 * B[:, 1] + rng.normal(0, 0.2, 120))
grid = {"n_estimators": [20, 50], "max_features": ["all", "sqrt"], "max_depth": [2, 4]}
best, table = grid_search_cv(noisy, grid, folds=5, seed=0)
for row in table:
    print(f"{row.hyper.label():50s} mean CV R^2 {row.mean_score:+.3f}")
print("best:", best.label())
