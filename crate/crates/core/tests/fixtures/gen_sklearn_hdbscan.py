"""Regenerates sklearn_hdbscan.json: random blob datasets labelled by
scikit-learn's HDBSCAN (min_cluster_size=2, allow_single_cluster=False)."""
import json
import numpy as np
from sklearn.cluster import HDBSCAN

rng = np.random.default_rng(20240611)
cases = []
for case in range(40):
    d = int(rng.integers(2, 6))
    k = int(rng.integers(1, 5))
    centers = rng.normal(size=(k, d)) * 3.0
    n = int(rng.integers(5, 60))
    pts = centers[rng.integers(0, k, size=n)] + rng.normal(size=(n, d)) * rng.uniform(0.1, 1.0)
    metric = "euclidean" if case % 2 == 0 else "cosine"
    labels = HDBSCAN(min_cluster_size=2, metric=metric, allow_single_cluster=False).fit_predict(pts)
    cases.append({"metric": metric, "points": pts.tolist(), "labels": [int(x) for x in labels]})
with open("sklearn_hdbscan.json", "w") as f:
    json.dump(cases, f)
