"""
The boosted-tree classifier on its own
======================================

XOR cannot be split profitably at the root, yet depth-2 trees still
separate it. We also look at the training loss per stage and at
gain-based feature importance.
"""

import numpy as np

from qifcausal.gbdt import TrainConfig, fit, predict, ranked_importance

pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
X = np.repeat(pts, 50, axis=0)
y = np.repeat([0, 1, 1, 0], 50)

trace = []
model = fit(X, y, TrainConfig(n_trees=50, max_depth=2), feature_names=["a", "b"], loss_trace=trace)
print("XOR training accuracy:", np.mean(np.array(predict(model, X)) == y))
print("loss at stages 0, 10, 50:", [round(trace[i], 3) for i in (0, 10, 50)])

rng = np.random.default_rng(1)
Z = rng.normal(size=(500, 5))
t = (Z[:, 1] - 0.5 * Z[:, 3] ** 2 > 0).astype(int)
model = fit(Z, t, TrainConfig(n_trees=100), feature_names=[f"z{i}" for i in range(5)])
for name, share in ranked_importance(model):
    print(f"{name}: {share:.3f}")

# Models are plain JSON documents.
print(model.to_json()[:200], "...")
