"""From execution outcomes to labels, a cluster-aware split and two classifiers.

Run with ``python demos/labels_and_learners.py``.
"""
import numpy as np

from graspq import (ExecutionOutcome, GraspRecord, feature_matrix, label_dataset, split,
                    ternary_label)
from graspq.learn import evaluate, expand_grid, grid_search
from graspq.metrics import quality_vector
from graspq.synth import synth_dataset

# a cluster is every execution of one grasp: all stable -> Robust,
# all unstable -> Futile, anything mixed -> Fragile
cluster = [GraspRecord("g1", "c7", "run", "ball", [ExecutionOutcome("Stable")]),
           GraspRecord("g2", "c7", "run", "ball", [ExecutionOutcome("Unstable")])]
print("mixed cluster ->", ternary_label(cluster))

# a small synthetic dataset with a known class structure
ds, objects = synth_dataset(300, "separable", seed=1)
for r in ds.records:
    r.quality = quality_vector(r.grasp_instance(objects)).as_dict()
ds, _ = label_dataset(ds)

# whole clusters go to one side, so a grasp never appears in both
train, test = split(ds, 0.3, seed=1, mode="cluster")
print(f"{len(train)} train / {len(test)} test records")

names = ["q_b1", "q_b2", "q_b3", "q_d1"]
X_train, y_train = feature_matrix(train, names)
X_test, y_test = feature_matrix(test, names)

for kind, params in (("knn", {"k": [1, 3, 5, 9]}),
                     ("tree", {"max_depth": [1, 2, 4], "min_samples_leaf": [1, 5]})):
    best, model, report = grid_search(X_train, y_train, expand_grid(kind, params), folds=5, seed=1)
    report = evaluate(model, X_test, y_test, report)
    print(kind, report.hyperparameters,
          f"cv {report.train_accuracy_mean:.2f} ± {report.train_accuracy_std:.2f}",
          f"test {report.test_accuracy:.2f}")
