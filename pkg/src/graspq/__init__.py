"""Grasp quality metrics, execution labelling and grasp-success classifiers."""
from .datapipe import (Dataset, ExecutionOutcome, GraspRecord, binary_label, feature_matrix,
                       label_dataset, load_dataset, save_dataset, split, ternary_label)
from .errors import GraspqError
from .geomcore import (Polygon3D, convex_hull_volume, polygon_area, polygon_centroid,
                       polygon_internal_angles, svd_singular_values)
from .graspmodel import (Contact, GraspInstance, HandPosture, NormConstants, ObjectModel,
                         contact_polygon, grasp_jacobian_product, grasp_map, wrench_set)
from .learn import (EvalReport, cross_validate, evaluate, grid_search, knn_fit, knn_predict,
                    load_model, save_model, tree_fit, tree_predict, zero_one_score)
from .metrics import (METRIC_NAMES, QualityVector, normalize_q_a1, perturbation_stability,
                      q_a1, q_b1, q_b2, q_b3, q_c2, q_d1, q_d2, quality_vector)

__version__ = "0.1.0"
