"""Seven grasp quality metrics on a sphere held by three fingertips.

Run with ``python demos/grasp_metrics_tour.py``.
"""
import numpy as np

from graspq import Contact, GraspInstance, HandPosture, NormConstants, ObjectModel, quality_vector
from graspq.geomcore import convex_hull_volume, svd_singular_values

# a 5 cm ball; area_max is the area of its great circle
radius = 0.05
ball = ObjectModel("ball", np.zeros(3),
                   norm_constants=NormConstants(distance_max=radius, area_max=np.pi * radius**2))


def ring(phases, z=0.0, mu=0.5):
    """Contacts on a horizontal circle of the ball, normals pointing inward."""
    r = np.sqrt(radius**2 - z**2)
    pts = [np.array([r * np.cos(t), r * np.sin(t), z]) for t in phases]
    return [Contact(p, -p / np.linalg.norm(p), mu) for p in pts]


posture = HandPosture(y=np.ones(7), y_min=np.zeros(7), y_max=2 * np.ones(7))
jacobian = np.random.default_rng(0).normal(size=(9, 7))

# evenly spaced fingers: a centred equilateral contact triangle
even = GraspInstance("even", ring(2 * np.pi * np.arange(3) / 3), posture, ball, jacobian)
# bunched fingers: a thin triangle well off the centre
bunched = GraspInstance("bunched", ring([0.0, 0.4, 0.9]), posture, ball, jacobian)

for g in (even, bunched):
    qv = quality_vector(g)
    print(g.grasp_id.ljust(8), " ".join(f"{k}={v:.3f}" for k, v in qv.as_dict().items()))

# the building blocks are usable on their own
print("unit square volume:", convex_hull_volume([[0, 0], [1, 0], [0, 1], [1, 1]]))
print("singular values of diag(3, 2):", svd_singular_values(np.diag([3.0, 2.0])))

# joints pushed to a limit lower q_d1
cramped = GraspInstance("cramped", even.contacts,
                        HandPosture(y=np.full(7, 1.9), y_min=np.zeros(7), y_max=2 * np.ones(7)),
                        ball, jacobian)
print("q_d1 mid-range vs near limits:", quality_vector(even).q_d1, quality_vector(cramped).q_d1)
