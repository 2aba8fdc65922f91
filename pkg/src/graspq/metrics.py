"""The seven independent grasp quality metrics and the feature vector built from them.

=====  ==========================================================
q_a1   smallest singular value of the grasp map G
q_b1   1 - |contact polygon centroid - com| / distance_max
q_b2   contact polygon area / area_max
q_b3   1 - sum |theta_i - mean theta| / theta_max
q_c2   volume of the grasp wrench space hull / volume_max
q_d1   1 - mean squared normalised joint deviation from mid-range
q_d2   sigma_min(G J) / sigma_max(G J)
=====  ==========================================================

Values outside [0, 1] are clamped; every clamp is logged and counted in an
optional ``collections.Counter`` so misconfigured normalisation is visible.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import graspmodel
from .errors import (DegenerateInput, DegenerateRange, GraspqError, InvalidThresholds,
                     MetricError, MissingJacobian, MissingNormalization)
from .geomcore import (convex_hull_volume, polygon_area, polygon_centroid,
                       polygon_internal_angles, svd_singular_values)

log = logging.getLogger(__name__)

METRIC_NAMES = ("q_a1", "q_b1", "q_b2", "q_b3", "q_c2", "q_d1", "q_d2")
# metrics with no natural upper bound; normalised with dataset or configured thresholds
UNBOUNDED = ("q_a1", "q_c2")


def clamp_unit(name, value, counter=None):
    if 0.0 <= value <= 1.0:
        return float(value)
    log.warning("%s = %.6g outside [0, 1]; clamped", name, value)
    if counter is not None:
        counter[name] += 1
    return float(min(max(value, 0.0), 1.0))


def normalize(raw, lo, hi, name="q_a1", counter=None):
    """Map ``raw`` linearly so ``lo -> 0`` and ``hi -> 1``, clamped to [0, 1]."""
    if not hi > lo:
        raise InvalidThresholds(f"{name}: need hi > lo, got lo={lo}, hi={hi}")
    return clamp_unit(name, (raw - lo) / (hi - lo), counter)


def normalize_q_a1(raw, lo, hi, counter=None):
    return normalize(raw, lo, hi, "q_a1", counter)


def wrench_singular_values(m):
    """The six singular values of a map into wrench space, descending.

    A map with fewer than six columns cannot span wrench space; its missing
    singular values are reported as zeros.
    """
    sv = svd_singular_values(m)
    return np.concatenate([sv, np.zeros(6 - len(sv))])


def q_a1(g, torque_scale=None):
    """Raw smallest singular value of the grasp map (not normalised)."""
    return float(wrench_singular_values(graspmodel.grasp_map(g, torque_scale))[-1])


def q_b1(g, counter=None):
    dmax = g.obj.norm_constants.distance_max
    if dmax is None:
        raise MissingNormalization(f"object {g.obj.name!r} has no distance_max")
    centroid = polygon_centroid(graspmodel.contact_polygon(g))
    dist = float(np.linalg.norm(centroid - g.obj.center_of_mass))
    return clamp_unit("q_b1", 1.0 - dist / dmax, counter)


def q_b2(g, counter=None):
    amax = g.obj.norm_constants.area_max
    if amax is None:
        raise MissingNormalization(f"object {g.obj.name!r} has no area_max")
    if len(g.contacts) < 3:
        return 0.0
    return clamp_unit("q_b2", polygon_area(graspmodel.contact_polygon(g)) / amax, counter)


def theta_max_for(n_f, obj=None):
    if obj is not None and obj.norm_constants.theta_max is not None:
        return float(obj.norm_constants.theta_max)
    return (n_f - 2) * 180.0


def q_b3(g, counter=None):
    """Polygon regularity; 0 for fewer than 3 contacts or collinear contacts."""
    n_f = len(g.contacts)
    if n_f < 3:
        return 0.0
    try:
        angles = polygon_internal_angles(graspmodel.contact_polygon(g))
    except DegenerateInput:
        return 0.0
    mean_angle = (n_f - 2) * 180.0 / n_f
    deviation = float(np.sum(np.abs(angles - mean_angle)))
    return clamp_unit("q_b3", 1.0 - deviation / theta_max_for(n_f, g.obj), counter)


def wrench_hull_volume(g, cone_edges=graspmodel.DEFAULT_CONE_EDGES, torque_scale=None, dims=6):
    """Raw volume of the convex hull of the wrench set; 0 when it is flat.

    ``dims=3`` restricts the hull to the force components.
    """
    w = graspmodel.wrench_set(g, cone_edges, torque_scale)
    if dims == 3:
        w = w[:, :3]
    elif dims != 6:
        raise ValueError(f"wrench hull dimension must be 3 or 6, got {dims}")
    try:
        return convex_hull_volume(w)
    except DegenerateInput:
        return 0.0


def q_c2(g, cone_edges=graspmodel.DEFAULT_CONE_EDGES, torque_scale=None, counter=None, dims=6):
    vmax = g.obj.norm_constants.volume_max
    if vmax is None:
        raise MissingNormalization(f"object {g.obj.name!r} has no volume_max")
    return clamp_unit("q_c2", wrench_hull_volume(g, cone_edges, torque_scale, dims) / vmax, counter)


def q_d1(posture, counter=None):
    """Joint posture metric.

    Each joint's deviation from its reference ``a`` is divided by the distance
    from ``a`` to the joint limit on the same side as the joint value, so every
    in-range joint contributes a term in [0, 1].
    """
    y, a = posture.y, posture.a
    limit = np.where(y >= a, posture.y_max, posture.y_min)
    span = a - limit
    if np.any(span == 0.0):
        raise DegenerateRange("joint reference coincides with a joint limit")
    terms = ((y - a) / span) ** 2
    return clamp_unit("q_d1", 1.0 - float(np.mean(terms)), counter)


def q_d2(g, torque_scale=None):
    """Inverse condition number of G J; 0 when G J vanishes or has fewer than 6 joints."""
    sv = wrench_singular_values(graspmodel.grasp_jacobian_product(g, torque_scale))
    if sv[0] == 0.0:
        return 0.0
    return float(sv[-1] / sv[0])


@dataclass
class QualityVector:
    q_a1: Optional[float] = None
    q_b1: Optional[float] = None
    q_b2: Optional[float] = None
    q_b3: Optional[float] = None
    q_c2: Optional[float] = None
    q_d1: Optional[float] = None
    q_d2: Optional[float] = None
    normalized: bool = False
    degenerate: tuple = ()
    metadata: dict = field(default_factory=dict)

    def as_dict(self):
        """Metric name -> value, in canonical order, ``None`` for missing ones."""
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def as_array(self, names=METRIC_NAMES):
        return np.array([np.nan if getattr(self, n) is None else getattr(self, n) for n in names])


def quality_vector(g, cone_edges=graspmodel.DEFAULT_CONE_EDGES, torque_scale=None,
                   thresholds=None, counter=None, hull_dims=6):
    """All seven metrics for one grasp.

    ``q_a1`` (always) and ``q_c2`` (when the object has no ``volume_max``) are
    normalised with ``thresholds[name] = (lo, hi)`` if given and left raw
    otherwise; ``normalized`` is True only when every present value is
    normalised.  ``q_d2`` is ``None`` for grasps without a hand Jacobian.
    """
    thresholds = thresholds or {}
    rho = graspmodel.resolve_torque_scale(g, torque_scale)
    values = {}
    degenerate = []
    raw = {}

    def run(name, fn):
        try:
            return fn()
        except GraspqError as exc:
            raise MetricError(name, exc) from exc

    raw["q_a1"] = run("q_a1", lambda: q_a1(g, rho))
    values["q_b1"] = run("q_b1", lambda: q_b1(g, counter))
    values["q_b2"] = run("q_b2", lambda: q_b2(g, counter))
    values["q_b3"] = run("q_b3", lambda: q_b3(g, counter))
    raw["q_c2"] = run("q_c2", lambda: wrench_hull_volume(g, cone_edges, rho, hull_dims))
    values["q_d1"] = run("q_d1", lambda: q_d1(g.posture, counter))
    try:
        values["q_d2"] = run("q_d2", lambda: q_d2(g, rho))
    except MetricError as exc:
        if not isinstance(exc.cause, MissingJacobian):
            raise
        values["q_d2"] = None

    if graspmodel.contact_polygon(g).degenerate:
        degenerate += ["q_b2", "q_b3"]
    if raw["q_c2"] == 0.0:
        degenerate.append("q_c2")
    if values["q_d2"] == 0.0:
        degenerate.append("q_d2")

    normalized = True
    vmax = g.obj.norm_constants.volume_max
    if vmax is not None:
        values["q_c2"] = clamp_unit("q_c2", raw["q_c2"] / vmax, counter)
    for name in UNBOUNDED:
        if name in values:
            continue
        if name in thresholds:
            lo, hi = thresholds[name]
            values[name] = run(name, lambda: normalize(raw[name], lo, hi, name, counter))
        else:
            values[name] = raw[name]
            normalized = False

    metadata = {
        "contact_model": graspmodel.CONTACT_MODEL,
        "torque_scale": rho,
        "cone_edges": int(cone_edges),
        "hull_dims": int(hull_dims),
        "volume_max": vmax,
        "theta_max": theta_max_for(len(g.contacts), g.obj) if len(g.contacts) >= 3 else None,
        "thresholds": {k: list(v) for k, v in sorted(thresholds.items())},
        "raw": raw,
    }
    return QualityVector(**values, normalized=normalized,
                         degenerate=tuple(n for n in METRIC_NAMES if n in degenerate),
                         metadata=metadata)


def apply_thresholds(qv, thresholds, counter=None):
    """Re-normalise the unbounded metrics of ``qv`` from its stored raw values."""
    values = {}
    normalized = True
    for name in UNBOUNDED:
        if name == "q_c2" and qv.metadata.get("volume_max") is not None:
            continue
        if name in thresholds:
            lo, hi = thresholds[name]
            values[name] = normalize(qv.metadata["raw"][name], lo, hi, name, counter)
        else:
            values[name] = qv.metadata["raw"][name]
            normalized = False
    meta = dict(qv.metadata, thresholds={k: list(v) for k, v in sorted(thresholds.items())})
    return replace(qv, **values, normalized=normalized, metadata=meta)


def calibrate_thresholds(vectors, names=UNBOUNDED):
    """(lo, hi) per unbounded metric from the min/max raw values over ``vectors``.

    A metric whose values are all equal gets ``hi = lo + 1``.
    """
    out = {}
    for name in names:
        vals = [qv.metadata["raw"][name] for qv in vectors]
        if not vals:
            continue
        lo, hi = float(min(vals)), float(max(vals))
        if not hi > lo:
            hi = lo + 1.0
        out[name] = (lo, hi)
    return out


def perturbation_stability(g, sigma_pos, trials, seed, cone_edges=graspmodel.DEFAULT_CONE_EDGES,
                           torque_scale=None, thresholds=None):
    """Mean and std of every metric when contact positions get Gaussian noise.

    Returns ``{metric: {"mean": m, "std": s}}`` for the metrics available on
    ``g``.  Deterministic for a given ``seed``.
    """
    if trials < 2:
        raise ValueError("perturbation_stability needs at least 2 trials")
    rng = np.random.default_rng(seed)
    rho = graspmodel.resolve_torque_scale(g, torque_scale)
    samples = {name: [] for name in METRIC_NAMES}
    for _ in range(trials):
        noise = rng.normal(0.0, sigma_pos, size=(len(g.contacts), 3))
        contacts = [replace(c, position=c.position + dp) for c, dp in zip(g.contacts, noise)]
        qv = quality_vector(replace(g, contacts=contacts), cone_edges, rho, thresholds, Counter())
        for name, value in qv.as_dict().items():
            if value is not None:
                samples[name].append(value)
    out = {}
    for name, vals in samples.items():
        if not vals:
            continue
        v = np.asarray(vals)
        out[name] = {"mean": float(v.mean()), "std": float(np.std(v - v[0]))}
    return out
