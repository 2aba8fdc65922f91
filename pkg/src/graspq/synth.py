"""Parametric synthetic grasp datasets with known labels.

Every grasp puts three fingertips on a sphere (the object, centre of mass
at the origin) and drives a four-joint hand.  The ground-truth class of a
cluster sets how far the joints sit from mid-range, so ``q_d1`` carries the
label signal; the other metrics vary independently of the class.

Presets
-------
ideal
    Regular triangle of contacts on the equator, joints at mid-range;
    every cluster is Robust.
separable
    Classes use disjoint joint-deviation bands, so the ternary label is a
    step function of ``q_d1``.
noisy
    Like ``separable`` but class centres get Gaussian noise of std
    ``sigma`` (in units of the normalised joint deviation), so the classes
    overlap more as ``sigma`` grows.
"""
import re

import numpy as np

from .datapipe import (FRAGILE, FUTILE, ROBUST, Dataset, ExecutionOutcome, GraspRecord)
from .graspmodel import NormConstants, ObjectModel

PRESETS = ("ideal", "separable", "noisy")
CLASSES = (ROBUST, FRAGILE, FUTILE)
# per-class range of |y - a| / |limit - a|; q_d1 = 1 - u^2
SEPARABLE_BANDS = {ROBUST: (0.0, 0.2), FRAGILE: (0.45, 0.6), FUTILE: (0.8, 0.95)}
NOISY_CENTRES = {ROBUST: 0.1, FRAGILE: 0.5, FUTILE: 0.85}

N_JOINTS = 7
JOINT_MIN, JOINT_MAX = 0.0, 2.0
RECORDS_PER_CLUSTER = 3
ROBOTS = ("apollo", "tombatossals")


def parse_preset(text, sigma=None):
    """``"noisy(0.2)"`` -> ``("noisy", 0.2)``; plain names pass through."""
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*", text)
    if not m or m.group(1) not in PRESETS:
        raise ValueError(f"unknown preset {text!r}; choose from {', '.join(PRESETS)}")
    name = m.group(1)
    if m.group(2) is not None:
        sigma = float(m.group(2))
    if name == "noisy" and sigma is None:
        sigma = 0.1
    return name, sigma


def sphere_object(name, radius, n_surface=200):
    """Sphere centred on the origin with Fibonacci-lattice surface samples."""
    i = np.arange(n_surface) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n_surface)
    theta = np.pi * (1.0 + 5.0**0.5) * i
    pts = radius * np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    return ObjectModel(name, np.zeros(3), pts,
                       norm_constants=NormConstants(distance_max=radius, area_max=np.pi * radius**2))


def default_objects():
    return {"sphere_40": sphere_object("sphere_40", 0.04), "sphere_60": sphere_object("sphere_60", 0.06)}


def _contacts(radius, latitude, jitter, mu):
    angles = np.radians([0.0, 120.0, 240.0]) + jitter
    z = radius * np.sin(latitude)
    rho = radius * np.cos(latitude)
    out = []
    for t in angles:
        p = np.array([rho * np.cos(t), rho * np.sin(t), z])
        n = -p / np.linalg.norm(p)
        out.append({"position": p.tolist(), "normal": n.tolist(), "mu": float(mu)})
    return out


def _posture(u, signs):
    a = 0.5 * (JOINT_MIN + JOINT_MAX)
    half = 0.5 * (JOINT_MAX - JOINT_MIN)
    y = a + signs * u * half
    return {"y": y.tolist(), "y_min": [JOINT_MIN] * N_JOINTS, "y_max": [JOINT_MAX] * N_JOINTS}


def _executions(label, record_index):
    variants = ({"object_variant": "light", "gravity_orientation": "down"},
                {"object_variant": "heavy", "gravity_orientation": "down"})
    if label == ROBUST:
        outcomes = ("stable", "stable")
    elif label == FUTILE:
        outcomes = ("unstable", "unstable")
    else:
        outcomes = (("stable", "stable"), ("stable", "unstable"), ("unstable", "unstable"))[record_index % 3]
    return [ExecutionOutcome(o.capitalize(), dict(ctx)) for o, ctx in zip(outcomes, variants)]


def synth_dataset(n, preset="separable", seed=0, sigma=None, objects=None):
    """Generate ``n`` grasp records (clusters of three) and their object catalog.

    Returns
    -------
    dataset : Dataset
    objects : dict of ObjectModel
    """
    preset, sigma = parse_preset(preset, sigma)
    objects = objects or default_objects()
    names = sorted(objects)
    rng = np.random.default_rng(seed)
    records = []
    n_clusters = -(-n // RECORDS_PER_CLUSTER) if n else 0
    for c in range(n_clusters):
        label = ROBUST if preset == "ideal" else CLASSES[c % 3]
        obj = objects[names[c % len(names)]]
        radius = obj.norm_constants.distance_max
        if preset == "ideal":
            u, latitude, jitter, mu = 0.0, 0.0, np.zeros(3), 0.5
        else:
            if preset == "separable":
                u = rng.uniform(*SEPARABLE_BANDS[label])
            else:
                u = NOISY_CENTRES[label] + rng.normal(0.0, sigma)
            latitude = rng.uniform(-0.6, 0.6)
            jitter = rng.uniform(-0.35, 0.35, size=3)
            mu = rng.uniform(0.3, 0.9)
        signs = rng.choice([-1.0, 1.0], size=N_JOINTS)
        jacobian = rng.normal(0.0, 0.05, size=(9, N_JOINTS))
        for r in range(RECORDS_PER_CLUSTER):
            if len(records) == n:
                break
            if preset == "ideal":
                du = dl = 0.0
                dj = np.zeros(3)
            else:
                du, dl = rng.normal(0.0, 1e-3, size=2)
                dj = rng.normal(0.0, 1e-3, size=3)
            u_r = float(np.clip(u + du, 0.0, 0.99))
            records.append(GraspRecord(
                grasp_id=f"g{len(records):05d}",
                cluster_id=f"c{c:04d}",
                robot=ROBOTS[c % 2],
                object=obj.name,
                executions=_executions(label, r),
                contacts=_contacts(radius, latitude + dl, jitter + dj, mu),
                jacobian=jacobian.tolist(),
                posture=_posture(u_r, signs),
            ))
    provenance = {"generator": "graspq.synth", "preset": preset, "seed": seed, "sigma": sigma}
    return Dataset(records, provenance=provenance), objects
