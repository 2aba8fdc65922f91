"""Grasp descriptions and the matrices/point sets built from them.

Contacts are point contacts with friction.  Torques are taken about the
object's centre of mass and divided by a torque scale (a length, by default
the object's ``distance_max``) so force and torque entries share units.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidInput, MissingJacobian
from .geomcore import Polygon3D, best_fit_plane, frame_from_axis

CONTACT_MODEL = "point-contact-with-friction"
DEFAULT_CONE_EDGES = 8


@dataclass
class Contact:
    position: np.ndarray
    normal: np.ndarray  # unit, pointing into the object
    mu: float = 0.5

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.normal = np.asarray(self.normal, dtype=float).reshape(3)
        self.mu = float(self.mu)
        if self.mu < 0:
            raise InvalidInput(f"friction coefficient must be >= 0, got {self.mu}")


@dataclass
class NormConstants:
    distance_max: Optional[float] = None
    area_max: Optional[float] = None
    volume_max: Optional[float] = None
    theta_max: Optional[float] = None  # degrees; None -> (n_f - 2) * 180

    def __post_init__(self):
        for name in ("distance_max", "area_max", "volume_max", "theta_max"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise InvalidInput(f"{name} must be > 0, got {value}")

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class ObjectModel:
    name: str
    center_of_mass: np.ndarray
    surface_points: Optional[np.ndarray] = None
    mass: Optional[float] = None
    norm_constants: NormConstants = field(default_factory=NormConstants)

    def __post_init__(self):
        self.center_of_mass = np.asarray(self.center_of_mass, dtype=float).reshape(3)
        if self.surface_points is not None:
            self.surface_points = np.asarray(self.surface_points, dtype=float).reshape(-1, 3)
        if isinstance(self.norm_constants, dict):
            self.norm_constants = NormConstants(**self.norm_constants)

    def with_derived_constants(self):
        """Fill ``distance_max`` and ``area_max`` from the surface samples.

        ``distance_max`` is the farthest surface sample from the centre of mass
        and ``area_max`` the area of the disc of that radius, which bounds any
        planar polygon with vertices on the surface.  Constants already set are
        kept.
        """
        nc = self.norm_constants
        if nc.distance_max is not None and nc.area_max is not None:
            return self
        if self.surface_points is None or len(self.surface_points) == 0:
            raise InvalidInput(f"object {self.name!r} has no surface points to derive constants from")
        radius = float(np.max(np.linalg.norm(self.surface_points - self.center_of_mass, axis=1)))
        nc = replace(
            nc,
            distance_max=nc.distance_max if nc.distance_max is not None else radius,
            area_max=nc.area_max if nc.area_max is not None else np.pi * radius**2,
        )
        return replace(self, norm_constants=nc)

    def to_dict(self):
        d = {"center_of_mass": self.center_of_mass.tolist(),
             "norm_constants": self.norm_constants.to_dict()}
        if self.surface_points is not None:
            d["surface_points"] = self.surface_points.tolist()
        if self.mass is not None:
            d["mass"] = self.mass
        return d

    @classmethod
    def from_dict(cls, name, d):
        return cls(name=name,
                   center_of_mass=d["center_of_mass"],
                   surface_points=d.get("surface_points"),
                   mass=d.get("mass"),
                   norm_constants=NormConstants(**d.get("norm_constants", {})))


@dataclass
class HandPosture:
    y: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray
    a: Optional[np.ndarray] = None  # mid-range reference, defaults to the midpoint

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.y_min = np.asarray(self.y_min, dtype=float).reshape(-1)
        self.y_max = np.asarray(self.y_max, dtype=float).reshape(-1)
        n = len(self.y)
        if n < 1 or len(self.y_min) != n or len(self.y_max) != n:
            raise InvalidInput("posture lists must be non-empty and of equal length")
        if np.any(self.y_min >= self.y_max):
            raise InvalidInput("every joint needs y_min < y_max")
        if self.a is None:
            self.a = 0.5 * (self.y_min + self.y_max)
        else:
            self.a = np.asarray(self.a, dtype=float).reshape(-1)
            if len(self.a) != n:
                raise InvalidInput("posture mid-range list has the wrong length")
            if np.any(self.a <= self.y_min) or np.any(self.a >= self.y_max):
                raise InvalidInput("mid-range reference must lie strictly inside the joint range")

    @property
    def n_q(self):
        return len(self.y)


@dataclass
class GraspInstance:
    grasp_id: str
    contacts: list
    posture: HandPosture
    obj: ObjectModel
    jacobian: Optional[np.ndarray] = None  # (3n, n_q)

    def __post_init__(self):
        if len(self.contacts) < 1:
            raise InvalidInput(f"grasp {self.grasp_id!r} has no contacts")
        if self.jacobian is not None:
            self.jacobian = np.asarray(self.jacobian, dtype=float)
            expected = (3 * len(self.contacts), self.posture.n_q)
            if self.jacobian.shape != expected:
                raise InvalidInput(
                    f"grasp {self.grasp_id!r}: jacobian shape {self.jacobian.shape}, expected {expected}")

    @property
    def positions(self):
        return np.array([c.position for c in self.contacts])


def resolve_torque_scale(g, torque_scale=None):
    if torque_scale is not None:
        if not torque_scale > 0:
            raise InvalidInput(f"torque scale must be > 0, got {torque_scale}")
        return float(torque_scale)
    dmax = g.obj.norm_constants.distance_max
    return float(dmax) if dmax is not None else 1.0


def contact_frame(contact):
    """Rotation (contact frame -> object frame) whose z axis is the inward normal."""
    try:
        return frame_from_axis(contact.normal)
    except InvalidInput:
        raise InvalidInput("contact normal has zero length") from None


def cross_matrix(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def contact_blocks(g, torque_scale=None):
    """Per-contact 6x3 wrench maps, as an array of shape (n, 6, 3)."""
    rho = resolve_torque_scale(g, torque_scale)
    com = g.obj.center_of_mass
    blocks = np.empty((len(g.contacts), 6, 3))
    for i, c in enumerate(g.contacts):
        r = contact_frame(c)
        blocks[i, :3] = r
        blocks[i, 3:] = cross_matrix(c.position - com) @ r / rho
    return blocks


def grasp_map(g, torque_scale=None):
    """Grasp map G (6 x 3n) from stacked contact-frame forces to object wrenches."""
    return np.hstack(list(contact_blocks(g, torque_scale)))


def grasp_jacobian_product(g, torque_scale=None):
    """G_J = G @ J, shape (6, n_q)."""
    if g.jacobian is None:
        raise MissingJacobian(f"grasp {g.grasp_id!r} has no hand Jacobian")
    G = grasp_map(g, torque_scale)
    if g.jacobian.shape[0] != G.shape[1]:
        raise InvalidInput("hand Jacobian row count does not match 3 * contacts")
    return G @ g.jacobian


def order_polygon(points):
    """Counter-clockwise ordering (about the best-fit plane normal) of 3+ points.

    The traversal starts at the point with the smallest polar angle in the
    plane frame, so the result does not depend on input order.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 3:
        return points.copy()
    xy = best_fit_plane(points)[0]
    angle = np.arctan2(xy[:, 1], xy[:, 0])
    radius = np.hypot(xy[:, 0], xy[:, 1])
    order = np.lexsort((radius, angle))
    return points[order]


def contact_polygon(g):
    """Polygon through the contact points; fewer than 3 contacts give a degenerate one."""
    return Polygon3D(order_polygon(g.positions))


def friction_cone_edges(mu, cone_edges=DEFAULT_CONE_EDGES, phase=0.0):
    """Unit force directions, in the contact frame, spanning the discretised cone.

    The first edge leans towards angle ``phase`` in the contact x-y plane.
    """
    if cone_edges < 3:
        raise InvalidInput(f"cone_edges must be >= 3, got {cone_edges}")
    if mu == 0:
        return np.array([[0.0, 0.0, 1.0]])
    phi = phase + 2.0 * np.pi * np.arange(cone_edges) / cone_edges
    f = np.column_stack([mu * np.cos(phi), mu * np.sin(phi), np.ones(cone_edges)])
    return f / np.sqrt(1.0 + mu * mu)


def cone_phases(g):
    """Per-contact cone phase: the tangent direction towards the contact centroid.

    Tying the first cone edge to the grasp geometry rather than to the frame
    rule makes the wrench set rotate with the grasp.  Contacts whose centroid
    direction is (nearly) along the normal fall back to phase 0.
    """
    pos = g.positions
    centroid = pos.mean(axis=0)
    phases = np.zeros(len(pos))
    for i, c in enumerate(g.contacts):
        ref = centroid - pos[i]
        r = contact_frame(c)
        t = ref - (ref @ r[:, 2]) * r[:, 2]
        if np.linalg.norm(t) > 1e-9 * max(np.linalg.norm(ref), 1e-300):
            phases[i] = np.arctan2(t @ r[:, 1], t @ r[:, 0])
    return phases


def wrench_set(g, cone_edges=DEFAULT_CONE_EDGES, torque_scale=None):
    """Wrenches (N x 6) produced by unit forces along every contact's cone edges."""
    blocks = contact_blocks(g, torque_scale)
    out = [friction_cone_edges(c.mu, cone_edges, phase) @ b.T
           for c, b, phase in zip(g.contacts, blocks, cone_phases(g))]
    return np.vstack(out)
