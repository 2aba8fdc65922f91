import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from graspq.graspmodel import Contact, GraspInstance, HandPosture, NormConstants, ObjectModel  # noqa: E402


def make_object(radius=0.05, **extra):
    return ObjectModel("ball", np.zeros(3),
                       norm_constants=NormConstants(distance_max=radius, area_max=np.pi * radius**2, **extra))


def ring_contacts(radius=0.05, n=3, z=0.0, mu=0.5, phase=0.0):
    """n contacts evenly spaced on a horizontal circle of the sphere, normals inward."""
    rho = np.sqrt(radius**2 - z**2)
    out = []
    for i in range(n):
        t = phase + 2 * np.pi * i / n
        p = np.array([rho * np.cos(t), rho * np.sin(t), z])
        out.append(Contact(p, -p / np.linalg.norm(p), mu))
    return out


def mid_posture(n_q=7):
    return HandPosture(np.ones(n_q), np.zeros(n_q), 2 * np.ones(n_q))


def make_grasp(contacts=None, posture=None, obj=None, jacobian=None, grasp_id="g"):
    contacts = ring_contacts() if contacts is None else contacts
    posture = mid_posture() if posture is None else posture
    return GraspInstance(grasp_id, contacts, posture, obj or make_object(), jacobian)


@pytest.fixture
def ideal_grasp():
    rng = np.random.default_rng(3)
    return make_grasp(jacobian=rng.normal(size=(9, 7)))


@pytest.fixture
def single_contact_grasp():
    c = Contact([0.05, 0.0, 0.0], [-1.0, 0.0, 0.0], 0.0)
    return make_grasp([c])


def serial_chain_jacobian(contacts, joints_per_finger=2, seed=0):
    """Hand Jacobian of one revolute serial chain per contact.

    Joint axes and origins are random; the column of joint j on finger f is
    ``axis_j x (p_f - origin_j)`` in the rows of contact f and zero elsewhere.
    """
    rng = np.random.default_rng(seed)
    n = len(contacts)
    J = np.zeros((3 * n, n * joints_per_finger))
    for f, c in enumerate(contacts):
        for k in range(joints_per_finger):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            origin = c.position + rng.normal(scale=0.05, size=3)
            J[3 * f:3 * f + 3, f * joints_per_finger + k] = np.cross(axis, c.position - origin)
    return J


# one summary line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for text in ACCEPTANCE_LINES:
            terminalreporter.write_line(text)
