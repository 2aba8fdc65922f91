"""Small numerical kernel shared by the metrics.

Singular values of small dense matrices, planar polygon geometry on
(nearly) coplanar 3D vertex sets, and convex hull volume in d dimensions.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateInput, InvalidInput

EPS_PLANE = 1e-6  # metres; larger off-plane deviations are projected anyway
_JACOBI_TOL = 1e-15
_JACOBI_MAX_SWEEPS = 60


def _as_matrix(m):
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"expected a non-empty 2D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return a


def svd_singular_values(m):
    """Singular values of ``m`` in descending order.

    One-sided (Hestenes) Jacobi: columns are rotated pairwise until they are
    mutually orthogonal, after which the column norms are the singular values.
    Wide matrices are transposed first so at most ``min(rows, cols)`` columns
    are orthogonalised.

    Parameters
    ----------
    m : array_like, shape (rows, cols)

    Returns
    -------
    numpy.ndarray, shape (min(rows, cols),)
    """
    a = _as_matrix(m)
    if a.shape[0] < a.shape[1]:
        a = a.T
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return np.zeros(a.shape[1])
    u = a / scale  # guards the squared norms against under/overflow
    n = u.shape[1]
    for _ in range(_JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up = u[:, p]
                uq = u[:, q]
                alpha = float(up @ up)
                beta = float(uq @ uq)
                gamma = float(up @ uq)
                if gamma == 0.0 or abs(gamma) <= _JACOBI_TOL * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * up - s * uq
                new_q = s * up + c * uq
                u[:, p] = new_p
                u[:, q] = new_q
        if not rotated:
            break
    sv = np.sqrt(np.einsum("ij,ij->j", u, u))
    return scale * np.sort(sv)[::-1]


def frame_from_axis(axis):
    """Right-handed orthonormal frame whose third column is ``axis``.

    The first column is the global axis least aligned with ``axis`` (lowest
    index on ties), orthogonalised, so the result is reproducible.
    """
    z = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(z)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidInput("cannot build a frame from a zero-length axis")
    z = z / norm
    e = np.zeros(3)
    e[int(np.argmin(np.abs(z)))] = 1.0
    x = e - (e @ z) * z
    x /= np.linalg.norm(x)
    y = np.array([z[1] * x[2] - z[2] * x[1], z[2] * x[0] - z[0] * x[2], z[0] * x[1] - z[1] * x[0]])
    return np.column_stack([x, y, z])


def _canonical_sign(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


@dataclass(frozen=True)
class Polygon3D:
    """Ordered polygon vertices in 3D (metres)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise InvalidInput("polygon vertices must be finite")
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    @property
    def coplanar(self):
        return len(self.vertices) < 4 or best_fit_plane(self.vertices)[3] <= EPS_PLANE

    @property
    def degenerate(self):
        """True when the vertices do not span a 2D region."""
        if len(self.vertices) < 3:
            return True
        return abs(_signed_area_2d(best_fit_plane(self.vertices)[0])) <= _area_tol(self.vertices)


def best_fit_plane(points):
    """Project points onto their least-squares plane.

    Returns
    -------
    coords : (n, 2) in-plane coordinates
    origin : (3,) point on the plane (the vertex mean)
    frame : (3, 3) columns are in-plane axes u, v and the unit plane normal
    deviation : largest distance of an input point from the plane
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    origin = p.mean(axis=0)
    centered = p - origin
    if len(p) >= 3:
        _, _, vt = np.linalg.svd(centered)
        normal = vt[2]
    else:
        normal = np.array([0.0, 0.0, 1.0])
    if np.linalg.norm(normal) == 0.0:
        normal = np.array([0.0, 0.0, 1.0])
    frame = frame_from_axis(_canonical_sign(normal))
    coords = centered @ frame[:, :2]
    deviation = float(np.max(np.abs(centered @ frame[:, 2]))) if len(p) else 0.0
    return coords, origin, frame, deviation


def _signed_area_2d(xy):
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _area_tol(vertices):
    span = np.ptp(vertices, axis=0).max() if len(vertices) else 0.0
    return 1e-12 * max(span, 1e-300) ** 2


def polygon_area(poly):
    """Area (m^2) of a polygon after projection to its best-fit plane."""
    poly = poly if isinstance(poly, Polygon3D) else Polygon3D(poly)
    if len(poly) < 3:
        raise DegenerateInput(f"polygon needs at least 3 vertices, got {len(poly)}")
    xy = best_fit_plane(poly.vertices)[0]
    return abs(_signed_area_2d(xy))


def polygon_centroid(poly):
    """Area-weighted centroid; the vertex mean when the polygon has no area."""
    poly = poly if isinstance(poly, Polygon3D) else Polygon3D(poly)
    v = poly.vertices
    if len(v) == 0:
        raise DegenerateInput("polygon has no vertices")
    if len(v) < 3:
        return v.mean(axis=0)
    xy, origin, frame, _ = best_fit_plane(v)
    area = _signed_area_2d(xy)
    if abs(area) <= _area_tol(v):
        return v.mean(axis=0)
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return origin + cx * frame[:, 0] + cy * frame[:, 1]


def polygon_internal_angles(poly):
    """Internal angle at every vertex, in degrees, in vertex order.

    Reflex vertices of simple non-convex polygons get angles above 180.
    """
    poly = poly if isinstance(poly, Polygon3D) else Polygon3D(poly)
    v = poly.vertices
    if len(v) < 3:
        raise DegenerateInput(f"polygon needs at least 3 vertices, got {len(v)}")
    xy = best_fit_plane(v)[0]
    area = _signed_area_2d(xy)
    if abs(area) <= _area_tol(v):
        raise DegenerateInput("polygon vertices are collinear")
    orientation = 1.0 if area > 0 else -1.0
    e_in = xy - np.roll(xy, 1, axis=0)
    e_out = np.roll(xy, -1, axis=0) - xy
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = np.einsum("ij,ij->i", e_in, e_out)
    lengths = np.linalg.norm(e_in, axis=1) * np.linalg.norm(e_out, axis=1)
    if np.any(lengths == 0.0) or np.any(np.abs(cross) <= 1e-12 * lengths):
        raise DegenerateInput("polygon has repeated vertices or collinear adjacent edges")
    turn = np.arctan2(cross, dot)
    return np.degrees(np.pi - orientation * turn)


def affine_rank(points, rtol=1e-10):
    p = np.asarray(points, dtype=float)
    if len(p) < 2:
        return 0
    centered = p - p[0]
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def convex_hull_volume(points):
    """d-dimensional volume of the convex hull of ``points`` (shape (N, d)).

    Points lying in a lower-dimensional flat give 0.  Fewer than d + 1 points
    raise :class:`DegenerateInput`.
    """
    p = np.array(points, dtype=float)
    if p.ndim != 2:
        raise InvalidInput(f"expected an (N, d) point array, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidInput("point cloud has non-finite entries")
    n, d = p.shape
    if d < 2:
        raise InvalidInput("hull volume needs dimension >= 2")
    if n < d + 1:
        raise DegenerateInput(f"{n} points cannot span a {d}-dimensional hull")
    if affine_rank(p) < d:
        return 0.0
    try:
        return float(ConvexHull(p).volume)
    except QhullError:
        # nearly flat input that passed the rank test; joggle instead of failing
        return float(ConvexHull(p, qhull_options="QJ").volume)
