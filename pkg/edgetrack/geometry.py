#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# EdgeTrack: model-based 6DoF object detection and tracking.

# Copyright (C) 2026  EdgeTrack developers

# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.

# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.

# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.


"""
Pose algebra, pinhole projection and the linearized rigid-motion model.

Poses map object coordinates to the camera frame, p = R x + t. A motion
increment (dr, dt) acts on camera-frame points as

    p = exp([dr]x) (p_hat - t) + t + dt

i.e. the rotation pivots around the current object center t. Every Jacobian
in the package is taken with respect to this parameterization, ordered as
(dr_x, dr_y, dr_z, dt_x, dt_y, dt_z).
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist
from scipy.spatial.transform import Rotation

from edgetrack.exceptions import BehindCamera


# minimum depth accepted by the projection
MIN_DEPTH = 1e-9


def _frozen(array, shape=None):
    a = np.array(array, dtype=np.float64)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a

def _rotvec_matrix(rotvec):
    # scipy's Cython routines reject read-only buffers, hand them a copy
    return Rotation.from_rotvec(np.array(rotvec, dtype=np.float64)).as_matrix()

def orthonormalize(rotation):
    """Project a 3x3 matrix onto the closest rotation (SVD polar factor)."""

    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r

def skew(v):
    """Cross-product matrices [v]x for an array of 3-vectors (..., 3)."""

    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera. Pixel centers sit on integer coordinates."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError('focal lengths must be positive')
        if self.width <= 0 or self.height <= 0:
            raise ValueError('image size must be positive')

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def scaled(self, level):
        """Intrinsics of pyramid level `level` (each level halves the image,
        keeping pixel centers aligned: c' = (c + 0.5) / 2 - 0.5)."""

        intr = self
        for _ in range(level):
            intr = Intrinsics(fx=intr.fx / 2.0, fy=intr.fy / 2.0,
                              cx=(intr.cx + 0.5) / 2.0 - 0.5,
                              cy=(intr.cy + 0.5) / 2.0 - 0.5,
                              width=(intr.width + 1) // 2,
                              height=(intr.height + 1) // 2)
        return intr

    def shifted(self, offset, width, height):
        """Intrinsics of a crop whose top-left pixel is `offset` (x, y)."""

        return Intrinsics(fx=self.fx, fy=self.fy,
                          cx=self.cx - offset[0], cy=self.cy - offset[1],
                          width=int(width), height=int(height))


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'rotation', _frozen(self.rotation, (3, 3)))
        object.__setattr__(self, 'translation', _frozen(self.translation, (3,)))

    @classmethod
    def from_rotvec(cls, rotvec, translation):
        return cls(Rotation.from_rotvec(np.array(rotvec, dtype=np.float64)).as_matrix(),
                   translation)

    @classmethod
    def from_matrix(cls, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def rotvec(self):
        return Rotation.from_matrix(np.array(self.rotation)).as_rotvec()

    def as_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def transform(self, points):
        """Object-frame points (..., 3) to the camera frame."""

        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def inverse(self):
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def __repr__(self):
        return 'Pose(rotvec={}, translation={})'.format(
            np.array2string(self.rotvec(), precision=5),
            np.array2string(self.translation, precision=5))


@dataclass(frozen=True, eq=False)
class MotionDelta:
    dr: np.ndarray
    dt: np.ndarray

    def __post_init__(self):
        dr = _frozen(self.dr, (3,))
        dt = _frozen(self.dt, (3,))
        if not (np.all(np.isfinite(dr)) and np.all(np.isfinite(dt))):
            raise ValueError('motion delta must be finite')
        object.__setattr__(self, 'dr', dr)
        object.__setattr__(self, 'dt', dt)

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=np.float64).reshape(6)
        return cls(x[:3], x[3:])

    def as_vector(self):
        return np.concatenate([self.dr, self.dt])

    def __neg__(self):
        return MotionDelta(-self.dr, -self.dt)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh in object coordinates, centered at its bounding box."""

    vertices: np.ndarray
    triangles: np.ndarray
    diameter: float

    @classmethod
    def from_arrays(cls, vertices, triangles, center=True):
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if len(vertices) == 0:
            raise ValueError('mesh has no vertices')
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError('triangle index out of range')
        if center:
            vertices = vertices - 0.5 * (vertices.min(axis=0) + vertices.max(axis=0))
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        return cls(vertices, triangles, mesh_diameter(vertices))

    def __repr__(self):
        return 'Mesh({} vertices, {} triangles, diameter={:.4f})'.format(
            len(self.vertices), len(self.triangles), self.diameter)


@dataclass(frozen=True, eq=False)
class KeypointSet:
    """points[0] is the object center, the rest are mesh vertices."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'points', _frozen(self.points).reshape(-1, 3))

    @property
    def k(self):
        return len(self.points)


def mesh_diameter(vertices):
    """Largest pairwise vertex distance (searched on the convex hull)."""

    vertices = np.asarray(vertices, dtype=np.float64)
    if len(vertices) < 2:
        return 0.0
    candidates = vertices
    if len(vertices) > 64:
        try:
            candidates = vertices[ConvexHull(vertices).vertices]
        except (QhullError, ValueError):
            # flat or degenerate point sets: fall back to all vertices
            pass
    return float(pdist(candidates).max())

def project(p, intr):
    """Project camera-frame points (..., 3) to pixels (..., 2)."""

    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if np.any(~(z > MIN_DEPTH)):
        raise BehindCamera('behind camera')
    return np.stack([intr.fx * p[..., 0] / z + intr.cx,
                     intr.fy * p[..., 1] / z + intr.cy], axis=-1)

def back_project(x, depth, intr):
    """Lift pixels (..., 2) with metric depths (...) to camera-frame points."""

    x = np.asarray(x, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(~(depth > 0)):
        raise BehindCamera('non-positive depth')
    return np.stack([(x[..., 0] - intr.cx) / intr.fx * depth,
                     (x[..., 1] - intr.cy) / intr.fy * depth,
                     np.broadcast_to(depth, x.shape[:-1])], axis=-1)

def apply_delta(pose, delta):
    drot = _rotvec_matrix(delta.dr)
    rotation = orthonormalize(drot @ pose.rotation)
    return Pose(rotation, pose.translation + delta.dt)

def transform_contour_points(points, pose, delta):
    """Move camera-frame points with `delta` pivoting about pose's center."""

    drot = _rotvec_matrix(delta.dr)
    t = pose.translation
    return (np.asarray(points, dtype=np.float64) - t) @ drot.T + t + delta.dt

def projection_jacobian(p, intr):
    """d pi(K p) / d p for camera-frame points (..., 3) -> (..., 2, 3)."""

    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    if np.any(~(z > MIN_DEPTH)):
        raise BehindCamera('behind camera')
    out = np.zeros(p.shape[:-1] + (2, 3))
    out[..., 0, 0] = intr.fx / z
    out[..., 0, 2] = -intr.fx * p[..., 0] / z ** 2
    out[..., 1, 1] = intr.fy / z
    out[..., 1, 2] = -intr.fy * p[..., 1] / z ** 2
    return out

def motion_jacobian(p_hat, t, intr):
    """Pixel motion of camera-frame points (..., 3) per unit (dr, dt),
    evaluated at a zero delta. Returns (..., 2, 6)."""

    p_hat = np.asarray(p_hat, dtype=np.float64)
    jp = projection_jacobian(p_hat, intr)
    # d p / d dr = -[p_hat - t]x
    jr = jp @ -skew(p_hat - np.asarray(t, dtype=np.float64))
    return np.concatenate([jr, jp], axis=-1)

def farthest_point_sample(mesh, k):
    """Greedy farthest point sampling seeded with the object center.

    Ties resolve to the lowest vertex index, so the result only depends on
    the vertex array.
    """

    if k < 1:
        raise ValueError('k must be at least 1')
    vertices = mesh.vertices
    if k > len(vertices) + 1:
        raise ValueError('k={} exceeds vertex count + 1 ({})'.format(k, len(vertices) + 1))
    points = [np.zeros(3)]
    min_dist = np.linalg.norm(vertices, axis=1)
    for _ in range(k - 1):
        i = int(np.argmax(min_dist))
        points.append(vertices[i])
        min_dist = np.minimum(min_dist, np.linalg.norm(vertices - vertices[i], axis=1))
    return KeypointSet(np.array(points))

def rotation_error(a, b):
    """Angle of the relative rotation between two poses, in degrees."""

    rel = a.rotation.T @ b.rotation
    return float(np.degrees(Rotation.from_matrix(rel).magnitude()))

def translation_error(a, b):
    return float(np.linalg.norm(a.translation - b.translation))

def solve_normal_equations(ata, atb, max_condition, error_cls, message):
    """Solve the symmetric system ata x = atb after Jacobi scaling.

    Raises `error_cls(message)` when the scaled system is singular or its
    condition number exceeds `max_condition`.
    """

    ata = np.asarray(ata, dtype=np.float64)
    atb = np.asarray(atb, dtype=np.float64)
    diag = np.diag(ata)
    if np.any(~(diag > 0)):
        raise error_cls(message)
    scale = np.sqrt(diag)
    scaled = ata / np.outer(scale, scale)
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > max_condition:
        raise error_cls(message)
    return np.linalg.solve(scaled, atb / scale) / scale
