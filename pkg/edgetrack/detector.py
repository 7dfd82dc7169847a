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
Pose initialization from correspondence frames.

A correspondence frame holds a per-pixel class mask and one joint set of unit
vector fields pointing at the projected keypoints. Keypoints are located by
RANSAC voting on ray intersections, the pose follows from PnP and is accepted
when enough keypoints reproject close to their estimates.
"""

import logging
from dataclasses import dataclass

import cv2
import numpy as np

from edgetrack.exceptions import DegenerateGeometry, ObjectNotVisible, TrackingError
from edgetrack.geometry import (MotionDelta, Pose, apply_delta, motion_jacobian, project,
                                solve_normal_equations)
from edgetrack.raster import render


logger = logging.getLogger(__name__)

# ray pairs with |sin(angle)| below this are treated as parallel
PARALLEL_SIN = 1e-3
GAUSS_NEWTON_ITERATIONS = 10
_VOTE_CHUNK = 16


@dataclass(frozen=True, eq=False)
class CorrespondenceFrame:
    """class_mask is (H, W) uint16, fields is (k, H, W, 2) float32."""

    class_mask: np.ndarray
    fields: np.ndarray
    n_classes: int = 0

    def __post_init__(self):
        mask = np.asarray(self.class_mask, dtype=np.uint16)
        fields = np.asarray(self.fields, dtype=np.float32)
        if fields.ndim != 4 or fields.shape[1:3] != mask.shape or fields.shape[3] != 2:
            raise ValueError('fields must have shape (k, H, W, 2) matching the class mask')
        object.__setattr__(self, 'class_mask', mask)
        object.__setattr__(self, 'fields', fields)
        if not self.n_classes:
            object.__setattr__(self, 'n_classes', int(mask.max()) if mask.size else 0)

    @property
    def width(self):
        return self.class_mask.shape[1]

    @property
    def height(self):
        return self.class_mask.shape[0]

    @property
    def k(self):
        return self.fields.shape[0]


@dataclass(frozen=True, eq=False)
class KeypointEstimate:
    position: np.ndarray
    votes: int
    inlier_ratio: float

    @classmethod
    def empty(cls):
        return cls(np.full(2, np.nan), 0, 0.0)


@dataclass(frozen=True)
class DetectionConfig:
    min_votes: int = 25
    max_reproj_px: float = 12.0
    min_valid_points: int = 4
    ransac_hypotheses: int = 128
    inlier_cos_threshold: float = 0.99

    def __post_init__(self):
        if self.min_valid_points < 4:
            raise ValueError('min_valid_points must be at least 4')
        if self.min_votes < 0 or self.ransac_hypotheses < 1:
            raise ValueError('min_votes >= 0 and ransac_hypotheses >= 1 required')
        if not self.max_reproj_px > 0:
            raise ValueError('max_reproj_px must be positive')
        if not -1.0 <= self.inlier_cos_threshold <= 1.0:
            raise ValueError('inlier_cos_threshold must lie in [-1, 1]')


@dataclass(frozen=True, eq=False)
class Detection:
    pose: object
    estimates: list
    accepted: bool
    used_keypoints: int


def _inliers(hypotheses, pixels, vectors, threshold):
    """Boolean (n_hyp, n_pix) inlier matrix. A pixel lying on a hypothesis
    agrees with it."""

    out = np.empty((len(hypotheses), len(pixels)), dtype=bool)
    for s in range(0, len(hypotheses), _VOTE_CHUNK):
        diff = hypotheses[s:s + _VOTE_CHUNK, None, :] - pixels[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        dot = np.einsum('hnc,nc->hn', diff, vectors)
        with np.errstate(invalid='ignore', divide='ignore'):
            cos = dot / dist
        out[s:s + _VOTE_CHUNK] = (dist < 1e-9) | (cos >= threshold)
    return out

def _ray_intersection(pixels, vectors):
    """Least squares point closest to all rays; None when they are parallel."""

    proj = np.eye(2)[None] - vectors[:, :, None] * vectors[:, None, :]
    a = proj.sum(axis=0)
    b = np.einsum('nij,nj->i', proj, pixels)
    if len(pixels) < 2:
        return None
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e8:
        return None
    return np.linalg.solve(a, b)

def vote_keypoints(frame, object_id, cfg=None, seed=0):
    """One KeypointEstimate per keypoint of the frame for class `object_id`.

    Every keypoint draws from its own random stream seeded with (seed, index).
    """

    if cfg is None:
        cfg = DetectionConfig()
    ys, xs = np.nonzero(frame.class_mask == object_id)
    n = len(xs)
    if n < 2:
        return [KeypointEstimate.empty() for _ in range(frame.k)]
    pixels = np.stack([xs, ys], axis=1).astype(np.float64)
    estimates = []
    for kp in range(frame.k):
        rng = np.random.default_rng([seed, kp])
        vectors = frame.fields[kp, ys, xs].astype(np.float64)
        norms = np.linalg.norm(vectors, axis=1)
        vectors = vectors / np.where(norms > 0, norms, 1.0)[:, None]
        i = rng.integers(0, n, size=cfg.ransac_hypotheses)
        j = rng.integers(0, n, size=cfg.ransac_hypotheses)
        vi, vj = vectors[i], vectors[j]
        cross = vi[:, 0] * vj[:, 1] - vi[:, 1] * vj[:, 0]
        ok = (np.abs(cross) >= PARALLEL_SIN) & (i != j)
        if not ok.any():
            estimates.append(KeypointEstimate.empty())
            continue
        d = pixels[j[ok]] - pixels[i[ok]]
        along = (d[:, 0] * vj[ok, 1] - d[:, 1] * vj[ok, 0]) / cross[ok]
        hypotheses = pixels[i[ok]] + along[:, None] * vi[ok]

        inliers = _inliers(hypotheses, pixels, vectors, cfg.inlier_cos_threshold)
        votes = inliers.sum(axis=1)
        best = int(np.argmax(votes))
        position = hypotheses[best]
        chosen = inliers[best]
        refined = _ray_intersection(pixels[chosen], vectors[chosen])
        if refined is not None:
            position = refined
        estimates.append(KeypointEstimate(position=position, votes=int(votes[best]),
                                          inlier_ratio=float(votes[best]) / n))
    return estimates

def _reprojection(pose, points_3d, points_2d, intr):
    return np.linalg.norm(project(pose.transform(points_3d), intr) - points_2d, axis=1)

def solve_pnp(points_3d, points_2d, intr):
    """EPnP (IPPE for planar point sets) followed by Gauss-Newton on the
    reprojection error."""

    points_3d = np.array(points_3d, dtype=np.float64).reshape(-1, 3)
    points_2d = np.array(points_2d, dtype=np.float64).reshape(-1, 2)
    if len(points_3d) != len(points_2d):
        raise ValueError('point counts differ')
    if len(points_3d) < 4:
        raise DegenerateGeometry('degenerate geometry: fewer than 4 correspondences')
    sv = np.linalg.svd(points_3d - points_3d.mean(axis=0), compute_uv=False)
    if sv[0] == 0 or sv[1] < 1e-9 * sv[0]:
        raise DegenerateGeometry('degenerate geometry: collinear points')
    planar = sv[2] < 1e-6 * sv[0]
    flag = cv2.SOLVEPNP_IPPE if planar else cv2.SOLVEPNP_EPNP
    ok, rvec, tvec = cv2.solvePnP(points_3d, points_2d, intr.matrix, None, flags=flag)
    if not ok:
        raise DegenerateGeometry('degenerate geometry: PnP failed')
    pose = Pose(cv2.Rodrigues(rvec)[0], tvec.ravel())

    error = np.sum(_reprojection(pose, points_3d, points_2d, intr) ** 2)
    for _ in range(GAUSS_NEWTON_ITERATIONS):
        cam = pose.transform(points_3d)
        r = (points_2d - project(cam, intr)).ravel()
        jac = motion_jacobian(cam, pose.translation, intr).reshape(-1, 6)
        step = solve_normal_equations(jac.T @ jac, jac.T @ r, 1e12, DegenerateGeometry,
                                      'degenerate geometry')
        candidate = apply_delta(pose, MotionDelta.from_vector(step))
        try:
            new_error = np.sum(_reprojection(candidate, points_3d, points_2d, intr) ** 2)
        except TrackingError:
            break
        if not new_error < error:
            break
        pose, error = candidate, new_error
    return pose

def validate_detection(pose, points_3d, points_2d, intr, cfg=None):
    if cfg is None:
        cfg = DetectionConfig()
    try:
        errors = _reprojection(pose, np.asarray(points_3d, dtype=np.float64).reshape(-1, 3),
                               np.asarray(points_2d, dtype=np.float64).reshape(-1, 2), intr)
    except TrackingError:
        return False
    return int(np.count_nonzero(errors < cfg.max_reproj_px)) >= cfg.min_valid_points

def detect_pose(frame, object_id, keypoints, intr, cfg=None, seed=0):
    """Vote, solve PnP on keypoints with enough votes and validate."""

    if cfg is None:
        cfg = DetectionConfig()
    if keypoints.k != frame.k:
        raise ValueError('frame has {} keypoint fields, keypoint set has {}'.format(
            frame.k, keypoints.k))
    estimates = vote_keypoints(frame, object_id, cfg, seed)
    usable = np.array([e.votes >= cfg.min_votes for e in estimates], dtype=bool)
    count = int(usable.sum())
    if count < cfg.min_valid_points:
        logger.debug('class %d: %d usable keypoints, detection skipped', object_id, count)
        return Detection(None, estimates, False, count)
    points_3d = keypoints.points[usable]
    points_2d = np.array([e.position for e, u in zip(estimates, usable) if u])
    try:
        pose = solve_pnp(points_3d, points_2d, intr)
    except TrackingError as exc:
        logger.debug('class %d: PnP failed: %s', object_id, exc)
        return Detection(None, estimates, False, count)
    accepted = validate_detection(pose, points_3d, points_2d, intr, cfg)
    return Detection(pose, estimates, accepted, count)

def synth_frame(entries, intr, noise_deg=0.0, outlier_rate=0.0, seed=0):
    """Oracle correspondence frame for a list of (Mesh, KeypointSet, Pose).

    Class ids are 1-based positions in `entries`. Entries whose keypoint set
    is None only occlude: they are labelled but get no vectors. Field angles
    get von Mises noise with a spread of `noise_deg`; a random `outlier_rate`
    fraction of the pixels gets uniformly random directions instead.
    """

    if not entries:
        raise ValueError('no objects')
    ks = {keys.k for _, keys, _ in entries if keys is not None}
    if len(ks) != 1:
        raise ValueError('joint vector fields need the same keypoint count for every object')
    if not 0.0 <= outlier_rate <= 1.0:
        raise ValueError('outlier_rate must lie in [0, 1]')
    rendered = render([(mesh, pose) for mesh, _, pose in entries], intr)
    mask = rendered.object_id
    k = ks.pop()
    fields = np.zeros((k, intr.height, intr.width, 2), dtype=np.float32)
    rng = np.random.default_rng(seed)
    kappa = 1.0 / np.radians(noise_deg) ** 2 if noise_deg > 0 else None
    for oid, (_, keys, pose) in enumerate(entries, start=1):
        ys, xs = np.nonzero(mask == oid)
        if keys is None or len(xs) == 0:
            continue
        targets = project(pose.transform(keys.points), intr)
        pixels = np.stack([xs, ys], axis=1).astype(np.float64)
        for kp in range(k):
            diff = targets[kp] - pixels
            angle = np.arctan2(diff[:, 1], diff[:, 0])
            angle[np.all(diff == 0, axis=1)] = 0.0
            if kappa is not None:
                angle = angle + rng.vonmises(0.0, kappa, size=len(angle))
            if outlier_rate > 0:
                outlier = rng.random(len(angle)) < outlier_rate
                angle[outlier] = rng.uniform(-np.pi, np.pi, size=int(outlier.sum()))
            fields[kp, ys, xs, 0] = np.cos(angle)
            fields[kp, ys, xs, 1] = np.sin(angle)
    return CorrespondenceFrame(class_mask=mask, fields=fields, n_classes=len(entries))

def synth_correspondences(mesh, keys, gt, intr, noise_deg=0.0, outlier_rate=0.0, seed=0):
    frame = synth_frame([(mesh, keys, gt)], intr, noise_deg, outlier_rate, seed)
    if not np.any(frame.class_mask == 1):
        raise ObjectNotVisible('object not visible')
    return frame

def crop_frame(frame, offset, width, height):
    """Sub-frame whose top-left pixel is `offset` (x, y); vectors are kept
    since directions do not change under translation."""

    x0, y0 = int(offset[0]), int(offset[1])
    return CorrespondenceFrame(class_mask=frame.class_mask[y0:y0 + height, x0:x0 + width],
                               fields=frame.fields[:, y0:y0 + height, x0:x0 + width],
                               n_classes=frame.n_classes)
