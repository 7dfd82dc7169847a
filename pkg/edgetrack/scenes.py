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
Synthetic scenes: procedural families of similar meshes, keyframed object
trajectories, occluders and rendered frames with ground truth.
"""

import os
import logging
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation, Slerp

from edgetrack.detector import synth_frame, CorrespondenceFrame
from edgetrack.formats import (PoseLogRow, intrinsics_from_dict, write_manifest, write_obj,
                               write_pgm, write_pose_log, write_vff)
from edgetrack.geometry import Mesh, Pose, farthest_point_sample
from edgetrack.raster import render
from edgetrack.workers import run_workers


logger = logging.getLogger(__name__)

BACKGROUNDS = ('constant', 'gradient', 'texture')


def box_mesh(center, half_extents, subdivisions=1):
    """Axis aligned box, every face split into subdivisions^2 quads with
    outward winding."""

    if subdivisions < 1:
        raise ValueError('subdivisions must be at least 1')
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(half_extents, dtype=np.float64)
    if np.any(~(half > 0)):
        raise ValueError('half extents must be positive')
    s = int(subdivisions)
    grid = np.linspace(-1.0, 1.0, s + 1)
    gu, gv = np.meshgrid(grid, grid, indexing='ij')
    quads = [(i * (s + 1) + j, (i + 1) * (s + 1) + j, (i + 1) * (s + 1) + j + 1,
              i * (s + 1) + j + 1) for i in range(s) for j in range(s)]
    vertices, triangles = [], []
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for sign in (1.0, -1.0):
            face = np.zeros((gu.size, 3))
            face[:, axis] = sign
            face[:, u] = gu.ravel()
            face[:, v] = gv.ravel()
            base = sum(len(f) for f in vertices)
            vertices.append(center + face * half)
            for a, b, c, d in quads:
                if sign > 0:
                    triangles += [(base + a, base + b, base + c), (base + a, base + c, base + d)]
                else:
                    triangles += [(base + a, base + c, base + b), (base + a, base + d, base + c)]
    return np.concatenate(vertices), np.array(triangles, dtype=np.int64)

def sphere_mesh(radius, subdivisions=6):
    """Cube sphere: a subdivided cube pushed onto the sphere."""

    if not radius > 0:
        raise ValueError('radius must be positive')
    vertices, triangles = box_mesh(np.zeros(3), np.ones(3), subdivisions)
    vertices = radius * vertices / np.linalg.norm(vertices, axis=1, keepdims=True)
    return Mesh.from_arrays(vertices, triangles)

def combine(parts):
    """Merge (vertices, triangles) parts into a single bbox-centered mesh."""

    vertices, triangles, offset = [], [], 0
    for v, t in parts:
        vertices.append(v)
        triangles.append(t + offset)
        offset += len(v)
    return Mesh.from_arrays(np.concatenate(vertices), np.concatenate(triangles))

def mesh_distance(a, b):
    """Mean distance from every vertex of `a` to the closest vertex of `b`."""

    dist, _ = cKDTree(b.vertices).query(a.vertices)
    return float(np.mean(dist))


@dataclass(frozen=True)
class FamilyParams:
    """Node element: cube body, six axial connector stubs and up to 24
    optional side pins (4 per face)."""

    body: float = 0.08
    stub_length: float = 0.03
    stub_width: float = 0.02
    pin_size: float = 0.015
    pin_protrusion: float = 0.012
    pin_offset: float = 0.02
    subdivisions: int = 3

    def __post_init__(self):
        if min(self.body, self.stub_length, self.stub_width, self.pin_size,
               self.pin_protrusion, self.pin_offset) <= 0 or self.subdivisions < 1:
            raise ValueError('family sizes must be positive')
        if self.stub_width >= self.body:
            raise ValueError('stubs must be narrower than the body')
        if self.pin_offset + self.pin_size / 2 >= self.body / 2:
            raise ValueError('pins must lie on the body faces')
        if self.pin_offset - self.pin_size / 2 <= self.stub_width / 2:
            raise ValueError('pins overlap the connector stubs')
        if self.pin_protrusion >= self.stub_length:
            raise ValueError('pins must not reach beyond the stubs')

    @property
    def slots(self):
        return 24


def _pin_slots(params):
    slots = []
    surface = params.body / 2 + params.pin_protrusion / 2
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for sign in (1.0, -1.0):
            for su in (1.0, -1.0):
                for sv in (1.0, -1.0):
                    c = np.zeros(3)
                    c[axis] = sign * surface
                    c[u] = su * params.pin_offset
                    c[v] = sv * params.pin_offset
                    half = np.full(3, params.pin_size / 2)
                    half[axis] = params.pin_protrusion / 2
                    slots.append((c, half))
    return slots

def family_member(params, pins):
    """Mesh of the node element with the pins whose flags are set."""

    parts = [box_mesh(np.zeros(3), np.full(3, params.body / 2), params.subdivisions)]
    for axis in range(3):
        for sign in (1.0, -1.0):
            c = np.zeros(3)
            c[axis] = sign * (params.body / 2 + params.stub_length / 2)
            half = np.full(3, params.stub_width / 2)
            half[axis] = params.stub_length / 2
            parts.append(box_mesh(c, half))
    for on, (c, half) in zip(pins, _pin_slots(params)):
        if on:
            parts.append(box_mesh(c, half))
    return combine(parts)

def generate_family(params, n, seed=0):
    """`n` pairwise distinct node elements with seeded random pin layouts."""

    if n < 2:
        raise ValueError('a family needs at least two members')
    if n > 2 ** params.slots:
        raise ValueError('at most {} distinct members'.format(2 ** params.slots))
    rng = np.random.default_rng(seed)
    layouts, seen = [], set()
    while len(layouts) < n:
        pins = tuple(int(b) for b in rng.integers(0, 2, size=params.slots))
        if pins in seen:
            continue
        seen.add(pins)
        layouts.append(pins)
    return [family_member(params, pins) for pins in layouts]

def perturb_pose(pose, sigma_rot_deg, sigma_trans_frac, rng):
    """Random rotation about the object center (uniform axis, normal angle)
    and a normal translation scaled by the object depth."""

    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.normal(0.0, sigma_rot_deg))
    dt = rng.normal(0.0, sigma_trans_frac * abs(pose.translation[2]), size=3)
    rotation = Rotation.from_rotvec(axis * angle).as_matrix() @ pose.rotation
    return Pose(rotation, pose.translation + dt)


class Trajectory:
    """Keyframed pose track, spherical interpolation of the rotation and
    linear interpolation of the translation. Frames outside the keyframes
    hold the nearest keyframe."""

    def __init__(self, keyframes):
        if not keyframes:
            raise ValueError('a trajectory needs at least one keyframe')
        keyframes = sorted(keyframes, key=lambda k: k[0])
        self.frames = np.array([k[0] for k in keyframes], dtype=np.float64)
        if len(np.unique(self.frames)) != len(self.frames):
            raise ValueError('duplicate keyframe')
        self.rotations = Rotation.from_rotvec(np.array([k[1] for k in keyframes], dtype=np.float64))
        self.translations = np.array([k[2] for k in keyframes], dtype=np.float64)
        self.slerp = Slerp(self.frames, self.rotations) if len(keyframes) > 1 else None

    def pose_at(self, frame):
        f = float(np.clip(frame, self.frames[0], self.frames[-1]))
        if self.slerp is None:
            return Pose(self.rotations.as_matrix()[0], self.translations[0])
        translation = np.array([np.interp(f, self.frames, self.translations[:, i])
                                for i in range(3)])
        return Pose(self.slerp([f]).as_matrix()[0], translation)


@dataclass(frozen=True)
class Occluder:
    """Rectangle [x0, x1) x [y0, y1) painted over frames [start, end]."""

    rect: tuple
    start: int
    end: int
    value: float = 0.0

    def active(self, frame):
        return self.start <= frame <= self.end


@dataclass
class ScriptObject:
    object_id: str
    mesh: object
    trajectory: Trajectory


@dataclass
class SceneScript:
    intr: object
    frames: int
    objects: list
    distractors: list = field(default_factory=list)
    occluders: list = field(default_factory=list)
    noise_sigma: float = 0.0
    background: str = 'constant'
    background_level: float = 0.1
    seed: int = 0
    keypoints: int = 9
    vff: bool = True
    vff_noise_deg: float = 0.0
    vff_outlier_rate: float = 0.0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError('frames must be at least 1')
        if not self.objects:
            raise ValueError('a script needs at least one object')
        if self.background not in BACKGROUNDS:
            raise ValueError('background must be one of {}'.format(', '.join(BACKGROUNDS)))
        if self.noise_sigma < 0:
            raise ValueError('noise_sigma must be non-negative')

    @classmethod
    def from_dict(cls, doc):
        """Script from its JSON form. Meshes are {"family": index},
        {"box": [hx, hy, hz]} or {"sphere": radius}; keyframes are
        {"frame": f, "rotvec": [...], "translation": [...]}."""

        family_doc = doc.get('family', {})
        params = FamilyParams(**{k: v for k, v in family_doc.items() if k not in ('size', 'seed')})
        family = []

        def mesh_for(spec):
            if 'family' in spec:
                index = int(spec['family'])
                if not family:
                    size = max(int(family_doc.get('size', 13)), index + 1)
                    family.extend(generate_family(params, size, int(family_doc.get('seed', 0))))
                return family[index]
            if 'box' in spec:
                v, t = box_mesh(np.zeros(3), np.asarray(spec['box'], dtype=np.float64),
                                int(spec.get('subdivisions', 1)))
                return Mesh.from_arrays(v, t)
            if 'sphere' in spec:
                return sphere_mesh(float(spec['sphere']))
            raise ValueError('unknown mesh specification {!r}'.format(spec))

        def track(entry, default_id):
            keyframes = [(k['frame'], k['rotvec'], k['translation']) for k in entry['keyframes']]
            return ScriptObject(str(entry.get('id', default_id)), mesh_for(entry['mesh']),
                                Trajectory(keyframes))

        return cls(intr=intrinsics_from_dict(doc['intrinsics']),
                   frames=int(doc['frames']),
                   objects=[track(o, i + 1) for i, o in enumerate(doc['objects'])],
                   distractors=[track(o, 'distractor-{}'.format(i))
                                for i, o in enumerate(doc.get('distractors', []))],
                   occluders=[Occluder(tuple(o['rect']), int(o['start']), int(o['end']),
                                       float(o.get('value', 0.0)))
                              for o in doc.get('occluders', [])],
                   noise_sigma=float(doc.get('noise_sigma', 0.0)),
                   background=doc.get('background', 'constant'),
                   background_level=float(doc.get('background_level', 0.1)),
                   seed=int(doc.get('seed', 0)),
                   keypoints=int(doc.get('keypoints', 9)),
                   vff=bool(doc.get('vff', True)),
                   vff_noise_deg=float(doc.get('vff_noise_deg', 0.0)),
                   vff_outlier_rate=float(doc.get('vff_outlier_rate', 0.0)))


@dataclass
class Sequence:
    frames: list
    gt: list
    vff: list
    meshes: dict
    keypoints: dict


def make_background(script):
    height, width = script.intr.height, script.intr.width
    level = script.background_level
    if script.background == 'constant':
        return np.full((height, width), level)
    if script.background == 'gradient':
        ramp = np.linspace(0.5 * level, 1.5 * level, width)
        return np.tile(ramp, (height, 1))
    # value noise: a coarse random grid smoothly upsampled
    rng = np.random.default_rng([script.seed, 0xB6])
    coarse = rng.uniform(0.0, 2.0 * level, size=(max(2, height // 16), max(2, width // 16)))
    return np.clip(cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC),
                   0.0, 1.0)

def _render_frame(script, background, keypoints, index):
    intr = script.intr
    poses = [o.trajectory.pose_at(index) for o in script.objects]
    extra = [d.trajectory.pose_at(index) for d in script.distractors]
    scene = [(o.mesh, p) for o, p in zip(script.objects, poses)] + \
            [(d.mesh, p) for d, p in zip(script.distractors, extra)]
    rendered = render(scene, intr)
    image = background.copy()
    image[rendered.silhouette] = rendered.intensity[rendered.silhouette]
    hidden = np.zeros(image.shape, dtype=bool)
    for occ in script.occluders:
        if occ.active(index):
            x0, y0, x1, y1 = (int(v) for v in occ.rect)
            image[max(y0, 0):y1, max(x0, 0):x1] = occ.value
            hidden[max(y0, 0):y1, max(x0, 0):x1] = True
    if script.noise_sigma > 0:
        rng = np.random.default_rng([script.seed, index])
        image = image + rng.normal(0.0, script.noise_sigma, size=image.shape)
    image = np.clip(image, 0.0, 1.0)

    frame = None
    if script.vff:
        entries = [(o.mesh, keypoints[o.object_id], p) for o, p in zip(script.objects, poses)] + \
                  [(d.mesh, None, p) for d, p in zip(script.distractors, extra)]
        oracle = synth_frame(entries, intr, script.vff_noise_deg, script.vff_outlier_rate,
                             seed=[script.seed, index, 1])
        mask = oracle.class_mask.copy()
        mask[(mask > len(script.objects)) | hidden] = 0
        fields = oracle.fields.copy()
        fields[:, mask == 0] = 0.0
        frame = CorrespondenceFrame(class_mask=mask, fields=fields,
                                    n_classes=len(script.objects))
    gt = {o.object_id: p for o, p in zip(script.objects, poses)}
    return image, gt, frame

def render_sequence(script, n_workers=None):
    """Render all frames of `script` -> Sequence. Frames are generated in
    parallel; each frame draws its noise from its own (seed, frame) stream."""

    keypoints = {o.object_id: farthest_point_sample(o.mesh, script.keypoints)
                 for o in script.objects}
    background = make_background(script)
    results = run_workers(range(script.frames),
                          lambda i: _render_frame(script, background, keypoints, i), n_workers)
    logger.info('Rendered %d frames of %d object(s)', script.frames, len(script.objects))
    return Sequence(frames=[r[0] for r in results], gt=[r[1] for r in results],
                    vff=[r[2] for r in results] if script.vff else None,
                    meshes={o.object_id: o.mesh for o in script.objects},
                    keypoints=keypoints)

def gt_rows(sequence):
    return [PoseLogRow(i, oid, pose, state='gt')
            for i, poses in enumerate(sequence.gt) for oid, pose in poses.items()]

def write_dataset(out_dir, script, sequence):
    """Write a dataset directory: dataset.json, frames/, vff/, meshes/, gt.csv."""

    for sub in ('frames', 'meshes') + (('vff',) if sequence.vff is not None else ()):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    objects = []
    for o in script.objects:
        rel = os.path.join('meshes', '{}.obj'.format(o.object_id))
        write_obj(os.path.join(out_dir, rel), o.mesh)
        objects.append({'id': o.object_id, 'mesh': rel, 'keypoints': script.keypoints})
    for i, image in enumerate(sequence.frames):
        write_pgm(os.path.join(out_dir, 'frames', '{:05d}.pgm'.format(i)), image)
        if sequence.vff is not None:
            write_vff(os.path.join(out_dir, 'vff', '{:05d}.vff'.format(i)), sequence.vff[i])
    write_pose_log(os.path.join(out_dir, 'gt.csv'), gt_rows(sequence))
    write_manifest(os.path.join(out_dir, 'dataset.json'), script.intr, objects,
                   len(sequence.frames), sequence.vff is not None)
