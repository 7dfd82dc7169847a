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
File formats: meshes (ASCII OBJ subset and binary MSH1), binary PGM images,
correspondence frames (VFF1), pose logs (CSV) and pose / manifest JSON.

All writers go through `atomic_write`, so a failed command never leaves a
partial file behind.
"""

import csv
import io
import json
import os
import struct
import tempfile

import numpy as np

from edgetrack.detector import CorrespondenceFrame
from edgetrack.exceptions import FormatError
from edgetrack.geometry import Intrinsics, Mesh, Pose, orthonormalize


MSH_MAGIC = b'MSH1'
VFF_MAGIC = b'VFF1'
VFF_HEADER = struct.Struct('<4s4I')

POSE_LOG_HEADER = (['frame', 'object_id']
                   + ['r{}{}'.format(i, j) for i in range(3) for j in range(3)]
                   + ['tx', 'ty', 'tz', 'e_irls', 'e_dist', 'e_valid', 'e_edge',
                      'state', 'detection_used'])


def atomic_write(path, data):
    """Write bytes to `path` through a temporary file in the same directory."""

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.' + os.path.basename(path), suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

def _read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()

# Meshes

def read_obj(path):
    vertices, faces = [], []
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            try:
                if fields[0] == 'v':
                    if len(fields) < 4:
                        raise ValueError('vertex needs 3 coordinates')
                    vertices.append([float(x) for x in fields[1:4]])
                elif fields[0] == 'f':
                    if len(fields) != 4:
                        raise ValueError('only triangles are supported')
                    # "f 1/1/1 ..." carries texture and normal indices
                    idx = [int(x.split('/')[0]) for x in fields[1:4]]
                    if min(idx) < 1 or max(idx) > len(vertices):
                        raise ValueError('face index out of range')
                    faces.append([i - 1 for i in idx])
            except ValueError as exc:
                raise FormatError(path, str(exc), 'line {}'.format(lineno))
    if not vertices:
        raise FormatError(path, 'no vertices')
    return Mesh.from_arrays(np.array(vertices), np.array(faces, dtype=np.int64).reshape(-1, 3))

def write_obj(path, mesh):
    out = io.StringIO()
    for v in mesh.vertices:
        out.write('v {:.9g} {:.9g} {:.9g}\n'.format(*v))
    for t in mesh.triangles:
        out.write('f {} {} {}\n'.format(*(t + 1)))
    atomic_write(path, out.getvalue().encode('ascii'))

def read_msh(path):
    data = _read_bytes(path)
    if len(data) < 12 or data[:4] != MSH_MAGIC:
        raise FormatError(path, 'bad magic, expected MSH1', 'byte 0')
    nv, nt = struct.unpack_from('<2I', data, 4)
    expected = 12 + 12 * nv + 12 * nt
    if len(data) != expected:
        raise FormatError(path, 'size mismatch: expected {} bytes, got {}'.format(
            expected, len(data)), 'byte {}'.format(min(len(data), expected)))
    vertices = np.frombuffer(data, dtype='<f4', count=3 * nv, offset=12).reshape(nv, 3)
    triangles = np.frombuffer(data, dtype='<u4', count=3 * nt, offset=12 + 12 * nv).reshape(nt, 3)
    if not np.all(np.isfinite(vertices)):
        raise FormatError(path, 'non-finite vertex coordinate')
    try:
        return Mesh.from_arrays(vertices.astype(np.float64), triangles.astype(np.int64))
    except ValueError as exc:
        raise FormatError(path, str(exc))

def write_msh(path, mesh):
    header = MSH_MAGIC + struct.pack('<2I', len(mesh.vertices), len(mesh.triangles))
    atomic_write(path, header + mesh.vertices.astype('<f4').tobytes()
                 + mesh.triangles.astype('<u4').tobytes())

def read_mesh(path):
    with open(path, 'rb') as f:
        magic = f.read(4)
    if magic == MSH_MAGIC:
        return read_msh(path)
    return read_obj(path)

# Images

def _pgm_header(data, path):
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b'#':
            while pos < len(data) and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(path, 'truncated header', 'byte {}'.format(pos))
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1

def read_pgm(path):
    """Binary PGM with maxval 255 -> float image in [0, 1]."""

    data = _read_bytes(path)
    tokens, offset = _pgm_header(data, path)
    if tokens[0] != b'P5':
        raise FormatError(path, 'bad magic, expected P5', 'byte 0')
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise FormatError(path, 'malformed header')
    if maxval != 255:
        raise FormatError(path, 'unsupported maxval {}'.format(maxval))
    if width <= 0 or height <= 0:
        raise FormatError(path, 'invalid size {}x{}'.format(width, height))
    if len(data) - offset != width * height:
        raise FormatError(path, 'expected {} raster bytes, got {}'.format(
            width * height, len(data) - offset), 'byte {}'.format(offset))
    raster = np.frombuffer(data, dtype=np.uint8, offset=offset).reshape(height, width)
    return raster.astype(np.float64) / 255.0

def write_pgm(path, image):
    image = np.asarray(image, dtype=np.float64)
    raster = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = 'P5\n{} {}\n255\n'.format(raster.shape[1], raster.shape[0]).encode('ascii')
    atomic_write(path, header + raster.tobytes())

# Correspondence frames

def read_vff(path):
    data = _read_bytes(path)
    if len(data) < VFF_HEADER.size:
        raise FormatError(path, 'truncated header', 'byte {}'.format(len(data)))
    magic, width, height, k, n_classes = VFF_HEADER.unpack_from(data)
    if magic != VFF_MAGIC:
        raise FormatError(path, 'bad magic, expected VFF1', 'byte 0')
    pixels = width * height
    expected = VFF_HEADER.size + 2 * pixels + 8 * k * pixels
    if len(data) != expected:
        raise FormatError(path, 'size mismatch: expected {} bytes, got {}'.format(
            expected, len(data)), 'byte {}'.format(min(len(data), expected)))
    mask = np.frombuffer(data, dtype='<u2', count=pixels, offset=VFF_HEADER.size)
    planes = np.frombuffer(data, dtype='<f4', count=2 * k * pixels,
                           offset=VFF_HEADER.size + 2 * pixels)
    bad = np.flatnonzero(~np.isfinite(planes))
    if len(bad):
        raise FormatError(path, 'non-finite vector component',
                          'byte {}'.format(VFF_HEADER.size + 2 * pixels + 4 * int(bad[0])))
    fields = planes.reshape(k, 2, height, width).transpose(0, 2, 3, 1)
    return CorrespondenceFrame(class_mask=mask.reshape(height, width).astype(np.uint16),
                               fields=fields.astype(np.float32), n_classes=n_classes)

def write_vff(path, frame):
    header = VFF_HEADER.pack(VFF_MAGIC, frame.width, frame.height, frame.k, frame.n_classes)
    planes = np.ascontiguousarray(frame.fields.transpose(0, 3, 1, 2)).astype('<f4')
    atomic_write(path, header + frame.class_mask.astype('<u2').tobytes() + planes.tobytes())

# Pose logs

class PoseLogRow(object):
    """One object in one frame. `pose` is None while the object has none."""

    __slots__ = ('frame', 'object_id', 'pose', 'e_irls', 'e_dist', 'e_valid', 'e_edge',
                 'state', 'detection_used')

    def __init__(self, frame, object_id, pose=None, score=None, state='', detection_used=False,
                 e_irls=None, e_dist=None, e_valid=None, e_edge=None):
        self.frame = int(frame)
        self.object_id = str(object_id)
        self.pose = pose
        if score is not None:
            e_irls, e_dist, e_valid, e_edge = score.e_irls, score.e_dist, score.e_valid, score.e_edge
        self.e_irls, self.e_dist, self.e_valid, self.e_edge = e_irls, e_dist, e_valid, e_edge
        self.state = state
        self.detection_used = bool(detection_used)

    @property
    def key(self):
        return self.frame, self.object_id

    def __repr__(self):
        return 'PoseLogRow(frame={}, object_id={!r}, state={!r})'.format(
            self.frame, self.object_id, self.state)


def _fmt(value):
    return '' if value is None else '%.9g' % value

def format_pose_log(rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(POSE_LOG_HEADER)
    for row in rows:
        if row.pose is None:
            pose_fields = [''] * 12
        else:
            pose_fields = [_fmt(v) for v in row.pose.rotation.ravel()] + \
                          [_fmt(v) for v in row.pose.translation]
        writer.writerow([row.frame, row.object_id] + pose_fields
                        + [_fmt(row.e_irls), _fmt(row.e_dist), _fmt(row.e_valid), _fmt(row.e_edge),
                           row.state, int(row.detection_used)])
    return out.getvalue()

def write_pose_log(path, rows):
    atomic_write(path, format_pose_log(rows).encode('ascii'))

def _opt_float(value):
    return None if value == '' else float(value)

def read_pose_log(path):
    rows = []
    with open(path, 'r', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != POSE_LOG_HEADER:
            raise FormatError(path, 'unexpected pose log header', 'line 1')
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(POSE_LOG_HEADER):
                raise FormatError(path, 'expected {} fields, got {}'.format(
                    len(POSE_LOG_HEADER), len(fields)), 'line {}'.format(lineno))
            try:
                pose = None
                if all(fields[2:14]):
                    values = np.array([float(v) for v in fields[2:14]])
                    pose = Pose(values[:9].reshape(3, 3), values[9:])
                elif any(fields[2:14]):
                    raise ValueError('incomplete pose')
                rows.append(PoseLogRow(int(fields[0]), fields[1], pose,
                                       state=fields[18], detection_used=fields[19] == '1',
                                       e_irls=_opt_float(fields[14]), e_dist=_opt_float(fields[15]),
                                       e_valid=_opt_float(fields[16]), e_edge=_opt_float(fields[17])))
            except ValueError as exc:
                raise FormatError(path, str(exc), 'line {}'.format(lineno))
    return rows

# JSON documents

def _load_json(path):
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.msg, 'line {}'.format(exc.lineno))

def read_pose_json(path):
    """{"rotvec": [...], "translation": [...]} or {"rotation": [[...]], ...}."""

    doc = _load_json(path)
    try:
        translation = np.array(doc['translation'], dtype=np.float64).reshape(3)
        if 'rotvec' in doc:
            return Pose.from_rotvec(np.array(doc['rotvec'], dtype=np.float64).reshape(3),
                                    translation)
        rotation = np.array(doc['rotation'], dtype=np.float64).reshape(3, 3)
        return Pose(orthonormalize(rotation), translation)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(path, 'invalid pose document: {}'.format(exc))

def write_pose_json(path, pose):
    doc = {'rotvec': [float(v) for v in pose.rotvec()],
           'translation': [float(v) for v in pose.translation]}
    atomic_write(path, (json.dumps(doc, indent=2) + '\n').encode('ascii'))

def intrinsics_to_dict(intr):
    return {'fx': intr.fx, 'fy': intr.fy, 'cx': intr.cx, 'cy': intr.cy,
            'width': intr.width, 'height': intr.height}

def intrinsics_from_dict(doc, path='<config>'):
    try:
        return Intrinsics(fx=float(doc['fx']), fy=float(doc['fy']),
                          cx=float(doc['cx']), cy=float(doc['cy']),
                          width=int(doc['width']), height=int(doc['height']))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(path, 'invalid intrinsics: {}'.format(exc))

def read_manifest(path):
    """Dataset manifest: intrinsics, objects (id -> mesh file, keypoints) and
    frame count."""

    doc = _load_json(path)
    try:
        manifest = {'intrinsics': intrinsics_from_dict(doc['intrinsics'], path),
                    'frames': int(doc['frames']),
                    'objects': [{'id': str(o['id']), 'mesh': str(o['mesh']),
                                 'keypoints': int(o['keypoints'])} for o in doc['objects']],
                    'vff': bool(doc.get('vff', False))}
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(path, 'invalid manifest: {}'.format(exc))
    return manifest

def write_manifest(path, intr, objects, frames, vff):
    doc = {'intrinsics': intrinsics_to_dict(intr), 'frames': int(frames), 'vff': bool(vff),
           'objects': [{'id': o['id'], 'mesh': o['mesh'], 'keypoints': int(o['keypoints'])}
                       for o in objects]}
    atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + '\n').encode('ascii'))

def read_json(path):
    return _load_json(path)

def load_dataset(directory):
    """Manifest of a dataset directory with meshes loaded and frame paths
    resolved."""

    manifest = read_manifest(os.path.join(directory, 'dataset.json'))
    for obj in manifest['objects']:
        obj['mesh'] = read_mesh(os.path.join(directory, obj['mesh']))
    n = manifest['frames']
    manifest['frame_paths'] = [os.path.join(directory, 'frames', '{:05d}.pgm'.format(i))
                               for i in range(n)]
    manifest['vff_paths'] = [os.path.join(directory, 'vff', '{:05d}.vff'.format(i))
                             for i in range(n)] if manifest['vff'] else None
    return manifest
