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
Deterministic software rasterizer and silhouette contour extraction.

Triangles are z-buffered on camera-frame metric depth with perspective
correct interpolation. Shading is flat with a headlight along the viewing
axis, which keeps geometric creases visible to a Sobel filter. Ownership of
pixels on shared edges follows a top-left style rule so that every pixel
center on an edge between two triangles is drawn exactly once.

All triangles of an object are rasterized together: every triangle expands
into the pixel centers of its bounding box, the fragments inside it are
kept and the z-buffer keeps the closest fragment per pixel. On equal depth
the earlier triangle wins, as it would when drawing them one by one.
"""

import logging
from dataclasses import dataclass

import cv2
import numpy as np

from edgetrack.exceptions import DegenerateSilhouette, ObjectNotVisible
from edgetrack.geometry import back_project, project


logger = logging.getLogger(__name__)

AMBIENT = 0.2
DIFFUSE = 0.8
# headlight: light travels along the viewing axis
LIGHT = np.array([0.0, 0.0, -1.0])
# triangles closer than this to the camera plane are skipped
NEAR_PLANE = 1e-6
# bounding box pixels expanded at once
MAX_FRAGMENTS = 1 << 20


@dataclass(frozen=True, eq=False)
class RenderOutput:
    intensity: np.ndarray
    depth: np.ndarray
    silhouette: np.ndarray
    object_id: np.ndarray

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True, eq=False)
class ContourSet:
    points_2d: np.ndarray
    points_3d: np.ndarray
    normals: np.ndarray

    def __len__(self):
        return len(self.points_2d)


def _triangles(mesh, pose, intr):
    """Screen-space triangles of `mesh` in front of the camera:
    (vertices (n, 3, 2), depths (n, 3), shades (n,))."""

    tris = pose.transform(mesh.vertices)[mesh.triangles]
    normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    lengths = np.linalg.norm(normals, axis=1)
    keep = (lengths > 0) & np.all(tris[:, :, 2] > NEAR_PLANE, axis=1)
    tris, normals = tris[keep], normals[keep] / lengths[keep, None]
    # face the camera regardless of winding
    away = np.einsum('ni,ni->n', normals, tris.mean(axis=1)) > 0
    normals[away] = -normals[away]
    shades = np.clip(AMBIENT + DIFFUSE * np.maximum(0.0, normals @ LIGHT), 0.0, 1.0)
    v2d = project(tris.reshape(-1, 3), intr).reshape(-1, 3, 2)
    return v2d, tris[:, :, 2], shades

def _batches(counts):
    ends = np.cumsum(counts)
    start = 0
    while start < len(counts):
        base = ends[start - 1] if start else 0
        stop = max(start + 1, int(np.searchsorted(ends, base + MAX_FRAGMENTS, side='right')))
        yield start, stop
        start = stop

def _rasterize(v2d, z, shades, oid, intensity, depth, ids):
    height, width = depth.shape
    area = ((v2d[:, 1, 0] - v2d[:, 0, 0]) * (v2d[:, 2, 1] - v2d[:, 0, 1])
            - (v2d[:, 1, 1] - v2d[:, 0, 1]) * (v2d[:, 2, 0] - v2d[:, 0, 0]))
    keep = np.isfinite(area) & (area != 0)
    v2d, z, shades, area = v2d[keep], z[keep], shades[keep], area[keep]
    flip = area < 0
    v2d[flip] = v2d[flip][:, [0, 2, 1]]
    z[flip] = z[flip][:, [0, 2, 1]]
    area = np.abs(area)

    x0 = np.clip(np.ceil(v2d[:, :, 0].min(axis=1)), 0, width).astype(np.int64)
    x1 = np.clip(np.floor(v2d[:, :, 0].max(axis=1)), -1, width - 1).astype(np.int64)
    y0 = np.clip(np.ceil(v2d[:, :, 1].min(axis=1)), 0, height).astype(np.int64)
    y1 = np.clip(np.floor(v2d[:, :, 1].max(axis=1)), -1, height - 1).astype(np.int64)
    keep = (x0 <= x1) & (y0 <= y1)
    if not keep.any():
        return
    v2d, z, shades, area = v2d[keep], z[keep], shades[keep], area[keep]
    x0, y0 = x0[keep], y0[keep]
    widths = x1[keep] - x0 + 1
    counts = widths * (y1[keep] - y0 + 1)

    # edge i runs from vertex i+1 to vertex i+2, opposite vertex i
    a = v2d[:, [1, 2, 0]]
    b = v2d[:, [2, 0, 1]]
    ex, ey = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
    # exactly one of the two orientations of an edge owns pixel centers on it
    owns = (ey < 0) | ((ey == 0) & (ex > 0))

    flat_depth = depth.reshape(-1)
    flat_intensity = intensity.reshape(-1)
    flat_ids = ids.reshape(-1)
    for start, stop in _batches(counts):
        c = counts[start:stop]
        tri = np.repeat(np.arange(start, stop), c)
        local = np.arange(int(c.sum())) - np.repeat(np.cumsum(c) - c, c)
        px = (x0[tri] + local % widths[tri]).astype(np.float64)
        py = (y0[tri] + local // widths[tri]).astype(np.float64)

        inside = np.ones(len(tri), dtype=bool)
        inv_z = np.zeros(len(tri))
        for i in range(3):
            w = ex[tri, i] * (py - a[tri, i, 1]) - ey[tri, i] * (px - a[tri, i, 0])
            inside &= np.where(owns[tri, i], w >= 0, w > 0)
            inv_z += w / area[tri] / z[tri, i]
        if not inside.any():
            continue
        tri, inv_z = tri[inside], inv_z[inside]
        pixel = py[inside].astype(np.int64) * width + px[inside].astype(np.int64)
        frag_depth = 1.0 / inv_z

        order = np.lexsort((tri, frag_depth, pixel))
        pixel, frag_depth, tri = pixel[order], frag_depth[order], tri[order]
        first = np.ones(len(pixel), dtype=bool)
        first[1:] = pixel[1:] != pixel[:-1]
        pixel, frag_depth, tri = pixel[first], frag_depth[first], tri[first]

        closer = frag_depth < flat_depth[pixel]
        pixel = pixel[closer]
        flat_depth[pixel] = frag_depth[closer]
        flat_intensity[pixel] = shades[tri[closer]]
        flat_ids[pixel] = oid

def render(scene, intr):
    """Render a list of (Mesh, Pose) pairs. Object ids are 1-based positions
    in `scene`; 0 marks the background."""

    height, width = intr.height, intr.width
    intensity = np.zeros((height, width))
    depth = np.full((height, width), np.inf)
    ids = np.zeros((height, width), dtype=np.uint16)

    for oid, (mesh, pose) in enumerate(scene, start=1):
        v2d, z, shades = _triangles(mesh, pose, intr)
        if len(shades):
            _rasterize(v2d, z, shades, oid, intensity, depth, ids)

    silhouette = ids != 0
    depth[~silhouette] = 0.0
    return RenderOutput(intensity=intensity, depth=depth,
                        silhouette=silhouette, object_id=ids)

def _outward_normals(trace, step):
    n = len(trace)
    tangents = trace[(np.arange(n) + step) % n] - trace[(np.arange(n) - step) % n]
    # shoelace: positive area means the interior lies left of the tangent
    area = 0.5 * np.sum(trace[:, 0] * np.roll(trace[:, 1], -1)
                        - np.roll(trace[:, 0], -1) * trace[:, 1])
    if area >= 0:
        normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    else:
        normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    lengths = np.linalg.norm(normals, axis=1)
    valid = lengths > 0
    normals[valid] /= lengths[valid, None]
    return normals, valid

def turn_angles(trace, span):
    """Angle in degrees between the chords to the `span`-th trace neighbours
    before and after every pixel of a closed trace."""

    idx = np.arange(len(trace))
    before = trace - trace[(idx - span) % len(trace)]
    after = trace[(idx + span) % len(trace)] - trace
    cross = before[:, 0] * after[:, 1] - before[:, 1] * after[:, 0]
    return np.degrees(np.abs(np.arctan2(cross, np.sum(before * after, axis=1))))

def crease_free(render_out, object_id, pixels, normals, reach, step):
    """Boundary pixels whose first `reach` pixels inward along the normal
    carry the intensity of the boundary pixel itself.

    A crease that close to the silhouette merges with the silhouette edge in
    a 5 px wide edge filter and pulls the response peak inward. The walk
    stops where it leaves the object.
    """

    height, width = render_out.shape
    cols = pixels[:, 0].astype(np.int64)
    rows = pixels[:, 1].astype(np.int64)
    own = render_out.intensity[rows, cols]
    clear = np.ones(len(pixels), dtype=bool)
    inside = np.ones(len(pixels), dtype=bool)
    for k in range(1, reach + 1):
        c = np.rint(pixels[:, 0] - k * normals[:, 0]).astype(np.int64)
        r = np.rint(pixels[:, 1] - k * normals[:, 1]).astype(np.int64)
        inside &= (c >= 0) & (c < width) & (r >= 0) & (r < height)
        c, r = np.where(inside, c, 0), np.where(inside, r, 0)
        inside &= render_out.object_id[r, c] == object_id
        clear &= ~inside | (np.abs(render_out.intensity[r, c] - own) <= step)
    return clear

def extract_contour(render_out, object_id, intr, m_target, tangent_step=2,
                    crease_depth=0, crease_step=0.04, corner_turn=None):
    """Sample up to `m_target` points on the silhouette border of an object.

    Boundary pixels come from an 8-connected border trace of the id mask.
    Samples are spread uniformly in arc length. Each point is moved from its
    pixel center along the outward normal by half the spacing of pixel layers
    across the border and lifted to 3D with the depth of the boundary pixel.

    With `crease_depth` > 0 boundary pixels that have a crease of more than
    `crease_step` intensity within that many pixels inside are skipped. With
    `corner_turn` set, pixels where the border turns by more than that many
    degrees over two tangent steps are skipped as well. Neither filter applies
    when fewer than a quarter of the boundary would remain.
    """

    mask = render_out.object_id == object_id
    if not mask.any():
        raise ObjectNotVisible('object not visible')
    contours, _ = cv2.findContours(mask.astype(np.uint8), cv2.RETR_EXTERNAL,
                                   cv2.CHAIN_APPROX_NONE)
    traces, normals, steps, turns = [], [], [], []
    for c in contours:
        trace = c.reshape(-1, 2).astype(np.float64)
        if len(trace) < 3:
            continue
        nrm, valid = _outward_normals(trace, tangent_step)
        step = np.linalg.norm(np.diff(trace, axis=0, prepend=trace[-1:]), axis=1)
        traces.append(trace[valid])
        normals.append(nrm[valid])
        steps.append(step[valid])
        turns.append(turn_angles(trace, 2 * tangent_step)[valid])
    total = sum(len(t) for t in traces)
    if total < 8:
        raise DegenerateSilhouette('degenerate silhouette')

    pixels = np.concatenate(traces)
    normals = np.concatenate(normals)
    steps = np.concatenate(steps)
    keep = np.ones(total, dtype=bool)
    if corner_turn is not None:
        keep &= np.concatenate(turns) <= corner_turn
    if crease_depth > 0:
        keep &= crease_free(render_out, object_id, pixels, normals, crease_depth, crease_step)
    if keep.sum() >= max(8, total // 4):
        pixels, normals, steps = pixels[keep], normals[keep], steps[keep]
    if len(pixels) > m_target:
        arc = np.cumsum(steps)
        targets = (np.arange(m_target) + 0.5) * arc[-1] / m_target
        # dense targets on diagonal runs may land on the same pixel
        idx = np.unique(np.minimum(np.searchsorted(arc, targets), len(pixels) - 1))
        pixels, normals = pixels[idx], normals[idx]

    rows = pixels[:, 1].astype(np.int64)
    cols = pixels[:, 0].astype(np.int64)
    # boundary centers of a digital edge lie on average half a layer inside it
    points_2d = pixels + 0.5 * np.max(np.abs(normals), axis=1)[:, None] * normals
    points_3d = back_project(points_2d, render_out.depth[rows, cols], intr)
    logger.debug('object %d: %d boundary pixels, %d contour points',
                 object_id, total, len(points_2d))
    return ContourSet(points_2d=points_2d, points_3d=points_3d, normals=normals)

def render_overlay(image, points_2d, value=1.0):
    """Copy of `image` with the given pixel positions painted."""

    out = np.array(image, dtype=np.float64)
    pts = np.rint(np.asarray(points_2d)).astype(np.int64)
    keep = ((pts[:, 0] >= 0) & (pts[:, 0] < out.shape[1])
            & (pts[:, 1] >= 0) & (pts[:, 1] < out.shape[0]))
    out[pts[keep, 1], pts[keep, 0]] = value
    return out
