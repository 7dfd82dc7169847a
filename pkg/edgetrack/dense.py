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
Dense refinement (S2).

Analysis by synthesis on edge images: the rendered and the camera edge images
are linked through the optical flow constraint, and the flow of every
silhouette pixel is expressed through the pose increment.
"""

import logging
from dataclasses import dataclass

import numpy as np

from edgetrack.contour import MAX_CONDITION, charbonnier_weight
from edgetrack.exceptions import InsufficientEdgeStructure, ObjectNotVisible
from edgetrack.geometry import (MotionDelta, apply_delta, back_project, motion_jacobian,
                                solve_normal_equations)
from edgetrack.imageops import adaptive_threshold_pair
from edgetrack.raster import render


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DenseSystem:
    ata: np.ndarray
    atb: np.ndarray
    pixel_count: int
    mean_abs_residual: float

    def solve(self):
        x = solve_normal_equations(self.ata, self.atb, MAX_CONDITION,
                                   InsufficientEdgeStructure, 'insufficient edge structure')
        return MotionDelta.from_vector(x)


def _central_gradient(image, rows, cols):
    """np.gradient of `image` sampled at (rows, cols) only."""

    height, width = image.shape
    up, down = np.maximum(rows - 1, 0), np.minimum(rows + 1, height - 1)
    left, right = np.maximum(cols - 1, 0), np.minimum(cols + 1, width - 1)
    gx = (image[rows, right] - image[rows, left]) / (right - left)
    gy = (image[down, cols] - image[up, cols]) / (down - up)
    return np.stack([gx, gy], axis=1)

def dense_rows(edges, render_out, pose, intr):
    """Flow constraint rows of all silhouette pixels.

    Returns (a, b, pixels): a is (n, 6), b is (n,) with b = I_rendered - I_camera,
    pixels are the (row, col) indices in row-major order.
    """

    rendered = edges.rendered_edges
    if rendered.shape != edges.camera_edges.shape or rendered.shape != render_out.shape:
        raise ValueError('edge images and rendering differ in size')
    rows, cols = np.nonzero(render_out.silhouette)
    if len(rows) == 0:
        raise ObjectNotVisible('object not visible')
    grad = _central_gradient(rendered, rows, cols)
    pixels = np.stack([cols, rows], axis=1).astype(np.float64)
    p_hat = back_project(pixels, render_out.depth[rows, cols], intr)
    a = np.einsum('ni,nij->nj', grad, motion_jacobian(p_hat, pose.translation, intr))
    b = rendered[rows, cols] - edges.camera_edges[rows, cols]
    return a, b, (rows, cols)

def accumulate(a, b, weights=None):
    if weights is None:
        weights = np.ones(len(b))
    wa = weights[:, None] * a
    return DenseSystem(ata=a.T @ wa, atb=wa.T @ b, pixel_count=len(b),
                       mean_abs_residual=float(np.mean(np.abs(b))))

def dense_system(edges, render_out, pose, intr, weights=None):
    """Normal equations of the dense stage. `weights` is an optional image
    of per-pixel IRLS weights (uniform when absent)."""

    a, b, (rows, cols) = dense_rows(edges, render_out, pose, intr)
    w = None if weights is None else np.asarray(weights, dtype=np.float64)[rows, cols]
    return accumulate(a, b, w)

def edge_distance(edges):
    """Normalized L1 distance between the two edge images, 1 when neither
    has any edge."""

    total = float(np.sum(edges.rendered_edges) + np.sum(edges.camera_edges))
    if total == 0.0:
        return 1.0
    return float(np.sum(np.abs(edges.rendered_edges - edges.camera_edges))) / total

def _synthesize(camera, mesh, pose, intr, cfg):
    rendered = render([(mesh, pose)], intr)
    edges = adaptive_threshold_pair(rendered.intensity, camera, cfg.grid_cells,
                                    cfg.t_r, cfg.box_radius, cfg.t_min)
    return rendered, edges

def refine_dense_stage(camera, mesh, pose, intr, cfg, eps=None):
    """`cfg.reps_s2` repetitions of synthesis, edge extraction and an IRLS solve
    (one uniform solve plus `cfg.reweights` Charbonnier reweighted ones).

    A repetition whose pose increases the edge distance of the next synthesis
    is undone and ends the stage.
    """

    if eps is None:
        eps = cfg.dense_eps
    if cfg.reps_s2 == 0:
        return pose
    rendered, edges = _synthesize(camera, mesh, pose, intr, cfg)
    distance = edge_distance(edges)
    for rep in range(cfg.reps_s2):
        a, b, _ = dense_rows(edges, rendered, pose, intr)
        delta = accumulate(a, b).solve()
        for _ in range(cfg.reweights):
            residual = b - a @ delta.as_vector()
            delta = accumulate(a, b, charbonnier_weight(residual, eps)).solve()
        moved = apply_delta(pose, delta)
        rendered, edges = _synthesize(camera, mesh, moved, intr, cfg)
        moved_distance = edge_distance(edges)
        logger.debug('S2 repetition %d: %d pixels, mean |b| %.4f, distance %.4f -> %.4f',
                     rep, len(b), float(np.mean(np.abs(b))), distance, moved_distance)
        if moved_distance > distance:
            logger.debug('S2 repetition %d undone', rep)
            break
        pose, distance = moved, moved_distance
    return pose
