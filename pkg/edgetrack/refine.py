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
Coarse to fine pose refinement alternating the contour (S1) and the dense
(S2) stages over the image pyramid.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from edgetrack.contour import (FULL6D, INPLANE3, ContourSolveStats, refine_contour_stage,
                               score_contour)
from edgetrack.dense import refine_dense_stage
from edgetrack.exceptions import TrackingError
from edgetrack.imageops import as_gray, build_pyramid, oriented_responses, rotated_sobel_bank


logger = logging.getLogger(__name__)

MODES = ('S1', 'S2', 'S1+S2')


@dataclass(frozen=True)
class RefineConfig:
    pyramid_levels: int = 3
    iterations: int = 1
    mode: str = 'S1+S2'
    scanline_length: int = 15
    t_e: float = 0.08
    t_r: float = 0.05
    t_min: float = 0.02
    reps_s1: int = 5
    reps_s2: int = 3
    reweights: int = 3
    grid_cells: int = 16
    box_radius: int = 2
    contour_points: int = 200
    bank_size: int = 8
    crease_depth: int = 3
    crease_step: float = 0.04
    corner_turn: float = 40.0
    dense_eps: float = 0.05

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError('pyramid_levels must be at least 1')
        if self.iterations < 0:
            raise ValueError('iterations must be non-negative')
        if self.mode not in MODES:
            raise ValueError('mode must be one of {}'.format(', '.join(MODES)))
        if self.scanline_length < 3 or self.scanline_length % 2 == 0:
            raise ValueError('scanline_length must be odd and at least 3')
        for name in ('t_e', 't_r', 't_min', 'crease_step'):
            if not getattr(self, name) >= 0:
                raise ValueError('{} must be non-negative'.format(name))
        for name in ('reps_s1', 'reps_s2', 'reweights', 'box_radius', 'crease_depth'):
            if getattr(self, name) < 0:
                raise ValueError('{} must be non-negative'.format(name))
        if self.grid_cells < 1 or self.contour_points < 8 or self.bank_size < 2:
            raise ValueError('grid_cells >= 1, contour_points >= 8 and bank_size >= 2 required')
        if not self.dense_eps > 0:
            raise ValueError('dense_eps must be positive')
        if not 0 < self.corner_turn <= 180:
            raise ValueError('corner_turn must lie in (0, 180]')


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    level: int
    stage: str
    pose: object


@dataclass(frozen=True)
class RefineResult:
    pose: object
    stats: ContourSolveStats
    iterations_run: int
    trace: tuple = field(default=())

    @property
    def converged(self):
        return self.stats.converged


class _Responses:
    """Oriented responses of every pyramid level, computed on first use."""

    def __init__(self, pyramid, bank):
        self.pyramid = pyramid
        self.bank = bank
        self.cache = {}

    def __getitem__(self, level):
        if level not in self.cache:
            self.cache[level] = np.abs(oriented_responses(self.pyramid[level], self.bank))
        return self.cache[level]


def refine_pose(camera, mesh, init, intr, cfg=None):
    """Refine `init` against `camera`.

    Each iteration walks the pyramid from the coarsest level to full
    resolution; the coarsest S1 stage only solves for in-plane motion. The
    returned statistics are those of the last full resolution S1 stage; in
    mode S2, or without iterations, a full resolution contour pass scores the
    final pose instead. A failing stage stops the refinement and the last pose
    that completed a stage is returned with converged set to False.
    """

    if cfg is None:
        cfg = RefineConfig()
    camera = as_gray(camera)
    if camera.shape != (intr.height, intr.width):
        raise ValueError('camera image {}x{} does not match the intrinsics {}x{}'.format(
            camera.shape[1], camera.shape[0], intr.width, intr.height))
    levels = cfg.pyramid_levels
    pyramid = build_pyramid(camera, levels)
    bank = rotated_sobel_bank(cfg.bank_size)
    responses = _Responses(pyramid, bank)
    pose = init
    stats = None
    trace = []
    iterations_run = 0
    try:
        for it in range(cfg.iterations):
            for level in reversed(range(levels)):
                image = pyramid[level]
                level_intr = intr.scaled(level)
                if cfg.mode in ('S1', 'S1+S2'):
                    mode = INPLANE3 if level == levels - 1 and levels > 1 else FULL6D
                    pose, level_stats = refine_contour_stage(image, mesh, pose, level_intr, cfg,
                                                             mode, bank, responses[level])
                    if level == 0:
                        stats = level_stats
                    trace.append(TraceEntry(it, level, 'S1', pose))
                if cfg.mode in ('S2', 'S1+S2'):
                    pose = refine_dense_stage(image, mesh, pose, level_intr, cfg)
                    trace.append(TraceEntry(it, level, 'S2', pose))
            iterations_run += 1
        if stats is None:
            stats = score_contour(pyramid[0], mesh, pose, intr, cfg, bank, responses[0])
    except TrackingError as exc:
        logger.warning('refinement stopped after %d iterations: %s', iterations_run, exc)
        return RefineResult(pose=pose, stats=ContourSolveStats.failed(),
                            iterations_run=iterations_run, trace=tuple(trace))
    return RefineResult(pose=pose, stats=stats, iterations_run=iterations_run,
                        trace=tuple(trace))
