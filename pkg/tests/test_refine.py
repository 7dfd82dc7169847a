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


import numpy as np
import pytest

from edgetrack.contour import refine_contour_stage, score_contour
from edgetrack.geometry import Pose
from edgetrack.metrics import projection_metric
from edgetrack.refine import RefineConfig, refine_pose
from edgetrack.scenes import perturb_pose


@pytest.fixture
def image(intr, cube, cube_pose, camera_image):
    return camera_image([(cube, cube_pose)], intr)

def test_ground_truth_init_stays_close(intr, cube, cube_pose, image):
    result = refine_pose(image, cube, cube_pose, intr)
    assert result.converged
    assert result.iterations_run == 1
    assert projection_metric(result.pose, cube_pose, cube, intr)[0] < 1.5
    assert result.stats.mean_hyp_distance < 1.5

def test_refinement_is_deterministic(intr, cube, cube_pose, image):
    init = perturb_pose(cube_pose, 2.0, 0.01, np.random.default_rng(5))
    a = refine_pose(image, cube, init, intr)
    b = refine_pose(image, cube, init, intr)
    assert np.array_equal(a.pose.rotation, b.pose.rotation)
    assert np.array_equal(a.pose.translation, b.pose.translation)
    assert a.stats == b.stats

def test_trace_walks_the_pyramid(intr, cube, cube_pose, image):
    cfg = RefineConfig(pyramid_levels=2, iterations=2, mode='S1')
    result = refine_pose(image, cube, cube_pose, intr, cfg)
    assert [(e.iteration, e.level, e.stage) for e in result.trace] == [
        (0, 1, 'S1'), (0, 0, 'S1'), (1, 1, 'S1'), (1, 0, 'S1')]
    assert result.trace[-1].pose is result.pose

def test_trace_of_both_stages(intr, cube, cube_pose, image):
    cfg = RefineConfig(pyramid_levels=1, mode='S1+S2', reps_s2=1)
    result = refine_pose(image, cube, cube_pose, intr, cfg)
    assert [e.stage for e in result.trace] == ['S1', 'S2']

@pytest.mark.parametrize('mode', ['S1', 'S1+S2'])
def test_stats_come_from_the_last_contour_stage(monkeypatch, intr, cube, cube_pose, image,
                                                mode):
    def no_extra_pass(*args, **kwargs):
        raise AssertionError('separate scoring pass')

    monkeypatch.setattr('edgetrack.refine.score_contour', no_extra_pass)
    cfg = RefineConfig(pyramid_levels=2, mode=mode)
    result = refine_pose(image, cube, cube_pose, intr, cfg)
    assert result.converged
    assert result.stats.found > 0

def test_contour_only_stats_match_the_full_resolution_stage(intr, cube, cube_pose, image):
    cfg = RefineConfig(pyramid_levels=1, mode='S1')
    result = refine_pose(image, cube, cube_pose, intr, cfg)
    pose, stats = refine_contour_stage(image, cube, cube_pose, intr, cfg)
    assert result.stats == stats
    assert np.array_equal(result.pose.rotation, pose.rotation)

def test_dense_only_mode_scores_the_final_pose(intr, cube, cube_pose, image):
    cfg = RefineConfig(pyramid_levels=1, mode='S2')
    result = refine_pose(image, cube, cube_pose, intr, cfg)
    assert result.stats == score_contour(image, cube, result.pose, intr, cfg)

def test_zero_iterations_only_scores(intr, cube, cube_pose, image):
    result = refine_pose(image, cube, cube_pose, intr, RefineConfig(iterations=0))
    assert result.pose is cube_pose
    assert result.trace == ()
    assert result.converged

def test_invisible_object_returns_init(intr, cube, image):
    init = Pose(np.eye(3), [0.0, 0.0, -1.0])
    result = refine_pose(image, cube, init, intr)
    assert not result.converged
    assert result.pose is init
    assert result.stats.valid_ratio == float('inf')

def test_blank_image_fails(intr, cube, cube_pose):
    result = refine_pose(np.full((intr.height, intr.width), 0.1), cube, cube_pose, intr)
    assert not result.converged

def test_image_size_must_match(intr, cube, cube_pose):
    with pytest.raises(ValueError):
        refine_pose(np.zeros((10, 10)), cube, cube_pose, intr)

@pytest.mark.parametrize('kwargs', [
    {'pyramid_levels': 0}, {'mode': 'S3'}, {'scanline_length': 14},
    {'t_e': -0.1}, {'reps_s1': -1}, {'contour_points': 4}, {'iterations': -1},
    {'crease_depth': -1}, {'dense_eps': 0.0}, {'corner_turn': 0.0}, {'corner_turn': 190.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RefineConfig(**kwargs)

@pytest.mark.slow
@pytest.mark.parametrize('mode', ['S1', 'S1+S2'])
def test_perturbations_are_corrected(intr, cube, cube_pose, image, mode):
    rng = np.random.default_rng(21)
    cfg = RefineConfig(mode=mode)
    improved = 0
    for _ in range(10):
        init = perturb_pose(cube_pose, 2.0, 0.01, rng)
        result = refine_pose(image, cube, init, intr, cfg)
        before = projection_metric(init, cube_pose, cube, intr)[0]
        after = projection_metric(result.pose, cube_pose, cube, intr)[0]
        improved += after < before
    assert improved >= 7
