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
from numpy.testing import assert_allclose
from scipy.spatial.transform import Rotation

from edgetrack import dense
from edgetrack.dense import (accumulate, dense_rows, dense_system, edge_distance,
                             refine_dense_stage)
from edgetrack.exceptions import InsufficientEdgeStructure, ObjectNotVisible
from edgetrack.geometry import Intrinsics, MotionDelta, Pose, apply_delta, rotation_error
from edgetrack.imageops import EdgeImagePair, adaptive_threshold_pair
from edgetrack.metrics import projection_metric
from edgetrack.raster import RenderOutput, render
from edgetrack.refine import RefineConfig, refine_pose
from edgetrack.scenes import sphere_mesh


def self_edges(rendered):
    return adaptive_threshold_pair(rendered.intensity, rendered.intensity)

def with_camera_edges(edges, camera_edges, scale=1.0):
    return EdgeImagePair(rendered_edges=scale * edges.rendered_edges,
                         camera_edges=scale * camera_edges,
                         rendered_mask=edges.rendered_mask, camera_mask=edges.camera_mask)

@pytest.fixture
def cube_render(intr, cube, cube_pose):
    return render([(cube, cube_pose)], intr)

def test_identical_edges_give_zero_motion(intr, cube_pose, cube_render):
    system = dense_system(self_edges(cube_render), cube_render, cube_pose, intr)
    assert system.pixel_count == cube_render.silhouette.sum()
    assert np.all(system.atb == 0.0)
    assert_allclose(system.ata, system.ata.T)
    assert np.all(system.solve().as_vector() == 0.0)

def test_single_weighted_pixel_has_rank_one(intr, cube_pose, cube_render):
    edges = self_edges(cube_render)
    grad_y, grad_x = np.gradient(edges.rendered_edges)
    strength = np.where(cube_render.silhouette, np.hypot(grad_x, grad_y), 0.0)
    weights = np.zeros(strength.shape)
    weights[np.unravel_index(np.argmax(strength), strength.shape)] = 1.0
    system = dense_system(edges, cube_render, cube_pose, intr, weights)
    assert np.linalg.matrix_rank(system.ata) == 1
    with pytest.raises(InsufficientEdgeStructure):
        system.solve()

def test_solution_ignores_edge_gain(intr, cube, cube_pose, cube_render):
    moved = Pose.from_rotvec(cube_pose.rotvec(), cube_pose.translation + [0.002, 0.0, 0.0])
    camera = adaptive_threshold_pair(cube_render.intensity,
                                     render([(cube, moved)], intr).intensity)
    edges = self_edges(cube_render)
    unit = dense_system(with_camera_edges(edges, camera.camera_edges), cube_render,
                        cube_pose, intr).solve()
    doubled = dense_system(with_camera_edges(edges, camera.camera_edges, 2.0), cube_render,
                           cube_pose, intr).solve()
    assert_allclose(doubled.as_vector(), unit.as_vector(), rtol=1e-9, atol=1e-15)

def test_one_pixel_shift_sign(intr, square):
    pose = Pose(np.eye(3), [0.0, 0.0, 1.0])
    out = render([(square, pose)], intr)
    edges = self_edges(out)
    shifted = np.roll(edges.rendered_edges, 1, axis=1)
    delta = dense_system(with_camera_edges(edges, shifted), out, pose, intr).solve()
    # b = rendered - camera: the increment follows the camera content
    assert 0.3 / intr.fx < delta.dt[0] < 1.7 / intr.fx
    assert abs(delta.dt[1]) < 0.3 / intr.fy

def test_empty_silhouette(intr):
    blank = RenderOutput(intensity=np.zeros((intr.height, intr.width)),
                         depth=np.zeros((intr.height, intr.width)),
                         silhouette=np.zeros((intr.height, intr.width), dtype=bool),
                         object_id=np.zeros((intr.height, intr.width), dtype=np.uint16))
    edges = adaptive_threshold_pair(blank.intensity, blank.intensity)
    with pytest.raises(ObjectNotVisible):
        dense_rows(edges, blank, Pose(np.eye(3), [0.0, 0.0, 1.0]), intr)

def test_size_mismatch(intr, cube_pose, cube_render):
    small = adaptive_threshold_pair(np.zeros((10, 10)), np.zeros((10, 10)))
    with pytest.raises(ValueError):
        dense_rows(small, cube_render, cube_pose, intr)

def test_accumulate_weights():
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0, 3.0])
    system = accumulate(a, b, np.array([1.0, 2.0, 0.0]))
    assert_allclose(system.ata, [[1.0, 0.0], [0.0, 2.0]])
    assert_allclose(system.atb, [1.0, 4.0])
    assert system.mean_abs_residual == pytest.approx(2.0)

def test_stage_keeps_ground_truth(intr, cube, cube_pose, cube_render):
    pose = refine_dense_stage(cube_render.intensity, cube, cube_pose, intr, RefineConfig())
    assert_allclose(pose.translation, cube_pose.translation, atol=1e-12)
    assert_allclose(pose.rotation, cube_pose.rotation, atol=1e-12)

class FixedStep:
    """Stands in for a DenseSystem whose solution is known in advance."""

    def __init__(self, delta):
        self.delta = delta

    def solve(self):
        return self.delta

def rotated_about_center(pose, axis, degrees):
    axis = np.asarray(axis, dtype=np.float64) / np.linalg.norm(axis)
    rotation = Rotation.from_rotvec(np.radians(degrees) * axis).as_matrix()
    return Pose(rotation @ pose.rotation, pose.translation)

def test_edge_distance():
    img = np.zeros((40, 40))
    img[10:30, 10:30] = 1.0
    same = adaptive_threshold_pair(img, img)
    assert edge_distance(same) == 0.0
    blank = adaptive_threshold_pair(np.zeros((40, 40)), np.zeros((40, 40)))
    assert edge_distance(blank) == 1.0
    one_sided = adaptive_threshold_pair(img, np.zeros((40, 40)))
    assert edge_distance(one_sided) == pytest.approx(1.0)

def test_step_that_moves_away_is_undone(monkeypatch, intr, cube, cube_pose, cube_render):
    wrong = MotionDelta.from_vector([0.0, np.radians(3.0), 0.0, 0.004, 0.0, 0.0])
    monkeypatch.setattr(dense, 'accumulate', lambda a, b, weights=None: FixedStep(wrong))
    pose = refine_dense_stage(cube_render.intensity, cube, cube_pose, intr, RefineConfig())
    assert pose is cube_pose

def test_step_towards_the_camera_is_kept(monkeypatch, intr, cube, cube_pose):
    step = MotionDelta.from_vector([0.0, 0.0, np.radians(2.0), 0.003, 0.0, 0.0])
    target = apply_delta(cube_pose, step)
    camera = render([(cube, target)], intr).intensity
    monkeypatch.setattr(dense, 'accumulate', lambda a, b, weights=None: FixedStep(step))
    pose = refine_dense_stage(camera, cube, cube_pose, intr, RefineConfig(reps_s2=3))
    # the second repetition would move past the target and is dropped
    assert_allclose(pose.rotation, target.rotation, atol=1e-12)
    assert_allclose(pose.translation, target.translation, atol=1e-12)

def test_no_repetitions_return_the_input(intr, cube, cube_pose):
    blank = np.zeros((intr.height, intr.width))
    assert refine_dense_stage(blank, cube, cube_pose, intr, RefineConfig(reps_s2=0)) is cube_pose

@pytest.mark.slow
def test_small_rotations_shrink_the_projection_error(cube, camera_image):
    intr = Intrinsics(fx=500.0, fy=500.0, cx=159.5, cy=119.5, width=320, height=240)
    gt = Pose.from_rotvec([0.35, -0.45, 0.2], [0.0, 0.0, 1.0])
    image = camera_image([(cube, gt)], intr)
    cfg = RefineConfig(reps_s2=1)
    rng = np.random.default_rng(5)
    improved = 0
    for _ in range(100):
        pose = rotated_about_center(gt, rng.normal(size=3), 1.0)
        errors = [projection_metric(pose, gt, cube, intr)[0]]
        for _ in range(3):
            pose = refine_dense_stage(image, cube, pose, intr, cfg)
            errors.append(projection_metric(pose, gt, cube, intr)[0])
        steps = np.diff(errors)
        improved += errors[-1] < errors[0] and steps[0] < 0 and np.all(steps < 0.02)
    assert improved >= 95

@pytest.mark.slow
def test_interior_creases_recover_rotation(camera_image):
    intr = Intrinsics(fx=500.0, fy=500.0, cx=159.5, cy=119.5, width=320, height=240)
    sphere = sphere_mesh(0.05, 6)
    gt = Pose.from_rotvec([0.2, 0.3, 0.1], [0.0, 0.0, 0.5])
    image = camera_image([(sphere, gt)], intr)
    init = rotated_about_center(gt, [1.0, -0.5, 0.3], 3.0)
    contour_only = refine_pose(image, sphere, init, intr,
                               RefineConfig(mode='S1', pyramid_levels=1))
    dense_only = refine_pose(image, sphere, init, intr,
                             RefineConfig(mode='S2', pyramid_levels=1, iterations=3))
    error = rotation_error(dense_only.pose, gt)
    assert error < 0.5 * rotation_error(init, gt)
    assert error < rotation_error(contour_only.pose, gt)
