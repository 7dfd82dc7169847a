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

from edgetrack.imageops import (adaptive_threshold_pair, as_gray, box_filter, build_pyramid,
                                downsample, grid_bounds, oriented_responses,
                                rotated_sobel_bank, sobel_gradients, sobel_magnitude)


def step_image(width=40, height=30, column=20, low=0.0, high=1.0):
    img = np.full((height, width), low)
    img[:, column:] = high
    return img

def test_as_gray_rejects_bad_input():
    with pytest.raises(ValueError):
        as_gray(np.zeros((4, 4, 3)))
    with pytest.raises(ValueError):
        as_gray(np.full((4, 4), np.nan))

def test_pyramid_sizes():
    pyramid = build_pyramid(np.zeros((121, 161)), 3)
    assert len(pyramid) == 3
    assert [level.shape for level in pyramid.levels] == [(121, 161), (61, 81), (31, 41)]

def test_pyramid_too_many_levels():
    with pytest.raises(ValueError):
        build_pyramid(np.zeros((6, 6)), 4)
    with pytest.raises(ValueError):
        build_pyramid(np.zeros((6, 6)), 0)

def test_downsample_averages_blocks():
    img = np.arange(16, dtype=np.float64).reshape(4, 4)
    assert_allclose(downsample(img), [[2.5, 4.5], [10.5, 12.5]])
    assert_allclose(downsample(np.full((5, 7), 0.3)), np.full((3, 4), 0.3))

def test_sobel_on_ramp_and_step():
    ramp = np.tile(np.arange(20, dtype=np.float64) * 0.01, (10, 1))
    gx, gy = sobel_gradients(ramp)
    assert_allclose(gx[:, 1:-1], 0.02, atol=1e-12)
    assert_allclose(gy, 0.0, atol=1e-12)
    mag = sobel_magnitude(step_image())
    assert mag.max() == pytest.approx(1.0)
    assert mag[:, :18].max() == 0.0

class TestKernelBank:

    def test_kernels_are_normalized(self):
        bank = rotated_sobel_bank(8)
        assert len(bank) == 8
        for k in bank.kernels:
            assert k.shape == (5, 5)
            assert abs(k.sum()) < 1e-12
            assert k[k > 0].sum() == pytest.approx(1.0)

    def test_nearest_orientation(self):
        bank = rotated_sobel_bank(8)
        assert bank.nearest(0.0) == 0
        assert bank.nearest(67.5) == 3
        assert bank.nearest(179.0) == 0
        assert bank.nearest(-22.5) == 7
        assert bank.nearest(180.0 + 45.0) == 2
        assert_allclose(bank.nearest(np.array([10.0, 100.0])), [0, 4])

    def test_unit_step_response(self):
        bank = rotated_sobel_bank(8)
        responses = oriented_responses(step_image(), bank)
        assert responses.shape == (8, 30, 40)
        assert responses[0, 5:-5].max() == pytest.approx(1.0)
        # the kernel across the step direction barely responds
        assert np.abs(responses[4, 5:-5]).max() < 0.1

    def test_bank_is_cached(self):
        assert rotated_sobel_bank(8) is rotated_sobel_bank(8)

    def test_needs_two_orientations(self):
        with pytest.raises(ValueError):
            rotated_sobel_bank(1)

def test_box_filter():
    img = np.full((9, 9), 0.5)
    assert_allclose(box_filter(img, 2), img)
    spike = np.zeros((9, 9))
    spike[4, 4] = 1.0
    smoothed = box_filter(spike, 1)
    assert smoothed[4, 4] == pytest.approx(1.0 / 9.0)
    assert smoothed.sum() == pytest.approx(1.0)
    assert_allclose(box_filter(spike, 0), spike)
    with pytest.raises(ValueError):
        box_filter(spike, -1)

def test_grid_bounds_cover_the_axis():
    assert grid_bounds(10, 3) == [0, 3, 6, 10]
    assert grid_bounds(4, 16) == [0, 1, 2, 3, 4]

class TestAdaptiveThreshold:

    def test_identical_images_give_identical_masks(self, intr, cube, cube_pose, camera_image):
        image = camera_image([(cube, cube_pose)], intr)
        edges = adaptive_threshold_pair(image, image)
        assert edges.rendered_mask.any()
        assert np.array_equal(edges.rendered_mask, edges.camera_mask)
        assert_allclose(edges.rendered_edges, edges.camera_edges)

    def test_flat_camera_has_no_edges(self):
        edges = adaptive_threshold_pair(step_image(), np.full((30, 40), 0.4))
        assert edges.rendered_mask.any()
        assert not edges.camera_mask.any()
        assert edges.camera_edges.max() == 0.0

    def test_camera_keeps_as_many_pixels_per_cell(self):
        rendered = step_image()
        camera = 0.5 * step_image(column=22)
        edges = adaptive_threshold_pair(rendered, camera, grid_cells=1)
        assert edges.camera_mask.sum() == edges.rendered_mask.sum()
        assert edges.camera_mask[:, 21:23].all()

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            adaptive_threshold_pair(np.zeros((5, 5)), np.zeros((5, 6)))
