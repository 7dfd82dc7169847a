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

from edgetrack.geometry import Intrinsics, Mesh, Pose
from edgetrack.raster import render
from edgetrack.scenes import box_mesh


BACKGROUND = 0.1


@pytest.fixture
def intr():
    return Intrinsics(fx=300.0, fy=300.0, cx=79.5, cy=59.5, width=160, height=120)

@pytest.fixture
def cube():
    vertices, triangles = box_mesh(np.zeros(3), np.full(3, 0.05), 2)
    return Mesh.from_arrays(vertices, triangles)

@pytest.fixture
def square():
    """Flat 0.1 x 0.1 square in the z = 0 plane of its object frame."""

    vertices = np.array([[-0.05, -0.05, 0.0], [0.05, -0.05, 0.0],
                         [0.05, 0.05, 0.0], [-0.05, 0.05, 0.0]])
    return Mesh.from_arrays(vertices, np.array([[0, 1, 2], [0, 2, 3]]))

@pytest.fixture
def cube_pose():
    return Pose.from_rotvec([0.35, -0.45, 0.2], [0.0, 0.0, 0.6])

@pytest.fixture
def camera_image():
    """Render a scene over a constant background."""

    def make(scene, intr, background=BACKGROUND):
        rendered = render(scene, intr)
        image = np.full((intr.height, intr.width), background)
        image[rendered.silhouette] = rendered.intensity[rendered.silhouette]
        return image
    return make

@pytest.fixture
def family_intr():
    return Intrinsics(fx=500.0, fy=500.0, cx=159.5, cy=119.5, width=320, height=240)

@pytest.fixture
def family_poses():
    """Views of a node element that keep it inside the family_intr frame."""

    return [Pose.from_rotvec(r, t) for r, t in [
        ([0.4, 0.3, 0.0], [-0.03, 0.0, 0.6]),
        ([0.6, -0.2, 0.3], [0.03, 0.01, 0.62]),
        ([-0.5, 0.7, 0.2], [0.0, -0.02, 0.6]),
        ([1.1, 0.4, -0.6], [0.02, 0.02, 0.64]),
        ([0.1, -0.9, 0.5], [-0.02, 0.0, 0.58]),
        ([2.0, 1.0, 0.5], [0.0, 0.0, 0.6]),
    ]]
