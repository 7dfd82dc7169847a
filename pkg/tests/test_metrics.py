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

from edgetrack.formats import PoseLogRow
from edgetrack.geometry import Pose
from edgetrack.metrics import add_metric, evaluate, projection_metric


GT = Pose(np.eye(3), [0.0, 0.0, 1.0])


def moved(dx):
    return Pose(np.eye(3), GT.translation + [dx, 0.0, 0.0])

def test_identical_poses(intr, cube):
    assert projection_metric(GT, GT, cube, intr) == (0.0, True)
    assert add_metric(GT, GT, cube) == (0.0, True)

def test_projection_threshold_is_strict(intr, cube):
    error, ok = projection_metric(moved(0.0101), GT, cube, intr, threshold_px=1.0)
    # vertices sit between depth 0.95 and 1.05, so the mean exceeds fx * dx
    assert error == pytest.approx(0.0101 * intr.fx, rel=0.02)
    assert error > 0.0101 * intr.fx
    assert not ok
    assert projection_metric(moved(0.0101), GT, cube, intr, threshold_px=error)[1] is False

def test_projection_passes_below_threshold(intr, cube):
    error, ok = projection_metric(moved(0.01), GT, cube, intr)
    assert error < 5.0 and ok

def test_add_of_a_translation(cube):
    assert add_metric(moved(0.004), GT, cube)[0] == pytest.approx(0.004)
    assert add_metric(moved(0.004), GT, cube)[1]
    assert not add_metric(moved(0.02), GT, cube)[1]

def test_add_matches_a_loop(cube):
    est = Pose.from_rotvec([0.1, -0.3, 0.2], [0.01, 0.0, 1.02])
    expected = np.mean([np.linalg.norm(est.rotation @ v + est.translation
                                       - (GT.rotation @ v + GT.translation))
                        for v in cube.vertices])
    assert add_metric(est, GT, cube)[0] == pytest.approx(expected)

class TestEvaluate:

    def rows(self, poses):
        return [PoseLogRow(i, '1', p) for i, p in enumerate(poses)]

    def test_perfect_log(self, intr, cube):
        gt = self.rows([GT, moved(0.01)])
        summary = evaluate(gt, gt, {'1': cube}, intr)
        assert summary.count == 2 and summary.estimated == 2
        assert summary.pass_5px == 1.0 and summary.pass_1px == 1.0 and summary.add_pass == 1.0
        assert summary.mean_rotation_deg == 0.0
        assert summary.improvement_rate is None

    def test_missing_estimates_fail(self, intr, cube):
        gt = self.rows([GT, GT, GT])
        est = [PoseLogRow(0, '1', GT), PoseLogRow(1, '1', None)]
        summary = evaluate(est, gt, {'1': cube}, intr)
        assert summary.count == 3 and summary.estimated == 1
        assert summary.pass_5px == pytest.approx(1.0 / 3.0)
        assert summary.mean_projection_px == 0.0

    def test_behind_camera_estimate_fails(self, intr, cube):
        gt = self.rows([GT])
        est = self.rows([Pose(np.eye(3), [0.0, 0.0, -1.0])])
        summary = evaluate(est, gt, {'1': cube}, intr)
        assert summary.pass_5px == 0.0
        assert np.isnan(summary.mean_projection_px)

    def test_improvement_rate(self, intr, cube):
        gt = self.rows([GT, GT])
        est = self.rows([moved(0.001), moved(0.004)])
        reference = self.rows([moved(0.002), moved(0.003)])
        summary = evaluate(est, gt, {'1': cube}, intr, reference_rows=reference)
        assert summary.improvement_rate == 0.5
        assert any(line.startswith('P++') for line in summary.lines())

    def test_rows_without_ground_truth_are_skipped(self, intr, cube):
        gt = [PoseLogRow(0, '1', None), PoseLogRow(1, '1', GT)]
        summary = evaluate(self.rows([GT, GT]), gt, {'1': cube}, intr)
        assert summary.count == 1

def test_summary_lines(intr, cube):
    rows = [PoseLogRow(0, '1', GT)]
    lines = evaluate(rows, rows, {'1': cube}, intr).lines()
    assert lines[0] == 'evaluated 1 object frames, 1 with a pose'
    assert '2D projection < 5 px: 100.0%' in lines
    assert len(lines) == 7
