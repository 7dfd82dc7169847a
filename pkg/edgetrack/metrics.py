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
Pose error metrics and evaluation of pose logs against ground truth.
"""

from dataclasses import dataclass

import numpy as np

from edgetrack.exceptions import TrackingError
from edgetrack.geometry import project, rotation_error, translation_error


PROJECTION_THRESHOLD_PX = 5.0
ADD_DIAMETER_FRACTION = 0.1


def projection_metric(est, gt, mesh, intr, threshold_px=PROJECTION_THRESHOLD_PX):
    """Mean 2D distance between the vertex projections under both poses."""

    x_est = project(est.transform(mesh.vertices), intr)
    x_gt = project(gt.transform(mesh.vertices), intr)
    mean = float(np.mean(np.linalg.norm(x_est - x_gt, axis=1)))
    return mean, mean < threshold_px

def add_metric(est, gt, mesh):
    """Mean 3D vertex distance; passes below a tenth of the diameter."""

    diff = est.transform(mesh.vertices) - gt.transform(mesh.vertices)
    mean = float(np.mean(np.linalg.norm(diff, axis=1)))
    return mean, mean < ADD_DIAMETER_FRACTION * mesh.diameter


@dataclass(frozen=True)
class EvalSummary:
    count: int
    estimated: int
    pass_5px: float
    pass_1px: float
    add_pass: float
    mean_projection_px: float
    mean_rotation_deg: float
    mean_translation_m: float
    improvement_rate: float = None

    def lines(self):
        out = ['evaluated {} object frames, {} with a pose'.format(self.count, self.estimated),
               '2D projection < 5 px: {:.1f}%'.format(100 * self.pass_5px),
               '2D projection < 1 px: {:.1f}%'.format(100 * self.pass_1px),
               'ADD < 0.1 d: {:.1f}%'.format(100 * self.add_pass),
               'mean 2D projection error: {:.3f} px'.format(self.mean_projection_px),
               'mean rotation error: {:.3f} deg'.format(self.mean_rotation_deg),
               'mean translation error: {:.5f} m'.format(self.mean_translation_m)]
        if self.improvement_rate is not None:
            out.append('P++ (improved over reference): {:.1f}%'.format(100 * self.improvement_rate))
        return out


def _projection_or_inf(est, gt, mesh, intr):
    try:
        return projection_metric(est, gt, mesh, intr)[0]
    except TrackingError:
        return np.inf

def evaluate(est_rows, gt_rows, meshes, intr, reference_rows=None):
    """Compare estimated pose log rows with ground truth rows.

    Rows are matched on (frame, object id). Ground truth rows without an
    estimate, or with an empty pose, count as failures. With `reference_rows`
    the improvement rate is the fraction of object frames whose projection
    error is lower than the reference estimate's.
    """

    est = {r.key: r for r in est_rows}
    ref = None if reference_rows is None else {r.key: r for r in reference_rows}
    proj, rot, trans, add_ok, improved = [], [], [], [], []
    count = 0
    for g in gt_rows:
        if g.pose is None:
            continue
        count += 1
        mesh = meshes[g.object_id]
        e = est.get(g.key)
        if e is None or e.pose is None:
            proj.append(np.inf)
            add_ok.append(False)
            if ref is not None:
                improved.append(False)
            continue
        err = _projection_or_inf(e.pose, g.pose, mesh, intr)
        proj.append(err)
        rot.append(rotation_error(e.pose, g.pose))
        trans.append(translation_error(e.pose, g.pose))
        add_ok.append(add_metric(e.pose, g.pose, mesh)[1])
        if ref is not None:
            r = ref.get(g.key)
            base = np.inf if r is None or r.pose is None else \
                _projection_or_inf(r.pose, g.pose, mesh, intr)
            improved.append(bool(err < base))

    proj = np.array(proj, dtype=np.float64)
    finite = proj[np.isfinite(proj)]
    return EvalSummary(
        count=count, estimated=len(rot),
        pass_5px=float(np.mean(proj < PROJECTION_THRESHOLD_PX)) if count else 0.0,
        pass_1px=float(np.mean(proj < 1.0)) if count else 0.0,
        add_pass=float(np.mean(add_ok)) if count else 0.0,
        mean_projection_px=float(np.mean(finite)) if len(finite) else float('nan'),
        mean_rotation_deg=float(np.mean(rot)) if rot else float('nan'),
        mean_translation_m=float(np.mean(trans)) if trans else float('nan'),
        improvement_rate=float(np.mean(improved)) if ref is not None and improved else None)
