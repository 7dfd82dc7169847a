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
Contour-based refinement (S1).

Scanlines are laid along the outward normals of the rendered silhouette.
Oriented edge responses are sampled along every scanline and their local
maxima become correspondence hypotheses. The pose increment minimizes the
Charbonnier-weighted point-to-line distances between the projected contour
and the nearest hypotheses with iteratively reweighted least squares.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import ndimage

from edgetrack.exceptions import DegenerateGeometry, TooFewScanlines
from edgetrack.geometry import (MotionDelta, apply_delta, motion_jacobian, project,
                                solve_normal_equations, transform_contour_points)
from edgetrack.imageops import oriented_responses, rotated_sobel_bank
from edgetrack.raster import extract_contour, render


logger = logging.getLogger(__name__)

FULL6D = 'full6d'
INPLANE3 = 'inplane3'
# unknowns per mode, indices into (dr_x, dr_y, dr_z, dt_x, dt_y, dt_z)
UNKNOWNS = {FULL6D: (0, 1, 2, 3, 4, 5), INPLANE3: (2, 3, 4)}
CHARBONNIER_EPS = 0.001
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """Edge hypotheses h_ij = origins[i] + offsets[i][j] * normals[i]."""

    origins: np.ndarray
    normals: np.ndarray
    offsets: tuple
    responses: tuple
    length: int

    @property
    def has_any(self):
        return np.array([len(o) > 0 for o in self.offsets], dtype=bool)

    @cached_property
    def table(self):
        """Offsets as an (m, k) array padded with NaN."""

        width = max([len(o) for o in self.offsets] + [1])
        out = np.full((len(self.offsets), width), np.nan)
        for i, o in enumerate(self.offsets):
            out[i, :len(o)] = o
        return out

    def __len__(self):
        return len(self.offsets)

    def points(self, i):
        return self.origins[i] + self.offsets[i][:, None] * self.normals[i]


@dataclass(frozen=True)
class ContourSolveStats:
    irls_mean_residual: float
    mean_hyp_distance: float
    valid_ratio: float
    converged: bool
    scanlines: int = 0
    found: int = 0

    @classmethod
    def failed(cls, scanlines=0):
        return cls(float('inf'), float('inf'), float('inf'), False, scanlines, 0)


def charbonnier_weight(r, eps=CHARBONNIER_EPS):
    return 1.0 / np.sqrt(np.square(r) + eps * eps)

def charbonnier(r, eps=CHARBONNIER_EPS):
    return np.sqrt(np.square(r) + eps * eps)

def weighted_mean_abs(r, weights):
    return float(np.sum(weights * np.abs(r)) / np.sum(weights))

def find_hypotheses(camera, contour, length=15, t_e=0.08, bank=None, responses=None):
    """Search edge hypotheses along the scanlines of `contour`.

    `responses` may hold the absolute oriented responses of `camera` for every
    kernel of `bank` (see imageops.oriented_responses); they are computed here
    otherwise.
    """

    if length < 3 or length % 2 == 0:
        raise ValueError('scanline length must be odd and at least 3')
    if len(contour) == 0:
        raise ValueError('empty contour')
    if bank is None:
        bank = rotated_sobel_bank()
    if responses is None:
        responses = np.abs(oriented_responses(camera, bank))

    m = len(contour)
    half = (length - 1) // 2
    steps = np.arange(-half, half + 1, dtype=np.float64)
    origins, normals = contour.points_2d, contour.normals
    positions = origins[:, None, :] + steps[None, :, None] * normals[:, None, :]
    bins = bank.nearest(np.degrees(np.arctan2(normals[:, 1], normals[:, 0])))

    samples = np.zeros((m, length))
    for b in np.unique(bins):
        sel = bins == b
        coords = [positions[sel, :, 1].ravel(), positions[sel, :, 0].ravel()]
        samples[sel] = ndimage.map_coordinates(responses[b], coords, order=1,
                                               mode='constant', cval=0.0).reshape(-1, length)

    left, mid, right = samples[:, :-2], samples[:, 1:-1], samples[:, 2:]
    # a two-sample plateau (sharp step between samples) counts once
    peaks = (mid > left) & (mid >= right) & (mid > t_e)
    denom = left - 2.0 * mid + right
    frac = np.divide(0.5 * (left - right), denom, out=np.zeros_like(denom), where=denom < 0)
    offsets = steps[None, 1:-1] + np.clip(frac, -0.5, 0.5)

    rows, cols = np.nonzero(peaks)
    splits = np.cumsum(np.bincount(rows, minlength=m))[:-1]
    return HypothesisSet(origins=origins, normals=normals,
                         offsets=tuple(np.split(offsets[rows, cols], splits)),
                         responses=tuple(np.split(mid[rows, cols], splits)), length=length)

def _nearest(candidates, positions):
    """Closest hypothesis of every scanline to `positions` -> (n, 2).

    `candidates` is (origins, normals, table) restricted to scanlines with at
    least one hypothesis; ties go to the first hypothesis on the scanline.
    """

    origins, normals, table = candidates
    points = origins[:, None, :] + table[:, :, None] * normals[:, None, :]
    dist = np.sum((points - positions[:, None, :]) ** 2, axis=2)
    best = np.argmin(np.where(np.isnan(dist), np.inf, dist), axis=1)
    return points[np.arange(len(points)), best]

def _prepare(contour, hyps, pose, intr):
    valid = np.nonzero(hyps.has_any)[0]
    points = contour.points_3d[valid]
    jac = motion_jacobian(points, pose.translation, intr)
    normals = hyps.normals[valid]
    return (valid, project(points, intr), normals, jac,
            np.einsum('ni,nij->nj', normals, jac),
            (hyps.origins[valid], normals, hyps.table[valid]))

def _summary(x, normals, candidates, m, found, weights=None):
    """Statistics at contour positions `x`. The IRLS residual is the mean
    absolute point-to-line residual under `weights`, Charbonnier weights of
    the residuals themselves when none are given."""

    h = _nearest(candidates, x)
    r = np.einsum('ni,ni->n', normals, h - x)
    d = np.linalg.norm(h - x, axis=1)
    if weights is None:
        weights = charbonnier_weight(r)
    return ContourSolveStats(irls_mean_residual=weighted_mean_abs(r, weights),
                             mean_hyp_distance=float(np.mean(d)),
                             valid_ratio=m / found, converged=True,
                             scanlines=m, found=found)

def contour_stats(contour, hyps, pose, intr):
    """Statistics of the contour at `pose` without solving."""

    m = len(hyps)
    valid, x, normals, _, _, candidates = _prepare(contour, hyps, pose, intr)
    if len(valid) == 0:
        return ContourSolveStats.failed(m)
    return _summary(x, normals, candidates, m, len(valid))

def solve_contour(contour, hyps, pose, intr, mode=FULL6D, reweights=3,
                  eps=CHARBONNIER_EPS):
    """One IRLS solve of the linearized contour error.

    The first solve is unweighted; each of the `reweights` following solves
    re-selects the nearest hypotheses at the predicted contour and weights
    every scanline with the Charbonnier weight of its previous residual. The
    returned statistics use the weights of the last solve.
    """

    cols = list(UNKNOWNS[mode])
    m = len(hyps)
    valid, x, normals, jac, rows, candidates = _prepare(contour, hyps, pose, intr)
    if len(valid) < len(cols):
        raise TooFewScanlines('{} scanlines with hypotheses, {} required'.format(
            len(valid), len(cols)))

    a = rows[:, cols]
    jac = jac[:, :, cols]
    delta = np.zeros(len(cols))
    weights = np.ones(len(valid))
    for it in range(reweights + 1):
        moved = x + jac @ delta
        h = _nearest(candidates, moved)
        r0 = np.einsum('ni,ni->n', normals, h - x)
        if it > 0:
            weights = charbonnier_weight(r0 - a @ delta, eps)
        ata = a.T @ (weights[:, None] * a)
        atb = a.T @ (weights * r0)
        delta = solve_normal_equations(ata, atb, MAX_CONDITION, DegenerateGeometry,
                                       'degenerate geometry')

    full = np.zeros(6)
    full[cols] = delta
    stats = _summary(x + jac @ delta, normals, candidates, m, len(valid), weights)
    return MotionDelta.from_vector(full), stats

def _contour_and_hypotheses(camera, mesh, pose, intr, cfg, bank, responses):
    rendered = render([(mesh, pose)], intr)
    contour = extract_contour(rendered, 1, intr, cfg.contour_points,
                              crease_depth=cfg.crease_depth, crease_step=cfg.crease_step,
                              corner_turn=cfg.corner_turn)
    hyps = find_hypotheses(camera, contour, cfg.scanline_length, cfg.t_e, bank, responses)
    return contour, hyps

def refine_contour_stage(camera, mesh, pose, intr, cfg, mode=FULL6D, bank=None,
                         responses=None):
    """Render once, search hypotheses once, then run `cfg.reps_s1` solves
    moving only the stored camera-frame contour between them."""

    if bank is None:
        bank = rotated_sobel_bank(cfg.bank_size)
    contour, hyps = _contour_and_hypotheses(camera, mesh, pose, intr, cfg, bank, responses)
    points = contour.points_3d
    stats = None
    for _ in range(cfg.reps_s1):
        delta, stats = solve_contour(replace(contour, points_3d=points), hyps, pose,
                                     intr, mode, cfg.reweights)
        points = transform_contour_points(points, pose, delta)
        pose = apply_delta(pose, delta)
    if stats is None:
        stats = contour_stats(contour, hyps, pose, intr)
    logger.debug('S1 %s: residual %.4f, distance %.4f, valid %.3f',
                 mode, stats.irls_mean_residual, stats.mean_hyp_distance,
                 stats.valid_ratio)
    return pose, stats

def score_contour(camera, mesh, pose, intr, cfg, bank=None, responses=None):
    """Contour statistics of `pose` against `camera` (no pose update)."""

    if bank is None:
        bank = rotated_sobel_bank(cfg.bank_size)
    contour, hyps = _contour_and_hypotheses(camera, mesh, pose, intr, cfg, bank, responses)
    return contour_stats(contour, hyps, pose, intr)
